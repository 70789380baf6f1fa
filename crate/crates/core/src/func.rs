//! Periodic grid functions on `[0, L)^n`.
//!
//! Transform normalization: for samples `f(x_i)`, `x_i = i L / N`,
//!
//! ```text
//! fhat(k) = dx^n * sum_i f(x_i) exp(-i xi_k . x_i),   xi_k = 2 pi k / L,
//! f(x_i)  = L^-n * sum_k fhat(k) exp(i xi_k . x_i),
//! ```
//!
//! with `k` in `(-N/2, N/2]`. This is a Riemann sum for the continuous
//! transform and gives Parseval as `sum_k |fhat(k)|^2 = L^n * ||f||_2^2`.

use std::cell::RefCell;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized in-place FFT over an `n`-dimensional `N^n` row-major array.
pub fn fft_nd(data: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    match dim {
        1 => fft.process(data),
        2 => {
            for row in data.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                fft.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
        _ => panic!("dimension must be 1 or 2"),
    }
}

/// Signed frequency integer of FFT slot `i`, in `(-N/2, N/2]`.
#[inline]
pub fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Uniform periodic lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    dim: usize,
    length: f64,
    samples: usize,
}

impl Lattice {
    pub fn new(dim: usize, length: f64, samples: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Lattice(format!("period {length} must be positive")));
        }
        if samples < 8 || !samples.is_power_of_two() {
            return Err(Error::Lattice(format!("sample count {samples} must be a power of two >= 8")));
        }
        Ok(Self { dim, length, samples })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn samples(&self) -> usize {
        self.samples
    }
    pub fn dx(&self) -> f64 {
        self.length / self.samples as f64
    }
    /// Total number of grid points `N^n`.
    pub fn size(&self) -> usize {
        self.samples.pow(self.dim as u32)
    }
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }
    /// Largest representable frequency `pi N / L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.samples as f64 / self.length
    }
    /// Frequency spacing `2 pi / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Multi-index of flat slot `i`.
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        match self.dim {
            1 => [i, 0],
            _ => [i / self.samples, i % self.samples],
        }
    }

    /// Coordinates of sample `i`.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let m = self.multi_index(i);
        [m[0] as f64 * self.dx(), m[1] as f64 * self.dx()]
    }

    /// Frequency vector of FFT slot `i`.
    pub fn xi(&self, i: usize) -> [f64; 2] {
        let m = self.multi_index(i);
        let s = self.dxi();
        let a = signed_mode(m[0], self.samples) as f64 * s;
        let b = if self.dim == 2 { signed_mode(m[1], self.samples) as f64 * s } else { 0.0 };
        [a, b]
    }

    pub fn xi_norm(&self, i: usize) -> f64 {
        let x = self.xi(i);
        x[0].hypot(x[1])
    }

    /// Periodic representative of `z` in `[-L/2, L/2)`.
    pub fn wrap(&self, z: f64) -> f64 {
        let l = self.length;
        (z + 0.5 * l).rem_euclid(l) - 0.5 * l
    }
}

/// Complex samples on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    lattice: Lattice,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(lattice: Lattice, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice.size() {
            return Err(Error::Lattice(format!("{} values for {} points", values.len(), lattice.size())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("non-finite sample".into()));
        }
        Ok(Self { lattice, values })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        Self { lattice, values: vec![Complex64::new(0.0, 0.0); lattice.size()] }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let d = lattice.dim();
        let values = (0..lattice.size()).map(|i| f(&lattice.point(i)[..d])).collect();
        Self { lattice, values }
    }

    pub fn from_real_fn(lattice: Lattice, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(lattice, |x| Complex64::new(f(x), 0.0))
    }

    /// Wrap raw values without the finiteness check.
    pub(crate) fn from_raw(lattice: Lattice, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), lattice.size());
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self { lattice: self.lattice, values }
    }

    /// `sum f conj(g) dx^n`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s * self.lattice.cell_volume()
    }

    /// Forward transform in the documented normalization.
    pub fn dft(&self) -> GridFunction {
        let mut v = self.values.clone();
        fft_nd(&mut v, self.lattice.dim(), self.lattice.samples(), false);
        let c = self.lattice.cell_volume();
        v.iter_mut().for_each(|z| *z *= c);
        Self { lattice: self.lattice, values: v }
    }

    /// Inverse of [`GridFunction::dft`].
    pub fn inverse_dft(&self) -> GridFunction {
        let mut v = self.values.clone();
        fft_nd(&mut v, self.lattice.dim(), self.lattice.samples(), true);
        let c = 1.0 / self.lattice.volume();
        v.iter_mut().for_each(|z| *z *= c);
        Self { lattice: self.lattice, values: v }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_slice(&self.abs(), self.lattice.cell_volume(), p)
    }

    pub fn local_average(&self, q: &DyadicCube, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let w = self.abs();
        if p.is_infinite() {
            return local_sup(&self.lattice, &w, q);
        }
        let ig = CellIntegrator::new(&self.lattice, &w, p);
        let (lo, hi) = cube_bounds(q);
        let tol = 1e-12 * self.lattice.length();
        let inside = (0..self.lattice.dim()).all(|a| lo[a] >= -tol && hi[a] <= self.lattice.length() + tol);
        if !inside {
            return Err(Error::CubeOutsideDomain);
        }
        let int = ig.integral(&lo[..q.dim()], &hi[..q.dim()]);
        Ok((int / q.volume()).max(0.0).powf(1.0 / p))
    }

    /// Text form: header `n L N`, then one `re im` line per sample.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.lattice.dim(), self.lattice.length(), self.lattice.samples());
        for v in &self.values {
            s.push_str(&format!("{} {}\n", v.re, v.im));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let lattice = parse_header(lines.next().ok_or_else(|| Error::Parse("missing header".into()))?)?;
        let mut values = Vec::with_capacity(lattice.size());
        for line in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("sample line `{line}`")))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("sample line `{line}`")))
            };
            let re = next()?;
            let im = next()?;
            values.push(Complex64::new(re, im));
        }
        Self::new(lattice, values)
    }

    /// Binary form: the text header line, then little-endian f64 pairs.
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.lattice.dim(), self.lattice.length(), self.lattice.samples())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Parse(e.to_string()))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("missing header".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::Parse(e.to_string()))?;
        let lattice = parse_header(header)?;
        let body = &bytes[nl + 1..];
        if body.len() != 16 * lattice.size() {
            return Err(Error::Parse(format!("expected {} bytes, found {}", 16 * lattice.size(), body.len())));
        }
        let values = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Self::new(lattice, values)
    }
}

fn parse_header(line: &str) -> Result<Lattice> {
    let t: Vec<&str> = line.split_whitespace().collect();
    if t.len() != 3 {
        return Err(Error::Parse(format!("header `{line}`")));
    }
    let bad = || Error::Parse(format!("header `{line}`"));
    Lattice::new(
        t[0].parse().map_err(|_| bad())?,
        t[1].parse().map_err(|_| bad())?,
        t[2].parse().map_err(|_| bad())?,
    )
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Exponent(p))
    }
}

/// `(sum |w_i|^p dv)^{1/p}`, max for `p = inf`.
pub fn lp_norm_slice(w: &[f64], dv: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(w.iter().fold(0.0, |m, &x| m.max(x.abs())));
    }
    if p == 1.0 {
        return Ok(w.iter().map(|x| x.abs()).sum::<f64>() * dv);
    }
    if p == 2.0 {
        return Ok((w.iter().map(|x| x * x).sum::<f64>() * dv).sqrt());
    }
    // scale by the max to avoid overflow in |w|^p
    let m = w.iter().fold(0.0, |m: f64, &x| m.max(x.abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = w.iter().map(|x| (x.abs() / m).powf(p)).sum();
    Ok(m * (s * dv).powf(1.0 / p))
}

pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    f.lp_norm(p)
}

pub fn local_average(f: &GridFunction, q: &DyadicCube, p: f64) -> Result<f64> {
    f.local_average(q, p)
}

pub fn dft(f: &GridFunction) -> GridFunction {
    f.dft()
}

pub fn inverse_dft(f: &GridFunction) -> GridFunction {
    f.inverse_dft()
}

fn cube_bounds(q: &DyadicCube) -> ([f64; 2], [f64; 2]) {
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for a in 0..q.dim() {
        lo[a] = q.lower(a);
        hi[a] = q.upper(a);
    }
    (lo, hi)
}

/// Max of `w` over cells meeting the interior of `q`.
fn local_sup(lat: &Lattice, w: &[f64], q: &DyadicCube) -> Result<f64> {
    let (lo, hi) = cube_bounds(q);
    let mut ranges = [(0usize, 0usize); 2];
    for a in 0..lat.dim() {
        let (i0, i1) = cell_range(lat, lo[a], hi[a]);
        if i0 >= i1 {
            return Err(Error::CubeOutsideDomain);
        }
        ranges[a] = (i0, i1);
    }
    let n = lat.samples();
    let mut m = 0.0f64;
    if lat.dim() == 1 {
        for i in ranges[0].0..ranges[0].1 {
            m = m.max(w[i]);
        }
    } else {
        for i in ranges[0].0..ranges[0].1 {
            for j in ranges[1].0..ranges[1].1 {
                m = m.max(w[i * n + j]);
            }
        }
    }
    Ok(m)
}

/// Cells `[i0, i1)` whose interior meets `(lo, hi)`, clipped to the domain.
pub fn cell_range(lat: &Lattice, lo: f64, hi: f64) -> (usize, usize) {
    let dx = lat.dx();
    let n = lat.samples() as f64;
    let i0 = (lo / dx).floor().clamp(0.0, n) as usize;
    let i1 = (hi / dx).ceil().clamp(0.0, n) as usize;
    (i0, i1)
}

/// Exact integrals of a piecewise-constant density over boxes.
///
/// Cell `i` is `[x_i, x_{i+1})` carrying `w_i^p`. Boxes are clipped to the
/// domain `[0, L)^n` (no periodic wrap).
pub struct CellIntegrator {
    dim: usize,
    n: usize,
    dx: f64,
    dens: Vec<f64>,
    /// Summed-area table of size `(n+1)^dim`.
    sat: Vec<f64>,
}

impl CellIntegrator {
    pub fn new(lat: &Lattice, w: &[f64], p: f64) -> Self {
        let dens: Vec<f64> = if p == 1.0 {
            w.iter().map(|x| x.abs()).collect()
        } else {
            w.iter().map(|x| x.abs().powf(p)).collect()
        };
        Self::from_density(lat, dens)
    }

    pub fn from_density(lat: &Lattice, dens: Vec<f64>) -> Self {
        let n = lat.samples();
        let dim = lat.dim();
        let sat = if dim == 1 {
            let mut s = vec![0.0; n + 1];
            for i in 0..n {
                s[i + 1] = s[i] + dens[i];
            }
            s
        } else {
            let m = n + 1;
            let mut s = vec![0.0; m * m];
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += dens[i * n + j];
                    s[(i + 1) * m + j + 1] = s[i * m + j + 1] + row;
                }
            }
            s
        };
        Self { dim, n, dx: lat.dx(), dens, sat }
    }

    /// `(cell, fraction)` of coordinate `x` clipped to `[0, L]`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let t = (x / self.dx).clamp(0.0, self.n as f64);
        let i = (t.floor() as usize).min(self.n);
        if i == self.n {
            (self.n, 0.0)
        } else {
            (i, t - i as f64)
        }
    }

    /// `int_0^x` (1-D) or `int_{[0,x]x[0,y]}` (2-D) of the density, in
    /// cell units.
    fn cumulative(&self, x: &[f64]) -> f64 {
        if self.dim == 1 {
            let (i, f) = self.locate(x[0]);
            let part = if i < self.n { f * self.dens[i] } else { 0.0 };
            self.sat[i] + part
        } else {
            let m = self.n + 1;
            let (i, fi) = self.locate(x[0]);
            let (j, fj) = self.locate(x[1]);
            let s = |a: usize, b: usize| self.sat[a * m + b];
            let mut v = s(i, j);
            if i < self.n {
                v += fi * (s(i + 1, j) - s(i, j));
            }
            if j < self.n {
                v += fj * (s(i, j + 1) - s(i, j));
            }
            if i < self.n && j < self.n {
                v += fi * fj * self.dens[i * self.n + j];
            }
            v
        }
    }

    /// Integral of the density over the box `[lo, hi)`.
    pub fn integral(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let raw = if self.dim == 1 {
            self.cumulative(&hi[..1]) - self.cumulative(&lo[..1])
        } else {
            self.cumulative(&[hi[0], hi[1]]) - self.cumulative(&[lo[0], hi[1]]) - self.cumulative(&[hi[0], lo[1]])
                + self.cumulative(&[lo[0], lo[1]])
        };
        raw.max(0.0) * self.dx.powi(self.dim as i32)
    }

    /// Measure of `[lo, hi) ∩ [0, L)^n`.
    pub fn clipped_volume(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let l = self.n as f64 * self.dx;
        (0..self.dim).map(|a| (hi[a].min(l) - lo[a].max(0.0)).max(0.0)).product()
    }
}

/// Standard complex Gaussian samples.
pub fn random_function(lat: Lattice, rng: &mut impl Rng) -> GridFunction {
    let values = (0..lat.size())
        .map(|_| Complex64::new(gauss(rng), gauss(rng)))
        .collect();
    GridFunction::from_raw(lat, values)
}

/// Box-Muller normal deviate.
pub fn gauss(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Random function whose transform lives in `{|xi| <= band}`.
pub fn random_bandlimited(lat: Lattice, band: f64, rng: &mut impl Rng) -> GridFunction {
    let mut hat = GridFunction::zeros(lat);
    for i in 0..lat.size() {
        if lat.xi_norm(i) <= band {
            hat.values[i] = Complex64::new(gauss(rng), gauss(rng));
        }
    }
    hat.inverse_dft()
}

/// Outcome of an empirical Bernstein sweep.
#[derive(Clone, Debug)]
pub struct BernsteinReport {
    pub ratio: f64,
    pub argmax: GridFunction,
}

/// `||f||_s / (2^{jn(1/r - 1/s)} ||f||_r)`.
pub fn bernstein_ratio(f: &GridFunction, j: i32, r: f64, s: f64) -> Result<f64> {
    let n = f.lattice().dim() as f64;
    let scale = 2f64.powf(j as f64 * n * (1.0 / r - 1.0 / s));
    Ok(f.lp_norm(s)? / (scale * f.lp_norm(r)?))
}

/// Worst Bernstein ratio over random band-limited trials (plus the
/// Dirichlet kernel of the band) with spectrum in `{|xi| <= 2^j}`.
pub fn bernstein_check(lat: Lattice, j: i32, r: f64, s: f64, trials: usize, seed: u64) -> Result<BernsteinReport> {
    check_exponent(r)?;
    check_exponent(s)?;
    if r > s {
        return Err(Error::Parameter(format!("need r <= s, got r = {r}, s = {s}")));
    }
    let band = 2f64.powi(j);
    if band >= lat.nyquist() {
        return Err(Error::Nyquist);
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = dirichlet(lat, band);
    let mut worst = bernstein_ratio(&best, j, r, s)?;
    for _ in 0..trials {
        let f = random_bandlimited(lat, band, &mut rng);
        let q = bernstein_ratio(&f, j, r, s)?;
        if q > worst {
            worst = q;
            best = f;
        }
    }
    Ok(BernsteinReport { ratio: worst, argmax: best })
}

/// Inverse transform of the indicator of `{|xi| <= band}`.
pub fn dirichlet(lat: Lattice, band: f64) -> GridFunction {
    let mut hat = GridFunction::zeros(lat);
    for i in 0..lat.size() {
        if lat.xi_norm(i) <= band {
            hat.values[i] = Complex64::new(1.0, 0.0);
        }
    }
    hat.inverse_dft()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat1(l: f64, n: usize) -> Lattice {
        Lattice::new(1, l, n).unwrap()
    }

    #[test]
    fn constant_transforms_to_zero_mode() {
        let lat = lat1(2.0, 64);
        let f = GridFunction::from_real_fn(lat, |_| 1.0);
        let h = f.dft();
        assert!((h.values()[0].re - 2.0).abs() < 1e-12);
        assert!(h.values()[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn exponential_transforms_to_mode_one() {
        let lat = lat1(3.0, 32);
        let f = GridFunction::from_fn(lat, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x[0] / 3.0));
        let h = f.dft();
        for (i, v) in h.values().iter().enumerate() {
            let want = if i == 1 { 3.0 } else { 0.0 };
            assert!((v.norm() - want).abs() < 1e-12, "slot {i}");
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..100 {
            let lat = if t % 2 == 0 { lat1(5.0, 128) } else { Lattice::new(2, 1.5, 16).unwrap() };
            let f = random_function(lat, &mut rng);
            let h = f.dft();
            let lhs: f64 = h.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / lat.volume();
            let rhs = f.lp_norm(2.0).unwrap().powi(2);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs);
            let back = h.inverse_dft();
            let err: f64 = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = f.lp_norm(f64::INFINITY).unwrap();
            assert!(err <= 1e-12 * scale);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let lat = lat1(1.0, 64);
        let half = GridFunction::from_real_fn(lat, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        assert!((half.lp_norm(1.0).unwrap() - 0.5).abs() < 1e-15);
        let lat = lat1(3.0, 64);
        let one = GridFunction::from_real_fn(lat, |_| 1.0);
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert!((one.lp_norm(p).unwrap() - 3f64.powf(1.0 / p)).abs() < 1e-12);
        }
        assert_eq!(one.lp_norm(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(one.lp_norm(0.5), Err(Error::Exponent(0.5)));
    }

    #[test]
    fn local_average_examples() {
        let lat = lat1(1.0, 64);
        let q = DyadicCube::standard(-2, &[1]);
        let chi = GridFunction::from_real_fn(lat, |x| if (0.25..0.5).contains(&x[0]) { 1.0 } else { 0.0 });
        for p in [1.0, 2.0, 3.5] {
            assert!((chi.local_average(&q, p).unwrap() - 1.0).abs() < 1e-14);
        }
        let c = GridFunction::from_real_fn(lat, |_| 0.7);
        assert!((c.local_average(&q, 2.0).unwrap() - 0.7).abs() < 1e-14);
        let far = DyadicCube::standard(-2, &[9]);
        assert_eq!(c.local_average(&far, 1.0), Err(Error::CubeOutsideDomain));
    }

    #[test]
    fn root_average_matches_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lat = lat1(4.0, 256);
        let f = random_function(lat, &mut rng);
        let root = DyadicCube::standard(2, &[0]);
        for p in [1.0, 2.0, 3.0] {
            let lhs = f.local_average(&root, p).unwrap().powf(p) * root.volume();
            let rhs = f.lp_norm(p).unwrap().powf(p);
            assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }
    }

    #[test]
    fn two_dim_integrator_matches_brute_force() {
        let lat = Lattice::new(2, 1.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_function(lat, &mut rng);
        let ig = CellIntegrator::new(&lat, &f.abs(), 1.0);
        let (lo, hi) = ([0.1, 0.3], [0.77, 0.52]);
        // brute force with fine subsampling of each cell
        let sub = 64;
        let h = lat.dx() / sub as f64;
        let w = f.abs();
        let mut want = 0.0;
        for i in 0..16 * sub {
            for j in 0..16 * sub {
                let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                if x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1] {
                    want += w[(i / sub) * 16 + j / sub] * h * h;
                }
            }
        }
        assert!((ig.integral(&lo, &hi) - want).abs() < 1e-2 * want);
    }

    #[test]
    fn bernstein_identity_case() {
        let lat = lat1(8.0, 512);
        let rep = bernstein_check(lat, 2, 2.0, 2.0, 20, 4).unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernstein_pure_frequency() {
        let lat = lat1(8.0, 512);
        let f = GridFunction::from_fn(lat, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * x[0] / 8.0));
        for j in 2..6 {
            let got = bernstein_ratio(&f, j, 1.0, 4.0).unwrap();
            let want = 8f64.powf(0.25 - 1.0) * 2f64.powf(-(j as f64) * 0.75);
            assert!((got - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn bernstein_dirichlet_bounded() {
        let lat = lat1(16.0, 4096);
        let ratios: Vec<f64> = (2..=6)
            .map(|j| bernstein_ratio(&dirichlet(lat, 2f64.powi(j)), j, 1.0, 2.0).unwrap())
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 4.0, "{ratios:?}");
    }

    #[test]
    fn bernstein_rejects_nyquist() {
        let lat = lat1(1.0, 64);
        assert!(matches!(bernstein_check(lat, 8, 1.0, 2.0, 1, 0), Err(Error::Nyquist)));
    }

    #[test]
    fn text_and_binary_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_function(Lattice::new(2, 2.5, 8).unwrap(), &mut rng);
        assert_eq!(GridFunction::from_text(&f.to_text()).unwrap(), f);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(GridFunction::read_binary(&mut buf.as_slice()).unwrap(), f);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norms_nest(seed in any::<u64>(), p in 1.0f64..4.0, dq in 0.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lat = lat1(3.0, 64);
            let f = random_function(lat, &mut rng);
            let q = p + dq;
            let lhs = f.lp_norm(p).unwrap();
            let rhs = 3f64.powf(1.0 / p - 1.0 / q) * f.lp_norm(q).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn local_averages_increase_in_p(seed in any::<u64>(), k in -4i32..0, p in 1.0f64..3.0, dq in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lat = lat1(1.0, 128);
            let f = random_function(lat, &mut rng);
            let q = DyadicCube::standard(k, &[0]);
            let a = f.local_average(&q, p).unwrap();
            let b = f.local_average(&q, p + dq).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
