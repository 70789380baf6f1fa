//! Oscillatory Fourier multipliers, Miyachi and subdyadic checks, kernel
//! transfer and the dispersive propagator.

use num_complex::Complex64;

use crate::dyadic::{CubeFamily, DyadicCube, GridShift, SparseCollection};
use crate::error::{Error, Result};
use crate::func::{fft_nd, GridFunction, Lattice};
use crate::pdo::{band_cutoff, decay_fit, psi, DecayFit};
use crate::sparse::{in_region_exact, Q, sparse_form, sparse_from_decaying, tiling, ExponentPair, Level};
use crate::symbol::{base_step, finite_difference, ols_slope, ClassParams, SeminormEntry, SeminormTable, Symbol, SymbolForm, GROWTH_TOLERANCE};

/// `|xi|^-beta e^{i|xi|^alpha}` on `{|xi|^alpha >= 1}`.
///
/// Declared class `(m, rho) = (-beta, 1 - alpha)`; for `alpha < 0` the
/// support is `{|xi| <= 1}`. Returns 0 where the modulus is singular.
pub fn model_multiplier(alpha: f64, beta: f64) -> Result<Symbol> {
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Parameter(format!("alpha = {alpha}, beta = {beta}")));
    }
    let params = ClassParams { m: -beta, rho: 1.0 - alpha, delta: 0.0 };
    Ok(Symbol::new(
        params,
        format!("multiplier:alpha={alpha},beta={beta}"),
        SymbolForm::Multiplier { alpha, beta },
        move |_x, xi| multiplier_value(alpha, beta, xi.iter().map(|t| t * t).sum::<f64>().sqrt()),
    ))
}

pub fn multiplier_value(alpha: f64, beta: f64, r: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    if r == 0.0 {
        return zero;
    }
    let ra = r.powf(alpha);
    if !(ra >= 1.0) {
        return zero;
    }
    Complex64::from_polar(r.powf(-beta), ra)
}

/// Default `|xi|` sweep: `[2^{1/alpha}, 2^10]` for `alpha > 0`,
/// `[2^-8, 2^-1]` for `alpha < 0`.
pub fn default_sweep(alpha: f64) -> (f64, f64) {
    if alpha > 0.0 {
        (2f64.powf(1.0 / alpha).max(2.0), 1024.0)
    } else {
        (2f64.powi(-8), 0.5)
    }
}

/// Oscillation scale `min(|xi|^{1-alpha}, |xi|)`.
fn local_scale(alpha: f64, r: f64) -> f64 {
    r.powf(1.0 - alpha).min(r)
}

fn band_edges(range: (f64, f64)) -> Result<(i32, i32)> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter(format!("frequency range ({lo}, {hi})")));
    }
    let b0 = lo.log2().ceil() as i32;
    let b1 = hi.log2().floor() as i32;
    if b1 <= b0 {
        return Err(Error::Parameter(format!("frequency range ({lo}, {hi}) holds no dyadic band")));
    }
    Ok((b0, b1))
}

/// Growth of band maxima toward the asymptotic end: large `|xi|` for
/// `alpha > 0`, small `|xi|` otherwise.
fn growth(alpha: f64, bands: &[(f64, f64)]) -> f64 {
    let nz: Vec<&(f64, f64)> = bands.iter().filter(|b| b.1 > 1e-8).collect();
    if nz.len() < 2 {
        return 0.0;
    }
    let x: Vec<f64> = nz.iter().map(|b| b.0.log2()).collect();
    let y: Vec<f64> = nz.iter().map(|b| b.1.log2()).collect();
    let s = ols_slope(&x, &y).unwrap_or(0.0);
    if alpha > 0.0 {
        s
    } else {
        -s
    }
}

fn derivative(m: &Symbol, xi: f64, order: usize, h: f64) -> Result<Complex64> {
    finite_difference(m, 0.0, xi, 0, order, 1.0, h)
}

/// `sup |D^gamma m(xi)| |xi|^{beta - gamma(alpha-1)}` per dyadic band of
/// `|xi|` in `range`; an order passes when band maxima do not grow toward
/// the asymptotic end by more than the shared tolerance.
pub fn miyachi_check(m: &Symbol, alpha: f64, beta: f64, max_order: usize, range: (f64, f64)) -> Result<SeminormTable> {
    if max_order > 4 {
        return Err(Error::Parameter(format!("max_order {max_order} above 4")));
    }
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    let (b0, b1) = band_edges(range)?;
    let mut entries = Vec::new();
    for order in 0..=max_order {
        let mut bands = Vec::new();
        for b in b0..b1 {
            let mut bmax = 0.0f64;
            for t in 0..12 {
                let r = 2f64.powf(b as f64 + t as f64 / 12.0);
                let h = base_step(order) * local_scale(alpha, r);
                let w = r.powf(beta - order as f64 * (alpha - 1.0));
                for xi in [r, -r] {
                    let v = derivative(m, xi, order, h)?.norm() * w;
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!("non-finite derivative at xi = {xi}")));
                    }
                    bmax = bmax.max(v);
                }
            }
            bands.push((2f64.powi(b), bmax));
        }
        let constant = bands.iter().fold(0.0f64, |a, b| a.max(b.1));
        let g = growth(alpha, &bands);
        entries.push(SeminormEntry { nu: 0, sigma: order, constant, bands, slope: g, pass: g <= GROWTH_TOLERANCE });
    }
    Ok(SeminormTable { entries })
}

/// Midpoint samples per ball in [`subdyadic_check`].
pub const BALL_POINTS: usize = 32;

/// `sup_B dist(B,0)^{beta + (1-alpha) gamma} (|B|^-1 int_B |D^gamma m|^2)^{1/2}`
/// per dyadic band. Balls are the intervals `[d, d + d^{1-alpha})` (and
/// mirrors) walking each annulus from its inner edge.
pub fn subdyadic_check(
    m: &Symbol,
    alpha: f64,
    beta: f64,
    max_order: usize,
    range: (f64, f64),
    points: usize,
) -> Result<SeminormTable> {
    if max_order > 4 {
        return Err(Error::Parameter(format!("max_order {max_order} above 4")));
    }
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    let (b0, b1) = band_edges(range)?;
    let points = points.max(1);
    let mut entries = Vec::new();
    for order in 0..=max_order {
        let mut bands = Vec::new();
        for b in b0..b1 {
            let (lo, hi) = (2f64.powi(b), 2f64.powi(b + 1));
            let mut bmax = 0.0f64;
            let mut d = lo;
            while d < hi {
                let width = d.powf(1.0 - alpha).min(hi - d);
                let h = base_step(order) * local_scale(alpha, d);
                if width <= 4.0 * base_step(4) * local_scale(alpha, d) || d + width == d {
                    return Err(Error::Parameter(format!("empty ball at distance {d}")));
                }
                let mut acc = [0.0f64; 2];
                for q in 0..points {
                    let r = d + width * (q as f64 + 0.5) / points as f64;
                    for (k, xi) in [r, -r].into_iter().enumerate() {
                        acc[k] += derivative(m, xi, order, h)?.norm_sqr();
                    }
                }
                let wgt = d.powf(beta + (1.0 - alpha) * order as f64);
                for a in acc {
                    let v = (a / points as f64).sqrt() * wgt;
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!("non-finite mean at distance {d}")));
                    }
                    bmax = bmax.max(v);
                }
                d += width;
            }
            bands.push((lo, bmax));
        }
        let constant = bands.iter().fold(0.0f64, |a, b| a.max(b.1));
        let g = growth(alpha, &bands);
        entries.push(SeminormEntry { nu: 0, sigma: order, constant, bands, slope: g, pass: g <= GROWTH_TOLERANCE });
    }
    Ok(SeminormTable { entries })
}

/// `alpha = a/(a-1)`, `beta = (n a/2 - n + b)/(a-1)` in exact arithmetic.
pub fn kernel_transfer_exact(a: Q, b: Q, n: i64) -> Result<(Q, Q)> {
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    let nn = Q::from_integer(n);
    let f = |q: Q| *q.numer() as f64 / *q.denom() as f64;
    if a <= zero {
        return Err(Error::Parameter(format!("a = {} must be positive", f(a))));
    }
    if a == one {
        return Err(Error::BochnerRiesz);
    }
    if b < nn * (one - a / 2) {
        return Err(Error::Parameter(format!("b = {} below n(1 - a/2)", f(b))));
    }
    let alpha = a / (a - one);
    let beta = (nn * a / 2 - nn + b) / (a - one);
    if alpha * beta <= zero {
        return Err(Error::SignGate { alpha: f(alpha), beta: f(beta) });
    }
    Ok((alpha, beta))
}

/// Floating version of [`kernel_transfer_exact`].
pub fn oscillatory_kernel_transfer(a: f64, b: f64, n: usize) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("a = {a} must be positive")));
    }
    if a == 1.0 {
        return Err(Error::BochnerRiesz);
    }
    let n = n as f64;
    if b < n * (1.0 - a / 2.0) {
        return Err(Error::Parameter(format!("b = {b} below n(1 - a/2)")));
    }
    let alpha = a / (a - 1.0);
    let beta = (n * a / 2.0 - n + b) / (a - 1.0);
    if !(alpha * beta > 0.0) {
        return Err(Error::SignGate { alpha, beta });
    }
    Ok((alpha, beta))
}

/// Outcome of [`kernel_envelope_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    /// `max |K^inf^(xi)| |xi|^beta` over the band.
    pub constant: f64,
    /// `min` of the same quantity over the band.
    pub floor: f64,
    /// Growth of dyadic band maxima in `log2 |xi|`.
    pub slope: f64,
    pub pass: bool,
}

/// Transform of `K^inf = (1 - psi(|x|/2)) e^{i|x|^a} (1+|x|)^-b`, tapered
/// by `psi(|x|/R)`, compared with `|xi|^-beta` on `|xi|` in `band`.
/// The lattice is `[-L/2, L/2)` with `L = 4R`.
pub fn kernel_envelope_check(a: f64, b: f64, beta: f64, band: (f64, f64), radius: f64, samples: usize) -> Result<EnvelopeReport> {
    let len = 4.0 * radius;
    let lat = Lattice::new(1, len, samples)?;
    let top = a * (2.0 * radius).powf(a - 1.0);
    if top >= lat.nyquist() {
        return Err(Error::Nyquist);
    }
    let dx = lat.dx();
    let mut v: Vec<Complex64> = (0..samples)
        .map(|i| {
            let x = lat.wrap(i as f64 * dx);
            let r = x.abs();
            let amp = (1.0 - psi(r / 2.0)) * psi(r / radius) * (1.0 + r).powf(-b);
            Complex64::from_polar(amp, r.powf(a))
        })
        .collect();
    fft_nd(&mut v, 1, samples, false);
    let (b0, b1) = band_edges(band)?;
    let mut bands = Vec::new();
    let mut floor = f64::INFINITY;
    for bb in b0..b1 {
        let mut bmax = 0.0f64;
        for (k, z) in v.iter().enumerate() {
            let xi = lat.xi(k)[0].abs();
            if xi >= 2f64.powi(bb) && xi < 2f64.powi(bb + 1) {
                let q = (z * dx).norm() * xi.powf(beta);
                bmax = bmax.max(q);
                floor = floor.min(q);
            }
        }
        bands.push((2f64.powi(bb), bmax));
    }
    let constant = bands.iter().fold(0.0f64, |m, x| m.max(x.1));
    let slope = growth(1.0, &bands);
    Ok(EnvelopeReport { constant, floor, slope, pass: constant.is_finite() && slope <= GROWTH_TOLERANCE })
}

/// Exact strict conditions `|beta| > n|alpha|(1/r - 1/2)` for
/// `r <= s <= 2` and `|beta| > n|alpha|(1/r - 1/s)` for `r <= 2 <= s <= r'`,
/// with the dual-swapped pair, at `(x, y) = (1/r, 1/s')`.
pub fn multiplier_conditions_exact(x: Q, y: Q, alpha: Q, beta: Q, n: i64) -> bool {
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    let half = Q::new(1, 2);
    let w = Q::from_integer(n) * if alpha < zero { -alpha } else { alpha };
    let b = if beta < zero { -beta } else { beta };
    let side = |x: Q, y: Q| {
        // s = 1/(1-y)
        let s_small = y <= half && x + y >= one && b > w * (x - half);
        let s_large = x >= half && y >= half && y <= x && b > w * (x - (one - y));
        s_small || s_large
    };
    x >= zero && x <= one && y >= zero && y <= one && (side(x, y) || side(y, x))
}

/// Region membership under `m = -|beta|`, `1 - rho = |alpha|`.
pub fn multiplier_in_region_exact(x: Q, y: Q, alpha: Q, beta: Q, n: i64) -> bool {
    let zero = Q::from_integer(0);
    let a = if alpha < zero { -alpha } else { alpha };
    let b = if beta < zero { -beta } else { beta };
    in_region_exact(x, y, -b, Q::from_integer(n) * a)
}

/// `e^{it|xi|^alpha}` applied spectrally.
pub fn propagate(alpha: u32, t: f64, f: &GridFunction) -> Result<GridFunction> {
    if alpha == 0 || !(t >= 0.0) {
        return Err(Error::Parameter(format!("alpha = {alpha}, t = {t}")));
    }
    let lat = *f.lattice();
    let mut fh = f.dft();
    for (k, v) in fh.values_mut().iter_mut().enumerate() {
        *v *= Complex64::from_polar(1.0, t * lat.xi_norm(k).powi(alpha as i32));
    }
    Ok(fh.inverse_dft())
}

/// `(1 + t^{2/alpha} |xi|^2)^{beta/2}` applied spectrally.
pub fn sobolev_smooth(alpha: u32, t: f64, beta: f64, f: &GridFunction) -> Result<GridFunction> {
    if alpha == 0 {
        return Err(Error::ZeroAlpha);
    }
    let lat = *f.lattice();
    let c = t.powf(2.0 / alpha as f64);
    let mut fh = f.dft();
    for (k, v) in fh.values_mut().iter_mut().enumerate() {
        *v *= (1.0 + c * lat.xi_norm(k).powi(2)).powf(beta / 2.0);
    }
    Ok(fh.inverse_dft())
}

/// Image of each cube under `x -> c + 2^e (x - c)` with `c = L/2`; the
/// image must again be a standard dyadic cube inside the period.
pub fn rescale_collection(s: &SparseCollection, e: i32, lat: &Lattice) -> Result<SparseCollection> {
    let c = lat.length() / 2.0;
    let f = 2f64.powi(e);
    let mut out = Vec::new();
    for q in s.cubes() {
        if q.shift() != GridShift::zero(1) {
            return Err(Error::MixedShift);
        }
        let lo = c + f * (q.lower(0) - c);
        let k = q.scale() + e;
        let side = 2f64.powi(k);
        let m = (lo / side).round();
        if (m * side - lo).abs() > 1e-12 * side || lo < 0.0 || lo + side > lat.length() * (1.0 + 1e-15) {
            return Err(Error::ScaleUnderflow);
        }
        out.push(DyadicCube::standard(k, &[m as i64]));
    }
    Ok(SparseCollection::unwitnessed(CubeFamily::new(GridShift::zero(1), out)?, s.eta()))
}

/// Output of [`propagator`].
#[derive(Clone, Debug)]
pub struct PropagatorReport {
    pub u: GridFunction,
    /// `| ||u||_2 - ||f||_2 | / ||f||_2`.
    pub mass_error: f64,
    pub pairing: f64,
    pub form: f64,
    pub ratio: f64,
    pub collection: SparseCollection,
}

/// Base cube exponent `round(log2 t^{1/alpha})`.
pub fn time_scale(alpha: u32, t: f64) -> i32 {
    (t.log2() / alpha as f64).round() as i32
}

/// `u = e^{it|xi|^alpha} f` and the ratio of `|<u, g>|` to the sparse
/// form of `((1 - t^{2/alpha} Delta)^{beta/2} f, g)` over cubes at the
/// time scale `t^{1/alpha}`. Without `base`, the family is the
/// checkerboard selection over tilings of sides `2^{k+2}` down to
/// `2^{k-2}`, `k = round(log2 t^{1/alpha})`, each within 16 `2^k` of the
/// center.
pub fn propagator(
    alpha: u32,
    t: f64,
    beta: f64,
    f: &GridFunction,
    g: &GridFunction,
    pt: &ExponentPair,
    base: Option<&SparseCollection>,
) -> Result<PropagatorReport> {
    let lat = *f.lattice();
    let u = propagate(alpha, t, f)?;
    let n0 = f.lp_norm(2.0)?;
    let mass_error = if n0 == 0.0 { 0.0 } else { (u.lp_norm(2.0)? - n0).abs() / n0 };
    let jf = sobolev_smooth(alpha, t, beta, f)?;
    let collection = match base {
        Some(s) => s.clone(),
        None => {
            let k = time_scale(alpha, t);
            let c = lat.length() / 2.0;
            let half = 16.0 * 2f64.powi(k);
            if c - half < 0.0 || 2f64.powi(k - 2) < 2.0 * lat.dx() {
                return Err(Error::ScaleUnderflow);
            }
            let root = lat.length().log2().round() as i32;
            let mut levels = Vec::new();
            for j in 0..5 {
                let kk = k + 2 - j;
                let fam = tiling(&lat, kk)?;
                let kept: Vec<DyadicCube> = fam
                    .cubes()
                    .iter()
                    .copied()
                    .filter(|q| q.lower(0) >= c - half && q.upper(0) <= c + half)
                    .collect();
                levels.push(Level { j, family: CubeFamily::new(GridShift::zero(1), kept)?, weight: 2f64.powi(-j) });
            }
            sparse_from_decaying(&levels, &jf, g, pt.r, pt.s_prime, root)?.collection
        }
    };
    let pairing = u.inner(g).norm();
    let form = sparse_form(&collection, &jf, g, pt.r, pt.s_prime)?.value;
    let ratio = if pairing == 0.0 { 0.0 } else { pairing / form };
    Ok(PropagatorReport { u, mass_error, pairing, form, ratio, collection })
}

/// `(2,2)` norms of the low-frequency pieces `j in [j_min, -1]` of the
/// multiplier (band `psi_tilde(2^-j |xi|)`), with the fitted slope in `j`.
pub fn low_frequency_decay(alpha: f64, beta: f64, lat: &Lattice, j_min: i32) -> Result<(Vec<(i32, f64)>, DecayFit)> {
    if !(alpha < 0.0) {
        return Err(Error::Parameter("low-frequency pieces need alpha < 0".into()));
    }
    let m = model_multiplier(alpha, beta)?;
    let mut out = Vec::new();
    for j in j_min..0 {
        if 2f64.powi(j - 1) < lat.dxi() {
            return Err(Error::ScaleUnderflow);
        }
        let n = (0..lat.size())
            .map(|k| (m.eval_xi(lat.xi(k)[0]) * band_cutoff_signed(j, lat.xi_norm(k))).norm())
            .fold(0.0, f64::max);
        out.push((j, n));
    }
    let fit = decay_fit(&out)?;
    Ok((out, fit))
}

/// `psi_tilde(2^-j r)` for any integer `j`.
fn band_cutoff_signed(j: i32, r: f64) -> f64 {
    if j > 0 {
        band_cutoff(j, r)
    } else {
        crate::pdo::psi_tilde(r * 2f64.powi(-j))
    }
}
