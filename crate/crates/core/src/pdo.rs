//! Discretized pseudodifferential operators and their Littlewood-Paley and
//! spatial pieces, in one dimension.
//!
//! With the transform of [`crate::func`],
//!
//! ```text
//! T_a f(x_i) = L^-1 sum_k exp(i x_i xi_k) a(x_i, xi_k) fhat(k),
//! ```
//!
//! the lattice version of `(2 pi)^-1 int e^{i x xi} a(x, xi) fhat(xi) dxi`,
//! so `a = 1` is the identity. Matrices act on sample vectors and their
//! entries include the quadrature weight `dx`:
//! `(T f)_i = sum_y A[i, y] f_y`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::func::{check_exponent, fft_nd, gauss, GridFunction, Lattice};
use crate::symbol::{bump_tail, ols_slope, Symbol};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `psi(r)`: 1 on `r <= 1`, 0 on `r >= 2`.
pub fn psi(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let a = bump_tail(2.0 - r);
    let b = bump_tail(r - 1.0);
    a / (a + b)
}

/// `psi(r) - psi(2 r)`, supported in `1/2 <= |r| <= 2`.
pub fn psi_tilde(r: f64) -> f64 {
    psi(r) - psi(2.0 * r)
}

/// Cutoff of band `j`: `psi` for `j = 0`, `psi_tilde(2^-j r)` above.
pub fn band_cutoff(j: i32, r: f64) -> f64 {
    if j == 0 {
        psi(r)
    } else {
        psi_tilde(r * 2f64.powi(-j))
    }
}

/// Max deviation of `psi + sum_{0<j<=J} psi_tilde(2^-j .)` from 1 over the
/// lattice frequencies with `|xi| <= 2^(J-1)`.
pub fn partition_deviation(lat: &Lattice, big_j: i32) -> f64 {
    let lim = 2f64.powi(big_j - 1);
    (0..lat.size())
        .map(|i| lat.xi_norm(i))
        .filter(|&r| r <= lim)
        .map(|r| {
            let s: f64 = (0..=big_j).map(|j| band_cutoff(j, r)).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Scale-split parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompParams {
    pub epsilon: f64,
    pub j_max: i32,
    /// Inclusive `l` interval; `None` means every representable scale.
    pub l_range: Option<(i32, i32)>,
}

impl Default for DecompParams {
    fn default() -> Self {
        Self { epsilon: 0.1, j_max: 9, l_range: None }
    }
}

impl DecompParams {
    /// Largest `l` of the near piece, `floor(j epsilon)`.
    pub fn near_cut(&self, j: i32) -> i32 {
        (j as f64 * self.epsilon).floor() as i32
    }
}

/// Which operator a matrix represents.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Full,
    Frequency { j: i32 },
    Spatial { j: i32, l: i32 },
    Near { j: i32 },
    Tail { j: i32 },
    Adjoint(Box<Piece>),
    Other(String),
}

#[derive(Clone, Debug)]
enum Storage {
    /// `A[i, y] = c[(i - y) mod N]`.
    Circulant(Vec<Complex64>),
    Dense(DMatrix<Complex64>),
}

/// Operator on sample vectors of a 1-D lattice.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    lattice: Lattice,
    storage: Storage,
    piece: Piece,
}

/// Largest dense size.
pub const DENSE_CAP: usize = 1 << 12;
/// Largest dense size for which the (2,2) norm is an SVD.
pub const SVD_CAP: usize = 512;

fn require_1d(lat: &Lattice) -> Result<()> {
    if lat.dim() == 1 {
        Ok(())
    } else {
        Err(Error::Dimension(lat.dim()))
    }
}

/// Unnormalized inverse FFT of `m`, divided by `N`.
fn circulant_from_multiplier(mut m: Vec<Complex64>) -> Vec<Complex64> {
    let n = m.len();
    fft_nd(&mut m, 1, n, true);
    let c = 1.0 / n as f64;
    m.iter_mut().for_each(|z| *z *= c);
    m
}

impl OperatorMatrix {
    /// Matrix of `T_{a b}` where `band(|xi|)` multiplies the symbol.
    pub fn from_symbol(a: &Symbol, lat: &Lattice, band: impl Fn(f64) -> f64 + Sync, piece: Piece) -> Result<Self> {
        require_1d(lat)?;
        let n = lat.samples();
        let xis: Vec<f64> = (0..n).map(|k| lat.xi(k)[0]).collect();
        let bands: Vec<f64> = xis.iter().map(|x| band(x.abs())).collect();
        if a.is_x_independent() {
            let m: Vec<Complex64> = xis
                .iter()
                .zip(&bands)
                .map(|(&xi, &b)| if b == 0.0 { ZERO } else { a.eval(&[0.0], &[xi]) * b })
                .collect();
            return Ok(Self { lattice: *lat, storage: Storage::Circulant(circulant_from_multiplier(m)), piece });
        }
        if n > DENSE_CAP {
            return Err(Error::Lattice(format!("dense operator with N = {n} above {DENSE_CAP}")));
        }
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 * lat.dx();
                let m: Vec<Complex64> = xis
                    .iter()
                    .zip(&bands)
                    .map(|(&xi, &b)| if b == 0.0 { ZERO } else { a.eval(&[x], &[xi]) * b })
                    .collect();
                let s = circulant_from_multiplier(m);
                (0..n).map(|y| s[(i + n - y) % n]).collect()
            })
            .collect();
        let mat = DMatrix::from_fn(n, n, |i, y| rows[i][y]);
        Ok(Self { lattice: *lat, storage: Storage::Dense(mat), piece })
    }

    pub fn from_dense(lat: &Lattice, mat: DMatrix<Complex64>, piece: Piece) -> Result<Self> {
        require_1d(lat)?;
        if mat.nrows() != lat.samples() || mat.ncols() != lat.samples() {
            return Err(Error::Lattice("matrix shape does not match lattice".into()));
        }
        Ok(Self { lattice: *lat, storage: Storage::Dense(mat), piece })
    }

    /// Convolution operator with kernel `c` (entries include `dx`).
    pub fn from_circulant(lat: &Lattice, c: Vec<Complex64>, piece: Piece) -> Result<Self> {
        require_1d(lat)?;
        if c.len() != lat.samples() {
            return Err(Error::Lattice("kernel length does not match lattice".into()));
        }
        Ok(Self { lattice: *lat, storage: Storage::Circulant(c), piece })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn piece(&self) -> &Piece {
        &self.piece
    }
    pub fn is_circulant(&self) -> bool {
        matches!(self.storage, Storage::Circulant(_))
    }
    pub fn size(&self) -> usize {
        self.lattice.samples()
    }

    /// Circulant kernel `c[d]`, if stored that way.
    pub fn kernel(&self) -> Option<&[Complex64]> {
        match &self.storage {
            Storage::Circulant(c) => Some(c),
            Storage::Dense(_) => None,
        }
    }

    pub fn entry(&self, i: usize, y: usize) -> Complex64 {
        match &self.storage {
            Storage::Circulant(c) => {
                let n = c.len();
                c[(i + n - y) % n]
            }
            Storage::Dense(m) => m[(i, y)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Circulant(_) => DMatrix::from_fn(self.size(), self.size(), |i, y| self.entry(i, y)),
        }
    }

    pub fn with_piece(mut self, piece: Piece) -> Self {
        self.piece = piece;
        self
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        let storage = match &self.storage {
            Storage::Circulant(c) => {
                let n = c.len();
                Storage::Circulant((0..n).map(|d| c[(n - d) % n].conj()).collect())
            }
            Storage::Dense(m) => Storage::Dense(m.adjoint()),
        };
        OperatorMatrix { lattice: self.lattice, storage, piece: Piece::Adjoint(Box::new(self.piece.clone())) }
    }

    /// Multiply entry `(i, y)` by `w[(i - y) mod N]`.
    pub fn windowed(&self, w: &[f64], piece: Piece) -> OperatorMatrix {
        let n = self.size();
        let storage = match &self.storage {
            Storage::Circulant(c) => Storage::Circulant(c.iter().zip(w).map(|(z, &t)| z * t).collect()),
            Storage::Dense(m) => Storage::Dense(DMatrix::from_fn(n, n, |i, y| m[(i, y)] * w[(i + n - y) % n])),
        };
        OperatorMatrix { lattice: self.lattice, storage, piece }
    }

    /// `self - other`.
    pub fn sub(&self, other: &OperatorMatrix, piece: Piece) -> OperatorMatrix {
        let storage = match (&self.storage, &other.storage) {
            (Storage::Circulant(a), Storage::Circulant(b)) => {
                Storage::Circulant(a.iter().zip(b).map(|(x, y)| x - y).collect())
            }
            _ => Storage::Dense(self.to_dense() - other.to_dense()),
        };
        OperatorMatrix { lattice: self.lattice, storage, piece }
    }

    pub fn apply_values(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        match &self.storage {
            Storage::Circulant(c) => {
                let mut fh = f.to_vec();
                let mut ch = c.clone();
                fft_nd(&mut fh, 1, n, false);
                fft_nd(&mut ch, 1, n, false);
                fh.iter_mut().zip(&ch).for_each(|(a, b)| *a *= b);
                fft_nd(&mut fh, 1, n, true);
                let s = 1.0 / n as f64;
                fh.iter_mut().for_each(|z| *z *= s);
                fh
            }
            Storage::Dense(m) => {
                let v = nalgebra::DVector::from_column_slice(f);
                (m * v).iter().copied().collect()
            }
        }
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        GridFunction::new(self.lattice, self.apply_values(f.values())).unwrap_or_else(|_| {
            GridFunction::new(self.lattice, vec![Complex64::new(f64::NAN, 0.0); self.size()])
                .unwrap_or_else(|_| GridFunction::zeros(self.lattice))
        })
    }

    fn apply_adjoint_values(&self, f: &[Complex64]) -> Vec<Complex64> {
        match &self.storage {
            Storage::Circulant(_) => self.adjoint().apply_values(f),
            Storage::Dense(m) => {
                let v = nalgebra::DVector::from_column_slice(f);
                (m.adjoint() * v).iter().copied().collect()
            }
        }
    }

    /// Row `i` as a vector over `y`.
    pub fn row(&self, i: usize) -> Vec<Complex64> {
        (0..self.size()).map(|y| self.entry(i, y)).collect()
    }

    /// Column `y` as a vector over `i`.
    pub fn column(&self, y: usize) -> Vec<Complex64> {
        (0..self.size()).map(|i| self.entry(i, y)).collect()
    }

    /// Exact `L^1 -> L^inf` norm: `max |A[i,y]| / dx`.
    pub fn norm_1_inf(&self) -> f64 {
        let m = match &self.storage {
            Storage::Circulant(c) => c.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Storage::Dense(m) => m.iter().map(|z| z.norm()).fold(0.0, f64::max),
        };
        m / self.lattice.dx()
    }

    /// Exact `L^1 -> L^1` norm: max column sum.
    pub fn norm_1_1(&self) -> f64 {
        match &self.storage {
            Storage::Circulant(c) => c.iter().map(|z| z.norm()).sum(),
            Storage::Dense(m) => m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max),
        }
    }

    /// Exact `L^inf -> L^inf` norm: max row sum.
    pub fn norm_inf_inf(&self) -> f64 {
        match &self.storage {
            Storage::Circulant(c) => c.iter().map(|z| z.norm()).sum(),
            Storage::Dense(m) => m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max),
        }
    }

    /// `L^2 -> L^2` norm. Exact (spectrum or SVD) for circulant matrices
    /// and dense sizes up to [`SVD_CAP`]; Lanczos on `A^H A` above,
    /// which converges from below.
    pub fn norm_2_2(&self) -> NormEstimate {
        match &self.storage {
            Storage::Circulant(c) => {
                let mut h = c.clone();
                let n = h.len();
                fft_nd(&mut h, 1, n, false);
                NormEstimate::exact(h.iter().map(|z| z.norm()).fold(0.0, f64::max))
            }
            Storage::Dense(m) if m.nrows() <= SVD_CAP => {
                let sv = m.clone().singular_values();
                NormEstimate::exact(sv.iter().copied().fold(0.0, f64::max))
            }
            Storage::Dense(_) => {
                let v = self.lanczos_2_2(200, 1e-15);
                NormEstimate { estimate: v, lower: v, kind: BoundKind::Lower }
            }
        }
    }

    /// Largest Ritz value of `A^H A` from Lanczos with full
    /// reorthogonalization; never exceeds the true norm.
    fn lanczos_2_2(&self, max_iter: usize, tol: f64) -> f64 {
        let n = self.size();
        let mut rng = ChaCha8Rng::seed_from_u64(0x2222);
        let mut q: Vec<Complex64> = (0..n).map(|_| Complex64::new(gauss(&mut rng), gauss(&mut rng))).collect();
        let nq = l2(&q);
        q.iter_mut().for_each(|z| *z /= nq);
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        let (mut alphas, mut betas) = (Vec::new(), Vec::new());
        let mut last = 0.0f64;
        for k in 0..max_iter.min(n) {
            let mut w = self.apply_adjoint_values(&self.apply_values(&q));
            let a: f64 = q.iter().zip(&w).map(|(u, v)| (u.conj() * v).re).sum();
            basis.push(q.clone());
            alphas.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c: Complex64 = b.iter().zip(&w).map(|(u, v)| u.conj() * v).sum();
                    w.iter_mut().zip(b).for_each(|(x, u)| *x -= c * u);
                }
            }
            let t = DMatrix::from_fn(k + 1, k + 1, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    0.0
                }
            });
            let top = t.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
            let beta = l2(&w);
            if (top - last).abs() <= tol * top || beta <= tol * top.max(f64::MIN_POSITIVE) {
                return top.max(0.0).sqrt();
            }
            last = top;
            betas.push(beta);
            q = w.into_iter().map(|z| z / beta).collect();
        }
        last.max(0.0).sqrt()
    }

    /// Cheap upper bound `sqrt(||A||_{1,1} ||A||_{inf,inf})` for `(2,2)`.
    pub fn schur_bound(&self) -> f64 {
        (self.norm_1_1() * self.norm_inf_inf()).sqrt()
    }

    /// Exact endpoint norms; the `(2,2)` entry is replaced by the Schur
    /// bound for dense matrices above [`SVD_CAP`] so that all four are
    /// upper bounds.
    pub fn endpoint_norms(&self) -> EndpointNorms {
        let n22 = match (&self.storage, self.size() > SVD_CAP) {
            (Storage::Dense(_), true) => self.schur_bound(),
            _ => self.norm_2_2().estimate,
        };
        EndpointNorms { n11: self.norm_1_1(), n22, n1inf: self.norm_1_inf(), ninfinf: self.norm_inf_inf() }
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// How a norm value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Exact,
    Lower,
    Estimate,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Exact => "exact",
            BoundKind::Lower => "lower",
            BoundKind::Estimate => "estimate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub estimate: f64,
    /// Value attained by an explicit test vector.
    pub lower: f64,
    pub kind: BoundKind,
}

impl NormEstimate {
    fn exact(v: f64) -> Self {
        Self { estimate: v, lower: v, kind: BoundKind::Exact }
    }
}

/// Exact norms at `(1,1)`, `(2,2)`, `(1,inf)`, `(inf,inf)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndpointNorms {
    pub n11: f64,
    pub n22: f64,
    pub n1inf: f64,
    pub ninfinf: f64,
}

/// Riesz-Thorin bound at `(1/r, 1/s)` from the endpoint norms: the
/// smallest geometric interpolant over triangles of endpoints containing
/// the point. `None` when the point is outside their hull (`s < r`).
pub fn interpolation_bound(e: &EndpointNorms, r: f64, s: f64) -> Option<f64> {
    let p = (1.0 / r, 1.0 / s);
    let pts: [((f64, f64), f64); 4] = [((1.0, 1.0), e.n11), ((0.5, 0.5), e.n22), ((1.0, 0.0), e.n1inf), ((0.0, 0.0), e.ninfinf)];
    let mut best: Option<f64> = None;
    for a in 0..4 {
        for b in a + 1..4 {
            for c in b + 1..4 {
                let (pa, pb, pc) = (pts[a].0, pts[b].0, pts[c].0);
                let det = (pb.0 - pa.0) * (pc.1 - pa.1) - (pc.0 - pa.0) * (pb.1 - pa.1);
                if det.abs() < 1e-14 {
                    continue;
                }
                let l1 = ((pb.0 - p.0) * (pc.1 - p.1) - (pc.0 - p.0) * (pb.1 - p.1)) / det;
                let l2 = ((pc.0 - p.0) * (pa.1 - p.1) - (pa.0 - p.0) * (pc.1 - p.1)) / det;
                let l3 = 1.0 - l1 - l2;
                if l1 < -1e-12 || l2 < -1e-12 || l3 < -1e-12 {
                    continue;
                }
                let w = [l1.max(0.0), l2.max(0.0), l3.max(0.0)];
                let v = [pts[a].1, pts[b].1, pts[c].1];
                let bound: f64 = w.iter().zip(&v).map(|(t, n)| if *t == 0.0 { 1.0 } else { n.powf(*t) }).product();
                best = Some(best.map_or(bound, |x: f64| x.min(bound)));
            }
        }
    }
    best
}

/// `L^r -> L^s` norm of `a`. Exact for `(2,2)`, `(1,1)`, `(1,inf)`,
/// `(inf,inf)`, for `r = 1` (extreme points are spikes) and for
/// `s = inf` (row norms); otherwise the best value of a nonlinear power
/// iteration over at least 8 starts, which is a certified lower bound.
pub fn opnorm(a: &OperatorMatrix, r: f64, s: f64) -> Result<NormEstimate> {
    opnorm_seeded(a, r, s, 0x5eed)
}

pub fn opnorm_seeded(a: &OperatorMatrix, r: f64, s: f64, seed: u64) -> Result<NormEstimate> {
    check_exponent(r)?;
    check_exponent(s)?;
    let dx = a.lattice().dx();
    let n = a.size();
    if r == 2.0 && s == 2.0 {
        return Ok(a.norm_2_2());
    }
    if r == 1.0 && s.is_infinite() {
        return Ok(NormEstimate::exact(a.norm_1_inf()));
    }
    if r == 1.0 && s == 1.0 {
        return Ok(NormEstimate::exact(a.norm_1_1()));
    }
    if r.is_infinite() && s.is_infinite() {
        return Ok(NormEstimate::exact(a.norm_inf_inf()));
    }
    // weighted norm = dx^{1/s - 1/r} * sequence norm
    let wfac = dx.powf(1.0 / s - 1.0 / r);
    if r == 1.0 {
        let v = (0..n).map(|y| lp_seq(&a.column(y), s)).fold(0.0, f64::max);
        return Ok(NormEstimate::exact(v * wfac));
    }
    if s.is_infinite() {
        let rp = dual(r);
        let v = (0..n).map(|i| lp_seq(&a.row(i), rp)).fold(0.0, f64::max);
        return Ok(NormEstimate::exact(v * wfac));
    }
    let v = boyd(a, r, s, seed, 10);
    Ok(NormEstimate { estimate: v * wfac, lower: v * wfac, kind: BoundKind::Lower })
}

/// Conjugate exponent.
pub fn dual(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Unweighted sequence `l^p` norm.
pub fn lp_seq(v: &[Complex64], p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    m * v.iter().map(|z| (z.norm() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `|v|^{p-1} sgn(v)`, the unnormalized `l^p` dual direction.
fn dual_direction(v: &[Complex64], p: f64) -> Vec<Complex64> {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return vec![ZERO; v.len()];
    }
    v.iter()
        .map(|z| {
            let a = z.norm();
            if a == 0.0 {
                ZERO
            } else if p == 1.0 {
                z / a
            } else {
                z / a * (a / m).powf(p - 1.0)
            }
        })
        .collect()
}

/// Boyd's nonlinear power method for the sequence `l^r -> l^s` norm.
fn boyd(a: &OperatorMatrix, r: f64, s: f64, seed: u64, restarts: usize) -> f64 {
    let n = a.size();
    let rp = dual(r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0); n]];
    // best spike
    let best_col = (0..n)
        .map(|y| (y, lp_seq(&a.column(y), s)))
        .fold((0, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc })
        .0;
    let mut spike = vec![ZERO; n];
    spike[best_col] = Complex64::new(1.0, 0.0);
    starts.push(spike);
    for _ in 0..restarts.max(8) {
        starts.push((0..n).map(|_| Complex64::new(gauss(&mut rng), gauss(&mut rng))).collect());
    }
    starts
        .into_par_iter()
        .map(|mut x| {
            let mut best = 0.0f64;
            let mut last = -1.0;
            for _ in 0..300 {
                let nx = lp_seq(&x, r);
                if nx == 0.0 {
                    break;
                }
                x.iter_mut().for_each(|z| *z /= nx);
                let y = a.apply_values(&x);
                let val = lp_seq(&y, s);
                best = best.max(val);
                if (val - last).abs() <= 1e-12 * val {
                    break;
                }
                last = val;
                let z = a.apply_adjoint_values(&dual_direction(&y, s));
                x = dual_direction(&z, rp);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

fn check_band(lat: &Lattice, j: i32) -> Result<()> {
    if j < 0 {
        return Err(Error::Parameter(format!("band index j = {j} must be >= 0")));
    }
    if 2f64.powi(j + 1) >= lat.nyquist() {
        return Err(Error::Nyquist);
    }
    Ok(())
}

/// `T_a` itself.
pub fn full_operator(a: &Symbol, lat: &Lattice) -> Result<OperatorMatrix> {
    OperatorMatrix::from_symbol(a, lat, |_| 1.0, Piece::Full)
}

/// `T_a^j`: the symbol cut to band `j`.
pub fn frequency_piece(a: &Symbol, lat: &Lattice, j: i32) -> Result<OperatorMatrix> {
    check_band(lat, j)?;
    OperatorMatrix::from_symbol(a, lat, move |r| band_cutoff(j, r), Piece::Frequency { j })
}

/// Spatial scale exponent `l - j rho` of piece `(j, l)`.
fn scale_exp(j: i32, l: i32, rho: f64) -> f64 {
    l as f64 - j as f64 * rho
}

/// Representable `l` range for band `j`: windows at scale `2^{l - j rho}`
/// need at least two cells and support within half the period.
pub fn representable_l(lat: &Lattice, j: i32, rho: f64) -> (i32, i32) {
    let jr = j as f64 * rho;
    let lo = (jr + (2.0 * lat.dx()).log2()).ceil() as i32;
    let hi = (jr + (lat.length() / 4.0).log2()).floor() as i32;
    (lo, hi)
}

/// Window of spatial piece `l` at each lattice offset `d`. The lowest
/// representable `l` carries the core bump.
pub fn spatial_window(lat: &Lattice, j: i32, l: i32, rho: f64) -> Result<Vec<f64>> {
    let (lo, hi) = representable_l(lat, j, rho);
    if l < lo || l > hi {
        return Err(Error::Unrepresentable(scale_exp(j, l, rho)));
    }
    let inv = 2f64.powf(-scale_exp(j, l, rho));
    let core = l == lo;
    Ok((0..lat.samples())
        .map(|d| {
            let z = lat.wrap(d as f64 * lat.dx()).abs() * inv;
            if core {
                psi(z)
            } else {
                psi_tilde(z)
            }
        })
        .collect())
}

/// `T_a^{j,l}`.
pub fn spatial_piece(a: &Symbol, lat: &Lattice, j: i32, l: i32) -> Result<OperatorMatrix> {
    let tj = frequency_piece(a, lat, j)?;
    spatial_piece_of(&tj, a.params().rho, j, l)
}

/// Window an already assembled `T_a^j`.
pub fn spatial_piece_of(tj: &OperatorMatrix, rho: f64, j: i32, l: i32) -> Result<OperatorMatrix> {
    let w = spatial_window(tj.lattice(), j, l, rho)?;
    Ok(tj.windowed(&w, Piece::Spatial { j, l }))
}

/// Window of `sum_{l <= lcut} T_a^{j,l}`: `psi(2^{j rho - lcut} z)`.
pub fn near_window(lat: &Lattice, j: i32, lcut: i32, rho: f64) -> Vec<f64> {
    let inv = 2f64.powf(-scale_exp(j, lcut, rho));
    (0..lat.samples()).map(|d| psi(lat.wrap(d as f64 * lat.dx()).abs() * inv)).collect()
}

/// `sum_{l <= floor(j eps)} T^{j,l}` of an assembled `T^j`.
pub fn near_piece_of(tj: &OperatorMatrix, rho: f64, j: i32, params: &DecompParams) -> OperatorMatrix {
    let w = near_window(tj.lattice(), j, params.near_cut(j), rho);
    tj.windowed(&w, Piece::Near { j })
}

pub fn near_piece(a: &Symbol, lat: &Lattice, j: i32, params: &DecompParams) -> Result<OperatorMatrix> {
    let tj = frequency_piece(a, lat, j)?;
    Ok(near_piece_of(&tj, a.params().rho, j, params))
}

/// Tail pieces `T^{j,l}` for `floor(j eps) < l <= l_max`, each as
/// `(l, matrix)`; the last one also carries everything beyond `l_max`.
pub fn tail_pieces_of(tj: &OperatorMatrix, rho: f64, j: i32, params: &DecompParams) -> Vec<(i32, OperatorMatrix)> {
    let lat = *tj.lattice();
    let cut = params.near_cut(j);
    let (_, hi) = representable_l(&lat, j, rho);
    let mut out = Vec::new();
    let mut prev = near_window(&lat, j, cut, rho);
    for l in cut + 1..=hi {
        let cur = if l == hi { vec![1.0; lat.samples()] } else { near_window(&lat, j, l, rho) };
        let w: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
        out.push((l, tj.windowed(&w, Piece::Spatial { j, l })));
        prev = cur;
    }
    out
}

/// `sup_x sum_z |K_j(x, z)| dz`, the largest row sum of `T_a^j`.
pub fn kernel_l1(a: &Symbol, lat: &Lattice, j: i32) -> Result<f64> {
    Ok(frequency_piece(a, lat, j)?.norm_inf_inf())
}

/// Sum of spatial pieces over `l_range` and the `(2,2)` norm of what is
/// left of `T^j`.
pub fn spatial_sum(tj: &OperatorMatrix, rho: f64, j: i32, l_range: (i32, i32)) -> Result<(OperatorMatrix, f64)> {
    let lat = *tj.lattice();
    let mut w = vec![0.0; lat.samples()];
    for l in l_range.0..=l_range.1 {
        let wl = spatial_window(&lat, j, l, rho)?;
        w.iter_mut().zip(&wl).for_each(|(a, b)| *a += b);
    }
    let sum = tj.windowed(&w, Piece::Other(format!("sum_l T^{j},l")));
    let rest = tj.sub(&sum, Piece::Other("remainder".into()));
    Ok((sum, rest.norm_2_2().estimate))
}

/// Window overlap constant: `||T^{j,l}||_{2,2} <= C_w ||T^j||_{2,2}` for
/// circulant pieces with `C_w = N^-1 sum_k |FFT(w)_k|`.
pub fn window_constant(w: &[f64]) -> f64 {
    let n = w.len();
    let mut h: Vec<Complex64> = w.iter().map(|&t| Complex64::new(t, 0.0)).collect();
    fft_nd(&mut h, 1, n, false);
    h.iter().map(|z| z.norm()).sum::<f64>() / n as f64
}

/// Apply `T_a` without forming a matrix. One or two dimensions for
/// x-independent symbols, one dimension otherwise.
pub fn apply_t(a: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    let lat = *f.lattice();
    let fh = f.dft();
    if a.is_x_independent() {
        let d = lat.dim();
        let m: Vec<Complex64> = fh
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| v * a.eval(&vec![0.0; d], &lat.xi(k)[..d]))
            .collect();
        return Ok(GridFunction::new(lat, m)?.inverse_dft());
    }
    require_1d(&lat)?;
    let n = lat.samples();
    let xis: Vec<f64> = (0..n).map(|k| lat.xi(k)[0]).collect();
    let inv_l = 1.0 / lat.length();
    let out: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * lat.dx();
            let s: Complex64 = (0..n)
                .map(|k| Complex64::from_polar(1.0, x * xis[k]) * a.eval(&[x], &[xis[k]]) * fh.values()[k])
                .sum();
            s * inv_l
        })
        .collect();
    GridFunction::new(lat, out)
}

/// Least-squares fit of `log2 norm` against `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log2` units.
    pub residual: f64,
}

pub fn decay_fit(points: &[(i32, f64)]) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} points, need 4", points.len())));
    }
    if points.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::DegenerateFit("non-positive norm".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let slope = ols_slope(&x, &y).ok_or_else(|| Error::DegenerateFit("repeated j".into()))?;
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    Ok(DecayFit { slope, intercept, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::random_function;
    use crate::symbol::{constant, model_bessel, model_oscillatory, model_x_dependent, ClassParams, SymbolForm};

    fn lat(l: f64, n: usize) -> Lattice {
        Lattice::new(1, l, n).unwrap()
    }

    fn one() -> Symbol {
        constant(1.0, ClassParams { m: 0.0, rho: 1.0, delta: 0.0 })
    }

    #[test]
    fn partition_of_unity() {
        let l = lat(8.0, 4096);
        for big_j in 1..=10 {
            assert!(partition_deviation(&l, big_j) < 1e-10);
        }
    }

    #[test]
    fn identity_symbol() {
        let l = lat(4.0, 256);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_function(l, &mut rng);
        let g = apply_t(&one(), &f).unwrap();
        let err: f64 = g.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        let m = full_operator(&one(), &l).unwrap();
        let g2 = m.apply(&f);
        let err: f64 = g2.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn modulation_translates() {
        let l = lat(4.0, 128);
        let h = 5.0 * l.dx();
        let a = Symbol::new(ClassParams { m: 0.0, rho: 1.0, delta: 0.0 }, "shift", SymbolForm::Constant(1.0), move |_, xi| {
            Complex64::from_polar(1.0, xi[0] * h)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_function(l, &mut rng);
        let g = apply_t(&a, &f).unwrap();
        for i in 0..128 {
            assert!((g.values()[i] - f.values()[(i + 5) % 128]).norm() < 1e-10);
        }
    }

    #[test]
    fn dense_and_circulant_agree() {
        let l = lat(8.0, 128);
        let a = model_oscillatory(-0.5, 0.5);
        // same symbol tagged as x-dependent forces dense assembly
        let b = Symbol::new(a.params(), "dense", SymbolForm::Custom, {
            let a = a.clone();
            move |x, xi| a.eval(x, xi)
        });
        let p = frequency_piece(&a, &l, 3).unwrap();
        let q = frequency_piece(&b, &l, 3).unwrap();
        assert!(p.is_circulant() && !q.is_circulant());
        let err = (p.to_dense() - q.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!((p.norm_2_2().estimate - q.norm_2_2().estimate).abs() < 1e-10);
    }

    #[test]
    fn x_dependent_matrix_matches_direct_application() {
        let l = lat(8.0, 64);
        let a = model_x_dependent(-0.5, 0.5, 8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_function(l, &mut rng);
        let direct = apply_t(&a, &f).unwrap();
        let via = full_operator(&a, &l).unwrap().apply(&f);
        let err: f64 = direct.values().iter().zip(via.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10 * direct.lp_norm(f64::INFINITY).unwrap());
    }

    #[test]
    fn frequency_piece_support() {
        let l = lat(8.0, 1024);
        let j0 = 4;
        let xi0 = 1.5 * 2f64.powi(j0);
        // nearest lattice mode
        let k = (xi0 / l.dxi()).round();
        let f = GridFunction::from_fn(l, |x| Complex64::from_polar(1.0, k * l.dxi() * x[0]));
        for j in 0..8 {
            let out = frequency_piece(&one(), &l, j).unwrap().apply(&f);
            let size = out.lp_norm(2.0).unwrap();
            if j == j0 || j == j0 + 1 {
                assert!(size > 1e-3);
            } else {
                assert!(size < 1e-12, "j = {j}: {size}");
            }
        }
    }

    #[test]
    fn reconstruction_from_pieces() {
        let l = lat(8.0, 1024);
        let a = model_oscillatory(-0.5, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let big_j = 7;
        let f = crate::func::random_bandlimited(l, 2f64.powi(big_j - 1), &mut rng);
        let mut acc = GridFunction::zeros(l);
        for j in 0..=big_j {
            let part = frequency_piece(&a, &l, j).unwrap().apply(&f);
            acc.values_mut().iter_mut().zip(part.values()).for_each(|(x, y)| *x += y);
        }
        let want = apply_t(&a, &f).unwrap();
        let diff = GridFunction::new(l, acc.values().iter().zip(want.values()).map(|(x, y)| x - y).collect()).unwrap();
        assert!(diff.lp_norm(2.0).unwrap() <= 1e-8 * f.lp_norm(2.0).unwrap());
    }

    #[test]
    fn frequency_norm_is_symbol_max() {
        let l = lat(8.0, 1024);
        let a = model_oscillatory(-0.5, 0.0);
        for j in 1..6 {
            let p = frequency_piece(&a, &l, j).unwrap();
            let want = (0..1024)
                .map(|k| (a.eval_xi(l.xi(k)[0]) * band_cutoff(j, l.xi_norm(k))).norm())
                .fold(0.0, f64::max);
            assert!((p.norm_2_2().estimate - want).abs() < 1e-10 * want);
        }
    }

    #[test]
    fn spatial_pieces_sum_to_frequency_piece() {
        let l = lat(32.0, 4096);
        let a = model_oscillatory(-0.5, 0.5);
        let j = 7;
        let tj = frequency_piece(&a, &l, j).unwrap();
        let range = representable_l(&l, j, 0.5);
        let (_, tail) = spatial_sum(&tj, 0.5, j, range).unwrap();
        assert!(tail < 1e-8, "tail {tail}");
    }

    #[test]
    fn spatial_piece_kernel_support() {
        let l = lat(8.0, 512);
        let a = model_oscillatory(-0.25, 0.5);
        let (j, rho) = (4, 0.5);
        let (lo, _) = representable_l(&l, j, rho);
        let p = spatial_piece(&a, &l, j, lo + 2).unwrap();
        let w = spatial_window(&l, j, lo + 2, rho).unwrap();
        for d in 0..512 {
            if w[d] == 0.0 {
                assert_eq!(p.entry(d, 0), ZERO);
            }
        }
    }

    #[test]
    fn unrepresentable_scale() {
        let l = lat(8.0, 256);
        let a = model_oscillatory(-0.25, 0.5);
        assert!(matches!(spatial_piece(&a, &l, 4, 40), Err(Error::Unrepresentable(_))));
        assert!(matches!(spatial_piece(&a, &l, 4, -40), Err(Error::Unrepresentable(_))));
    }

    #[test]
    fn nyquist_rejected() {
        let l = lat(8.0, 64);
        assert_eq!(frequency_piece(&one(), &l, 6).map(|_| ()), Err(Error::Nyquist));
    }

    #[test]
    fn windowing_monotone() {
        let l = lat(8.0, 1024);
        let a = model_oscillatory(-0.5, 0.5);
        let j = 5;
        let tj = frequency_piece(&a, &l, j).unwrap();
        let n = tj.norm_2_2().estimate;
        let (lo, hi) = representable_l(&l, j, 0.5);
        for ll in lo..=hi {
            let w = spatial_window(&l, j, ll, 0.5).unwrap();
            let p = tj.windowed(&w, Piece::Spatial { j, l: ll });
            assert!(p.norm_2_2().estimate <= window_constant(&w) * n * (1.0 + 1e-12));
        }
    }

    #[test]
    fn kernel_l1_bessel_slope() {
        let l = lat(8.0, 4096);
        let m = -0.5;
        let a = model_bessel(m);
        let pts: Vec<(i32, f64)> = (4..=9).map(|j| (j, kernel_l1(&a, &l, j).unwrap())).collect();
        let fit = decay_fit(&pts).unwrap();
        assert!((fit.slope - m).abs() < 0.15, "slope {}", fit.slope);
    }

    #[test]
    fn kernel_l1_identity_grows_slowly() {
        let l = lat(8.0, 4096);
        let v: Vec<f64> = (3..=9).map(|j| kernel_l1(&one(), &l, j).unwrap()).collect();
        // bounded ratios: at most logarithmic growth
        assert!(v.windows(2).all(|w| w[1] / w[0] < 1.5), "{v:?}");
    }

    #[test]
    fn opnorm_identity() {
        let l = lat(1.0, 16);
        let id = OperatorMatrix::from_circulant(&l, {
            let mut c = vec![ZERO; 16];
            c[0] = Complex64::new(1.0, 0.0);
            c
        }, Piece::Other("id".into()))
        .unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let v = opnorm(&id, p, p).unwrap();
            assert!((v.estimate - 1.0).abs() < 1e-9, "p = {p}: {v:?}");
        }
    }

    #[test]
    fn opnorm_rank_one() {
        let l = lat(2.0, 16);
        let dx = l.dx();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<Complex64> = (0..16).map(|_| Complex64::new(gauss(&mut rng), gauss(&mut rng))).collect();
        let v: Vec<Complex64> = (0..16).map(|_| Complex64::new(gauss(&mut rng), gauss(&mut rng))).collect();
        // (A f)_i = u_i sum_y conj(v_y) f_y dx
        let mat = DMatrix::from_fn(16, 16, |i, y| u[i] * v[y].conj() * dx);
        let op = OperatorMatrix::from_dense(&l, mat, Piece::Other("rank one".into())).unwrap();
        let wn = |w: &[Complex64], p: f64| lp_seq(w, p) * if p.is_infinite() { 1.0 } else { dx.powf(1.0 / p) };
        for (r, s) in [(1.5, 3.0), (2.0, 2.0), (4.0 / 3.0, 4.0), (3.0, 1.5)] {
            let want = wn(&u, s) * wn(&v, dual(r));
            let got = opnorm(&op, r, s).unwrap();
            assert!((got.estimate - want).abs() < 1e-6 * want, "({r},{s}): {} vs {want}", got.estimate);
        }
    }

    #[test]
    fn interpolation_recovers_endpoints() {
        let e = EndpointNorms { n11: 3.0, n22: 1.0, n1inf: 10.0, ninfinf: 2.0 };
        assert_eq!(interpolation_bound(&e, 2.0, 2.0), Some(1.0));
        assert_eq!(interpolation_bound(&e, 1.0, f64::INFINITY), Some(10.0));
        assert!(interpolation_bound(&e, 4.0, 2.0).is_none());
        let mid = interpolation_bound(&e, 4.0 / 3.0, 4.0).unwrap();
        assert!(mid <= 10f64.powf(0.5) * 1.0 + 1e-12);
    }

    #[test]
    fn interpolation_bounds_true_norm() {
        let l = lat(8.0, 256);
        let a = model_oscillatory(-0.25, 0.5);
        let p = frequency_piece(&a, &l, 4).unwrap();
        let e = p.endpoint_norms();
        for (r, s) in [(4.0 / 3.0, 4.0), (1.5, 2.0), (1.2, 3.0)] {
            let lower = opnorm(&p, r, s).unwrap().lower;
            let upper = interpolation_bound(&e, r, s).unwrap();
            assert!(lower <= upper * (1.0 + 1e-9), "({r},{s}) {lower} > {upper}");
        }
    }

    #[test]
    fn decay_fit_geometric() {
        let pts: Vec<(i32, f64)> = (0..6).map(|j| (j, 2f64.powf(-0.5 * j as f64))).collect();
        let fit = decay_fit(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(decay_fit(&pts[..3]).is_err());
    }

    #[test]
    fn lanczos_below_svd() {
        let l = lat(4.0, 64);
        let a = model_x_dependent(-0.5, 0.5, 4.0);
        let p = frequency_piece(&a, &l, 3).unwrap();
        let exact = p.norm_2_2().estimate;
        let pw = p.lanczos_2_2(64, 1e-15);
        assert!(pw <= exact * (1.0 + 1e-12));
        assert!(pw >= exact * (1.0 - 1e-10));
        assert!(p.schur_bound() >= exact * (1.0 - 1e-12));
    }
}
