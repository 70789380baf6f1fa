//! Dyadic maximal operators over the three shifted grids, the grand
//! maximal function of an operator, and stopping-time pointwise sparse
//! domination. One dimension.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dyadic::{carleson_constant, certify_sparse, cubes_meeting, CubeFamily, DyadicCube, GridShift, SparseCollection};
use crate::error::{Error, Result};
use crate::func::{check_exponent, lp_norm_slice, CellIntegrator, GridFunction, Lattice};
use crate::pdo::{opnorm, OperatorMatrix};

/// Which maximal operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaximalKind {
    Hl,
    /// `(M |f|^p)^{1/p}`.
    Lp(f64),
    /// `(M w^gamma)^{1/gamma}`.
    Power(f64),
    /// `k`-fold composition of `M`.
    Iterated(u32),
    /// Needs an operator; see [`grand_maximal`].
    Grand,
}

fn require_1d(lat: &Lattice) -> Result<()> {
    if lat.dim() == 1 {
        Ok(())
    } else {
        Err(Error::Dimension(lat.dim()))
    }
}

/// Cells `[i0, i1)` whose centers lie in `[lo, hi)`.
pub fn center_cells(lat: &Lattice, lo: f64, hi: f64) -> (usize, usize) {
    let n = lat.samples() as f64;
    let c = |x: f64| ((x / lat.dx() - 0.5).ceil()).clamp(0.0, n) as usize;
    (c(lo), c(hi))
}

/// Scales from one cell to the period.
pub fn scale_range(lat: &Lattice) -> (i32, i32) {
    (lat.dx().log2().floor() as i32, lat.length().log2().floor() as i32)
}

/// Every cube of every shift and scale lying inside `[0, L)` and
/// containing at least one cell center.
pub fn domain_cubes(lat: &Lattice) -> Result<Vec<DyadicCube>> {
    require_1d(lat)?;
    let (k0, k1) = scale_range(lat);
    let len = lat.length();
    let mut out = Vec::new();
    for shift in GridShift::all(1) {
        for k in k0..=k1 {
            for q in cubes_meeting(shift, k, &[0.0], &[len])? {
                let (i0, i1) = center_cells(lat, q.lower(0), q.upper(0));
                if q.lower(0) >= 0.0 && q.upper(0) <= len && i1 > i0 {
                    out.push(q);
                }
            }
        }
    }
    Ok(out)
}

/// Dyadic maximal function of `|w|` (cell values), evaluated at cell
/// centers.
fn hl_values(lat: &Lattice, w: &[f64], cubes: &[DyadicCube]) -> Vec<f64> {
    let ig = CellIntegrator::new(lat, w, 1.0);
    let mut out = vec![0.0f64; lat.samples()];
    for q in cubes {
        let (lo, hi) = (q.lower(0), q.upper(0));
        let avg = ig.integral(&[lo], &[hi]) / q.volume();
        let (i0, i1) = center_cells(lat, lo, hi);
        for v in &mut out[i0..i1] {
            *v = v.max(avg);
        }
    }
    out
}

fn real(lat: Lattice, v: Vec<f64>) -> Result<GridFunction> {
    GridFunction::new(lat, v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
}

/// Maximal function of kind `kind`; `Grand` is rejected.
pub fn maximal(f: &GridFunction, kind: MaximalKind) -> Result<GridFunction> {
    let lat = *f.lattice();
    let cubes = domain_cubes(&lat)?;
    maximal_with(f, kind, &cubes)
}

fn maximal_with(f: &GridFunction, kind: MaximalKind, cubes: &[DyadicCube]) -> Result<GridFunction> {
    let lat = *f.lattice();
    let a = f.abs();
    let powered = |p: f64| -> Result<GridFunction> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Exponent(p));
        }
        let w: Vec<f64> = a.iter().map(|x| x.powf(p)).collect();
        real(lat, hl_values(&lat, &w, cubes).into_iter().map(|x| x.powf(1.0 / p)).collect())
    };
    match kind {
        MaximalKind::Hl => real(lat, hl_values(&lat, &a, cubes)),
        MaximalKind::Lp(p) => {
            check_exponent(p)?;
            powered(p)
        }
        MaximalKind::Power(g) => powered(g),
        MaximalKind::Iterated(k) => {
            if k == 0 {
                return Err(Error::Parameter("iteration count must be >= 1".into()));
            }
            let mut w = a;
            for _ in 0..k {
                w = hl_values(&lat, &w, cubes);
            }
            real(lat, w)
        }
        MaximalKind::Grand => Err(Error::MissingOperator),
    }
}

/// `3Q` clipped to `[0, L)`, as a cell-center range.
fn triple_cells(lat: &Lattice, q: &DyadicCube) -> (usize, usize) {
    let s = q.side();
    center_cells(lat, q.lower(0) - s, q.upper(0) + s)
}

/// `T(f chi_{[y0, y1)})` on rows `[i0, i1)`.
fn block_apply(op: &OperatorMatrix, f: &[Complex64], rows: (usize, usize), cols: (usize, usize)) -> Vec<Complex64> {
    (rows.0..rows.1)
        .map(|i| (cols.0..cols.1).map(|y| op.entry(i, y) * f[y]).sum())
        .collect()
}

/// `M_T f(x) = sup_{Q contains x} max_{z in Q} |T(f chi_{outside 3Q})(z)|`
/// over cubes of side greater than `min_side`.
pub fn grand_maximal(op: &OperatorMatrix, f: &GridFunction, min_side: f64) -> Result<GridFunction> {
    let lat = *f.lattice();
    if op.lattice() != &lat {
        return Err(Error::Lattice("operator and function lattices differ".into()));
    }
    let cubes: Vec<DyadicCube> = domain_cubes(&lat)?.into_iter().filter(|q| q.side() > min_side).collect();
    let tf = op.apply_values(f.values());
    let vals: Vec<(usize, usize, f64)> = cubes
        .par_iter()
        .map(|q| {
            let rows = center_cells(&lat, q.lower(0), q.upper(0));
            let near = block_apply(op, f.values(), rows, triple_cells(&lat, q));
            let m = (rows.0..rows.1).zip(&near).map(|(i, v)| (tf[i] - v).norm()).fold(0.0, f64::max);
            (rows.0, rows.1, m)
        })
        .collect();
    let mut out = vec![0.0f64; lat.samples()];
    for (i0, i1, m) in vals {
        for v in &mut out[i0..i1] {
            *v = v.max(m);
        }
    }
    real(lat, out)
}

/// Options of [`pointwise_dominate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointwiseOptions {
    /// Initial stopping threshold; doubled until every exceptional set
    /// fills at most a quarter of its cube.
    pub kappa: f64,
    pub depth_cap: usize,
}

impl Default for PointwiseOptions {
    fn default() -> Self {
        Self { kappa: 4.0, depth_cap: 40 }
    }
}

#[derive(Clone, Debug)]
pub struct PointwiseResult {
    pub collection: SparseCollection,
    pub carleson: f64,
    /// `max_x |T f(x)| / A f(x)` where `A f > 0`.
    pub ratio: f64,
    pub kappa: f64,
    /// The depth cap was hit somewhere.
    pub partial: bool,
    pub tf: GridFunction,
    /// `sum_{Q in S} <f>_{r,3Q} chi_Q`.
    pub af: GridFunction,
}

struct Stop {
    cubes: Vec<DyadicCube>,
    partial: bool,
}

/// Cells of standard-grid cube `q`.
fn std_cells(lat: &Lattice, q: &DyadicCube) -> (usize, usize) {
    center_cells(lat, q.lower(0), q.upper(0))
}

fn r_average(vals: &[f64], cells: (usize, usize), dx: f64, r: f64) -> f64 {
    let n = (cells.1 - cells.0) as f64;
    if n == 0.0 {
        return 0.0;
    }
    lp_norm_slice(&vals[cells.0..cells.1], dx, r).unwrap_or(f64::NAN) / (n * dx).powf(1.0 / r)
}

/// Every standard-grid cube strictly inside `q` down to one cell.
fn strict_subcubes(lat: &Lattice, q: &DyadicCube) -> Vec<DyadicCube> {
    let k0 = scale_range(lat).0;
    let mut out = Vec::new();
    let mut level = vec![*q];
    while level[0].scale() > k0 {
        level = level.iter().flat_map(|c| c.children()).collect();
        out.extend_from_slice(&level);
    }
    out
}

/// One stopping-time pass at threshold `kappa`; `None` when some
/// exceptional set is too large.
fn stopping(
    op: &OperatorMatrix,
    f: &[Complex64],
    absf: &[f64],
    lat: &Lattice,
    r: f64,
    kappa: f64,
    depth_cap: usize,
) -> Option<Stop> {
    let k0 = scale_range(lat).0;
    let root = DyadicCube::standard(lat.length().log2().round() as i32, &[0]);
    let mut out = Vec::new();
    let mut partial = false;
    let mut stack = vec![(root, 0usize)];
    let dx = lat.dx();
    while let Some((q, depth)) = stack.pop() {
        out.push(q);
        let cells = std_cells(lat, &q);
        let ncell = cells.1 - cells.0;
        if q.scale() <= k0 || ncell <= 1 {
            continue;
        }
        if depth >= depth_cap {
            partial = true;
            continue;
        }
        let t3 = triple_cells(lat, &q);
        let avg3 = r_average(absf, t3, dx, r);
        if avg3 == 0.0 {
            continue;
        }
        let thr = kappa * avg3;
        let h = block_apply(op, f, cells, t3);
        let mut e: Vec<bool> = h.iter().map(|v| v.norm() > thr).collect();
        for p in strict_subcubes(lat, &q) {
            let pc = std_cells(lat, &p);
            if pc.1 <= pc.0 {
                continue;
            }
            let near = block_apply(op, f, pc, triple_cells(lat, &p));
            let grand = (pc.0..pc.1).zip(&near).map(|(i, v)| (h[i - cells.0] - v).norm()).fold(0.0, f64::max);
            let avg = r_average(absf, pc, dx, r);
            if grand > thr || avg > thr {
                e[pc.0 - cells.0..pc.1 - cells.0].iter_mut().for_each(|b| *b = true);
            }
        }
        let count = e.iter().filter(|b| **b).count();
        if 4 * count > ncell {
            return None;
        }
        if count == 0 {
            continue;
        }
        // maximal subcubes more than half covered by E
        let mut front = q.children();
        while let Some(p) = front.pop() {
            let pc = std_cells(lat, &p);
            let m = e[pc.0 - cells.0..pc.1 - cells.0].iter().filter(|b| **b).count();
            if m == 0 {
                continue;
            }
            if 2 * m > pc.1 - pc.0 {
                stack.push((p, depth + 1));
            } else if p.scale() > k0 {
                front.extend(p.children());
            }
        }
    }
    Some(Stop { cubes: out, partial })
}

/// Stopping-time sparse family `S` for `T` and `f` with
/// `|T f| <= C A_{r,S} f`, where `A_{r,S} f = sum <f>_{r,3Q} chi_Q`.
/// The exceptional set of `Q` collects points where
/// `|T(f chi_{3Q})|`, the grand maximal function localized to `Q`, or the
/// localized `M_r f` exceed `kappa <f>_{r,3Q}`.
pub fn pointwise_dominate(op: &OperatorMatrix, f: &GridFunction, r: f64, opts: &PointwiseOptions) -> Result<PointwiseResult> {
    check_exponent(r)?;
    let lat = *f.lattice();
    require_1d(&lat)?;
    let k = lat.length().log2().round() as i32;
    if (2f64.powi(k) - lat.length()).abs() > 1e-12 * lat.length() {
        return Err(Error::Lattice(format!("period {} is not a power of two", lat.length())));
    }
    let tf = op.apply(f);
    let absf = f.abs();
    let mut kappa = opts.kappa;
    let stop = loop {
        if let Some(s) = stopping(op, f.values(), &absf, &lat, r, kappa, opts.depth_cap) {
            break s;
        }
        kappa *= 2.0;
        if !kappa.is_finite() {
            return Err(Error::Numerical("stopping threshold overflow".into()));
        }
    };
    let family = CubeFamily::new(GridShift::zero(1), stop.cubes)?;
    let carleson = carleson_constant(&family)?;
    let collection = certify_sparse(&family, 0.5)?
        .collection()
        .ok_or_else(|| Error::Numerical("stopping family failed certification".into()))?;
    let mut af = vec![0.0f64; lat.samples()];
    for q in collection.cubes() {
        let a = r_average(&absf, triple_cells(&lat, q), lat.dx(), r);
        let (i0, i1) = std_cells(&lat, q);
        af[i0..i1].iter_mut().for_each(|v| *v += a);
    }
    let ratio = tf
        .values()
        .iter()
        .zip(&af)
        .filter(|(_, a)| **a > 0.0)
        .map(|(t, a)| t.norm() / a)
        .fold(0.0, f64::max);
    Ok(PointwiseResult { collection, carleson, ratio, kappa, partial: stop.partial, tf, af: real(lat, af)? })
}

/// Four-term majorant `Mf + M_p f + M_s(T f) + ||T||_s M_s f`.
pub fn majorant(op: &OperatorMatrix, f: &GridFunction, p: f64, s: f64) -> Result<GridFunction> {
    let lat = *f.lattice();
    let cubes = domain_cubes(&lat)?;
    let tf = op.apply(f);
    let ns = opnorm(op, s, s)?.estimate;
    let m1 = maximal_with(f, MaximalKind::Hl, &cubes)?;
    let mp = maximal_with(f, MaximalKind::Lp(p), &cubes)?;
    let mst = maximal_with(&tf, MaximalKind::Lp(s), &cubes)?;
    let ms = maximal_with(f, MaximalKind::Lp(s), &cubes)?;
    let v: Vec<f64> = (0..lat.samples())
        .map(|i| m1.values()[i].re + mp.values()[i].re + mst.values()[i].re + ns * ms.values()[i].re)
        .collect();
    real(lat, v)
}

/// Default `p = 1 + (1 - rho)/4`.
pub fn default_majorant_p(rho: f64) -> f64 {
    1.0 + (1.0 - rho) / 4.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrandReport {
    /// `sup_lambda lambda |{M_T f > lambda}|^{1/r} / ||f||_r`, max over trials.
    pub weak_constant: f64,
    /// `max_x M_T f / majorant` per trial.
    pub majorant_ratios: Vec<f64>,
    /// Same with cubes of side above `large_side` and `Mf` alone.
    pub large_cube_ratios: Vec<f64>,
}

/// Weak-type `(r, r)` quotient of a nonnegative function.
pub fn weak_quotient(values: &[f64], dx: f64, r: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        return 0.0;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter()
        .enumerate()
        .map(|(k, &lam)| lam * ((k + 1) as f64 * dx).powf(1.0 / r))
        .fold(0.0, f64::max)
        / norm
}

/// Empirical weak-type constant of `M_T` and the majorant checks over
/// `trials`.
pub fn grand_maximal_weak_type(
    op: &OperatorMatrix,
    r: f64,
    trials: &[GridFunction],
    p: f64,
    s: f64,
    large_side: f64,
) -> Result<GrandReport> {
    check_exponent(r)?;
    let mut rep = GrandReport { weak_constant: 0.0, majorant_ratios: Vec::new(), large_cube_ratios: Vec::new() };
    for f in trials {
        let lat = *f.lattice();
        let mt = grand_maximal(op, f, 0.0)?;
        let mtv: Vec<f64> = mt.values().iter().map(|z| z.re).collect();
        let norm = f.lp_norm(r)?;
        rep.weak_constant = rep.weak_constant.max(weak_quotient(&mtv, lat.dx(), r, norm));
        let maj = majorant(op, f, p, s)?;
        rep.majorant_ratios.push(ratio_max(&mtv, &maj));
        let big = grand_maximal(op, f, large_side)?;
        let bigv: Vec<f64> = big.values().iter().map(|z| z.re).collect();
        let m = maximal(f, MaximalKind::Hl)?;
        rep.large_cube_ratios.push(ratio_max(&bigv, &m));
    }
    Ok(rep)
}

fn ratio_max(num: &[f64], den: &GridFunction) -> f64 {
    num.iter()
        .zip(den.values())
        .map(|(a, b)| if *a == 0.0 { 0.0 } else { a / b.re })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::random_function;
    use crate::pdo::full_operator;
    use crate::symbol::{constant, model_oscillatory, ClassParams};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat() -> Lattice {
        Lattice::new(1, 1.0, 64).unwrap()
    }

    #[test]
    fn constant_is_fixed() {
        let f = GridFunction::from_real_fn(lat(), |_| 2.5);
        for kind in [MaximalKind::Hl, MaximalKind::Lp(3.0), MaximalKind::Power(0.5), MaximalKind::Iterated(2)] {
            let m = maximal(&f, kind).unwrap();
            assert!(m.values().iter().all(|v| (v.re - 2.5).abs() < 1e-12), "{kind:?}");
        }
        assert!(matches!(maximal(&f, MaximalKind::Grand), Err(Error::MissingOperator)));
    }

    #[test]
    fn indicator_lower_bound() {
        let q = DyadicCube::standard(-3, &[2]);
        let f = GridFunction::from_real_fn(lat(), |x| if q.contains_point(x) { 1.0 } else { 0.0 });
        let m = maximal(&f, MaximalKind::Hl).unwrap();
        for i in 0..64 {
            let x = (i as f64 + 0.5) / 64.0;
            let mut k = q.scale();
            let mut c = q;
            while !c.contains_point(&[x]) {
                k += 1;
                c = q.ancestor(k);
            }
            assert!(m.values()[i].re >= q.volume() / c.volume() - 1e-12);
        }
    }

    #[test]
    fn zero_input() {
        let z = GridFunction::zeros(lat());
        let op = full_operator(&model_oscillatory(-0.5, 0.5), &lat()).unwrap();
        let out = pointwise_dominate(&op, &z, 2.0, &PointwiseOptions::default()).unwrap();
        assert_eq!(out.ratio, 0.0);
        assert!(grand_maximal(&op, &z, 0.0).unwrap().values().iter().all(|v| v.re == 0.0));
    }

    #[test]
    fn bounded_multiplier_on_indicator() {
        let lat = Lattice::new(1, 1.0, 128).unwrap();
        let q = DyadicCube::standard(-2, &[1]);
        let f = GridFunction::from_real_fn(lat, |x| if q.contains_point(x) { 1.0 } else { 0.0 });
        let op = full_operator(&constant(0.7, ClassParams::new(0.0, 1.0, 0.0).unwrap()), &lat).unwrap();
        let out = pointwise_dominate(&op, &f, 2.0, &PointwiseOptions::default()).unwrap();
        assert!(out.ratio.is_finite() && out.ratio > 0.0);
        assert!(out.carleson <= 2.0 && !out.partial);
        assert!(out.collection.verify());
    }

    #[test]
    fn weak_quotient_of_indicator() {
        let v = [1.0, 1.0, 0.0, 0.0];
        assert!((weak_quotient(&v, 0.25, 1.0, 0.5) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn sublinear_and_jensen(seed in any::<u64>(), p in 1.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_function(lat(), &mut rng);
            let g = random_function(lat(), &mut rng);
            let sum = GridFunction::new(lat(), f.values().iter().zip(g.values()).map(|(a, b)| a + b).collect()).unwrap();
            let (mf, mg, ms) = (maximal(&f, MaximalKind::Hl).unwrap(), maximal(&g, MaximalKind::Hl).unwrap(), maximal(&sum, MaximalKind::Hl).unwrap());
            let mp = maximal(&f, MaximalKind::Lp(p)).unwrap();
            for i in 0..64 {
                prop_assert!(ms.values()[i].re <= (mf.values()[i].re + mg.values()[i].re) * (1.0 + 1e-12));
                prop_assert!(mf.values()[i].re <= mp.values()[i].re * (1.0 + 1e-12));
            }
        }
    }
}
