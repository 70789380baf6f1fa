//! Muckenhoupt and reverse-Hölder characteristics over the three shifted
//! dyadic grids, and weighted consequences of sparse bounds. One
//! dimension.

use num_complex::Complex64;
use rand::Rng;

use crate::dyadic::{CubeFamily, DyadicCube, GridShift, SparseCollection};
use crate::error::{Error, Result};
use crate::func::{check_exponent, CellIntegrator, GridFunction, Lattice};
use crate::maximal::{domain_cubes, maximal, MaximalKind};
use crate::pdo::{apply_t, dual};
use crate::sparse::sparse_form;
use crate::symbol::Symbol;

pub use crate::sparse::{corollary_endpoints, Endpoint};

/// Nonnegative, not identically zero.
#[derive(Clone, Debug)]
pub struct Weight {
    w: GridFunction,
}

impl Weight {
    pub fn new(w: GridFunction) -> Result<Self> {
        let ok = w.values().iter().all(|z| z.im == 0.0 && z.re >= 0.0 && z.re.is_finite());
        if !ok {
            return Err(Error::Parameter("weight must be finite, real and nonnegative".into()));
        }
        if w.values().iter().all(|z| z.re == 0.0) {
            return Err(Error::Parameter("weight vanishes identically".into()));
        }
        Ok(Self { w })
    }

    pub fn from_real_fn(lat: Lattice, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(GridFunction::from_real_fn(lat, |x| f(x[0])))
    }

    pub fn function(&self) -> &GridFunction {
        &self.w
    }

    pub fn lattice(&self) -> &Lattice {
        self.w.lattice()
    }

    pub fn values(&self) -> Vec<f64> {
        self.w.values().iter().map(|z| z.re).collect()
    }

    /// `w^e` with `0^e = inf` for `e < 0`.
    pub fn power(&self, e: f64) -> Vec<f64> {
        self.values().into_iter().map(|v| if v == 0.0 && e < 0.0 { f64::INFINITY } else { v.powf(e) }).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Weight> {
        Weight::new(self.w.scale(c))
    }
}

/// `|x - c|^a` with `c` the midpoint plus half a cell.
pub fn power_weight(lat: Lattice, a: f64) -> Result<Weight> {
    let c = lat.length() / 2.0 + lat.dx() / 2.0;
    Weight::from_real_fn(lat, |x| (x - c).abs().powf(a))
}

/// 1 and `lambda` on alternating eighths of the period.
pub fn checkerboard_weight(lat: Lattice, lambda: f64) -> Result<Weight> {
    let s = lat.length() / 8.0;
    Weight::from_real_fn(lat, |x| if ((x / s).floor() as i64) % 2 == 0 { 1.0 } else { lambda })
}

/// `0.01 + psi(|x - c| / width) / width`, a unit-mass bump over a floor.
pub fn spike_weight(lat: Lattice, width: f64) -> Result<Weight> {
    if !(width > 0.0) {
        return Err(Error::Parameter(format!("spike width {width}")));
    }
    let c = lat.length() / 2.0 + lat.dx() / 2.0;
    Weight::from_real_fn(lat, |x| 0.01 + crate::pdo::psi((x - c).abs() / width) / width)
}

/// `const`, `const:c=..`, `power:a=..`, `checkerboard:lambda=..`,
/// `spike:width=..`.
pub fn weight_preset(spec: &str, lat: Lattice) -> Result<Weight> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let arg = |key: &str, default: Option<f64>| -> Result<f64> {
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad weight argument {kv}")))?;
            if k.trim() == key {
                return v.trim().parse().map_err(|_| Error::Parse(format!("bad number {v}")));
            }
        }
        default.ok_or_else(|| Error::Parse(format!("weight {name} needs {key}=")))
    };
    match name {
        "const" => {
            let c = arg("c", Some(1.0))?;
            Weight::from_real_fn(lat, |_| c)
        }
        "power" => power_weight(lat, arg("a", None)?),
        "checkerboard" => checkerboard_weight(lat, arg("lambda", None)?),
        "spike" => spike_weight(lat, arg("width", None)?),
        _ => Err(Error::Parse(format!("unknown weight preset {name}"))),
    }
}

fn averages(lat: &Lattice, dens: Vec<f64>) -> impl Fn(&DyadicCube) -> f64 {
    let ig = CellIntegrator::from_density(lat, dens);
    move |q: &DyadicCube| ig.integral(&[q.lower(0)], &[q.upper(0)]) / q.volume()
}

/// `[w]_{A_p} = sup_Q <w>_Q <w^{1-p'}>_Q^{p-1}` over every cube of the
/// three grids inside the period; `p = 1` gives `max Mw / w`. Infinite
/// when `w` vanishes on a cube and `p > 1`.
pub fn ap_characteristic(w: &Weight, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let lat = *w.lattice();
    if p == 1.0 {
        let m = maximal(w.function(), MaximalKind::Hl)?;
        return Ok(m
            .values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| if b == 0.0 { f64::INFINITY } else { a.re / b })
            .fold(1.0, f64::max));
    }
    if p.is_infinite() {
        return Err(Error::Exponent(p));
    }
    let e = 1.0 - dual(p);
    let neg = w.power(e);
    if neg.iter().any(|v| v.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    let aw = averages(&lat, w.values());
    let an = averages(&lat, neg);
    let cubes = domain_cubes(&lat)?;
    Ok(cubes.iter().map(|q| aw(q) * an(q).powf(p - 1.0)).fold(1.0, f64::max))
}

/// `[w]_{RH_q} = sup_Q <w>_{q,Q} / <w>_Q`; exactly 1 at `q = 1`.
pub fn rh_characteristic(w: &Weight, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if q == 1.0 {
        return Ok(1.0);
    }
    let lat = *w.lattice();
    let aw = averages(&lat, w.values());
    let cubes = domain_cubes(&lat)?;
    if q.is_infinite() {
        let v = w.values();
        return Ok(cubes
            .iter()
            .map(|c| {
                let (i0, i1) = crate::maximal::center_cells(&lat, c.lower(0), c.upper(0));
                let m = v[i0..i1].iter().cloned().fold(0.0, f64::max);
                let a = aw(c);
                if a == 0.0 { 1.0 } else { m / a }
            })
            .fold(1.0, f64::max));
    }
    let aq = averages(&lat, w.power(q));
    Ok(cubes
        .iter()
        .map(|c| {
            let a = aw(c);
            if a == 0.0 { 1.0 } else { aq(c).powf(1.0 / q) / a }
        })
        .fold(1.0, f64::max))
}

/// Finiteness by refinement: the value grows by less than `tol`
/// (relative) from `N` to `2N`.
pub const FINITE_GROWTH: f64 = 0.1;

pub fn is_finite_by_refinement(values: (f64, f64)) -> bool {
    values.0.is_finite() && values.1.is_finite() && values.1 <= values.0 * (1.0 + FINITE_GROWTH)
}

/// Characteristics entering both sides of the `A_p cap RH` equivalence.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceSides {
    /// `[w]_{A_{p/r}}`.
    pub ap: f64,
    /// `[w]_{RH_{(s/p)'}}`.
    pub rh: f64,
    /// `[w^{(s/p)'}]_{A_{(s/p)'(p/r - 1) + 1}}`.
    pub rhs: f64,
}

/// Exponents `(p/r, (s/p)', (s/p)'(p/r-1)+1)`.
pub fn equivalence_exponents(p: f64, r: f64, s: f64) -> Result<(f64, f64, f64)> {
    if !(r < p && p < s) || r < 1.0 {
        return Err(Error::ExponentOrder);
    }
    let t = dual(s / p);
    Ok((p / r, t, t * (p / r - 1.0) + 1.0))
}

pub fn equivalence_sides(w: &Weight, p: f64, r: f64, s: f64) -> Result<EquivalenceSides> {
    let (a, t, b) = equivalence_exponents(p, r, s)?;
    let wt = Weight::new(GridFunction::new(
        *w.lattice(),
        w.power(t).into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )?)?;
    Ok(EquivalenceSides { ap: ap_characteristic(w, a)?, rh: rh_characteristic(w, t)?, rhs: ap_characteristic(&wt, b)? })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceVerdict {
    pub lhs_ap: bool,
    pub lhs_rh: bool,
    pub rhs: bool,
    pub coarse: EquivalenceSides,
    pub fine: EquivalenceSides,
}

impl EquivalenceVerdict {
    pub fn lhs(&self) -> bool {
        self.lhs_ap && self.lhs_rh
    }
    pub fn agree(&self) -> bool {
        self.lhs() == self.rhs
    }
}

/// Finiteness verdicts for both sides from weights built by `make` at
/// `n` and `2n` samples.
pub fn ap_rh_equivalence_check(
    make: impl Fn(Lattice) -> Result<Weight>,
    lat: Lattice,
    p: f64,
    r: f64,
    s: f64,
) -> Result<EquivalenceVerdict> {
    let fine_lat = Lattice::new(lat.dim(), lat.length(), lat.samples() * 2)?;
    let coarse = equivalence_sides(&make(lat)?, p, r, s)?;
    let fine = equivalence_sides(&make(fine_lat)?, p, r, s)?;
    Ok(EquivalenceVerdict {
        lhs_ap: is_finite_by_refinement((coarse.ap, fine.ap)),
        lhs_rh: is_finite_by_refinement((coarse.rh, fine.rh)),
        rhs: is_finite_by_refinement((coarse.rhs, fine.rhs)),
        coarse,
        fine,
    })
}

/// `max(1/(p - r), (s - 1)/(s - p))`; `s = inf` gives `max(1/(p-r), 1)`.
pub fn lemma_alpha(r: f64, p: f64, s: f64) -> Result<f64> {
    if !(r < p && p < s) {
        return Err(Error::ExponentOrder);
    }
    let b = if s.is_infinite() { 1.0 } else { (s - 1.0) / (s - p) };
    Ok((1.0 / (p - r)).max(b))
}

/// `(int |f|^p w)^{1/p}`.
pub fn weighted_norm(f: &GridFunction, w: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    let dx = f.lattice().cell_volume();
    let s: f64 = f.values().iter().zip(w).map(|(z, &v)| z.norm().powf(p) * v).sum::<f64>() * dx;
    Ok(s.powf(1.0 / p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub alpha: f64,
}

/// `Lambda_{S,r,s'}(f,g)` against
/// `([w]_{A_{p/r}} [w]_{RH_{(s/p)'}})^alpha ||f||_{L^p(w)} ||g||_{L^{p'}(w^{1-p'})}`.
pub fn weighted_sparse_bound_check(
    s_coll: &SparseCollection,
    f: &GridFunction,
    g: &GridFunction,
    w: &Weight,
    r: f64,
    s: f64,
    p: f64,
) -> Result<WeightedBound> {
    let alpha = lemma_alpha(r, p, s)?;
    let (a, t, _) = equivalence_exponents(p, r, s)?;
    let ca = ap_characteristic(w, a)?;
    let cr = rh_characteristic(w, t)?;
    if !ca.is_finite() || !cr.is_finite() {
        return Err(Error::InfiniteCharacteristic);
    }
    let lhs = sparse_form(s_coll, f, g, r, dual(s))?.value;
    let pp = dual(p);
    let rhs = (ca * cr).powf(alpha) * weighted_norm(f, &w.values(), p)? * weighted_norm(g, &w.power(1.0 - pp), pp)?;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(WeightedBound { lhs, rhs, ratio, alpha })
}

/// Random sparse family on the standard grid: from each chosen cube, one
/// child, two grandchildren or four great-grandchildren (half its
/// measure), down to cubes of `min_cells` cells.
pub fn random_sparse_family(lat: &Lattice, min_cells: usize, rng: &mut impl Rng) -> Result<SparseCollection> {
    let k_root = lat.length().log2().round() as i32;
    let k_min = (lat.dx() * min_cells as f64).log2().ceil() as i32;
    let mut out = vec![DyadicCube::standard(k_root, &[0])];
    let mut stack = vec![out[0]];
    while let Some(q) = stack.pop() {
        let u: i32 = rng.gen_range(1..=3);
        if q.scale() - u < k_min {
            continue;
        }
        let mut desc = vec![q];
        for _ in 0..u {
            desc = desc.iter().flat_map(|c| c.children()).collect();
        }
        let take = 1usize << (u - 1);
        for _ in 0..take {
            let i = rng.gen_range(0..desc.len());
            let c = desc.swap_remove(i);
            out.push(c);
            stack.push(c);
        }
    }
    let fam = CubeFamily::new(GridShift::zero(1), out)?;
    crate::dyadic::certify_sparse(&fam, 0.5)?
        .collection()
        .ok_or_else(|| Error::Numerical("random family failed certification".into()))
}

/// Controlling maximal operator for the Fefferman-Stein inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Control {
    Power(f64),
    Iterated(u32),
}

/// `int |T f|^p w / int |f|^p M w`.
pub fn fefferman_stein_check(a: &Symbol, f: &GridFunction, w: &Weight, p: f64, control: Control) -> Result<f64> {
    let kind = match control {
        Control::Power(g) => MaximalKind::Power(g),
        Control::Iterated(k) => MaximalKind::Iterated(k),
    };
    let mw: Vec<f64> = maximal(w.function(), kind)?.values().iter().map(|z| z.re).collect();
    let tf = apply_t(a, f)?;
    let lhs = weighted_norm(&tf, &w.values(), p)?.powf(p);
    let rhs = weighted_norm(f, &mw, p)?.powf(p);
    Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// `||T f||_{L^p(w)} / ||M f||_{L^p(w)}`.
pub fn coifman_fefferman_check(a: &Symbol, f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    let tf = apply_t(a, f)?;
    let mf = maximal(f, MaximalKind::Hl)?;
    let lhs = weighted_norm(&tf, &w.values(), p)?;
    let rhs = weighted_norm(&mf, &w.values(), p)?;
    Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// `sup_lambda lambda |{|T f| > lambda}| / ||f||_1`.
pub fn weak_type_check(a: &Symbol, f: &GridFunction) -> Result<f64> {
    let tf = apply_t(a, f)?;
    let v: Vec<f64> = tf.abs();
    Ok(crate::maximal::weak_quotient(&v, f.lattice().cell_volume(), 1.0, f.lp_norm(1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat() -> Lattice {
        Lattice::new(1, 1.0, 128).unwrap()
    }

    #[test]
    fn constant_weight_is_one() {
        let w = weight_preset("const:c=3", lat()).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((ap_characteristic(&w, p).unwrap() - 1.0).abs() < 1e-12);
        }
        for q in [1.0, 2.0, 5.0, f64::INFINITY] {
            assert!((rh_characteristic(&w, q).unwrap() - 1.0).abs() < 1e-12);
        }
        let v = ap_rh_equivalence_check(|l| weight_preset("const", l), lat(), 2.0, 1.0, 4.0).unwrap();
        assert!(v.lhs() && v.rhs && v.agree());
    }

    #[test]
    fn rh_one_is_exact() {
        let w = power_weight(lat(), -0.7).unwrap();
        assert_eq!(rh_characteristic(&w, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn checkerboard_two_cell_value() {
        // a cube with one cell of each value gives (1+l)/2 * ((1 + 1/l)/2)
        let lam = 9.0;
        let w = checkerboard_weight(Lattice::new(1, 1.0, 16).unwrap(), lam).unwrap();
        let want = (1.0 + lam) / 2.0 * (1.0 + 1.0 / lam) / 2.0;
        assert!((ap_characteristic(&w, 2.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn jensen_and_nesting() {
        for a in [-0.6, -0.2, 0.3, 0.8, 1.5] {
            let w = power_weight(lat(), a).unwrap();
            let mut prev = f64::INFINITY;
            for p in [1.0, 1.5, 2.0, 3.0, 6.0] {
                let c = ap_characteristic(&w, p).unwrap();
                assert!(c > 1.0 && c <= prev * (1.0 + 1e-12), "a={a} p={p}");
                prev = c;
            }
        }
    }

    #[test]
    fn power_weight_refinement() {
        let fin = |a: f64| {
            let c = |n| ap_characteristic(&power_weight(Lattice::new(1, 1.0, n).unwrap(), a).unwrap(), 2.0).unwrap();
            is_finite_by_refinement((c(1024), c(2048)))
        };
        assert!(fin(0.5));
        assert!(!fin(1.3));
    }

    #[test]
    fn lemma_scaling_and_trivial_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_sparse_family(&lat(), 4, &mut rng).unwrap();
        let f = crate::func::random_function(lat(), &mut rng);
        let g = crate::func::random_function(lat(), &mut rng);
        let w = power_weight(lat(), 0.3).unwrap();
        let a = weighted_sparse_bound_check(&s, &f, &g, &w, 1.0, 4.0, 2.0).unwrap();
        let b = weighted_sparse_bound_check(&s, &f, &g, &w.scaled(7.0).unwrap(), 1.0, 4.0, 2.0).unwrap();
        assert!((a.ratio - b.ratio).abs() <= 1e-12 * a.ratio);
        assert_eq!(a.alpha, 1.5);
        let q = DyadicCube::standard(-2, &[1]);
        let one = SparseCollection::unwitnessed(CubeFamily::from_cubes(vec![q]).unwrap(), 0.5);
        let chi = GridFunction::from_real_fn(lat(), |x| if q.contains_point(x) { 1.0 } else { 0.0 });
        let c = weighted_sparse_bound_check(&one, &chi, &chi, &weight_preset("const", lat()).unwrap(), 1.0, 4.0, 2.0).unwrap();
        assert!((c.lhs - 0.25).abs() < 1e-14 && (c.rhs - 0.25).abs() < 1e-14);
    }

    #[test]
    fn alpha_formula() {
        assert_eq!(lemma_alpha(1.0, 2.0, 4.0).unwrap(), 1.5);
        assert_eq!(lemma_alpha(1.0, 2.0, f64::INFINITY).unwrap(), 1.0);
        assert!((lemma_alpha(1.0, 2.0, 1e9).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(lemma_alpha(2.0, 2.0, 4.0), Err(Error::ExponentOrder)));
    }

    #[test]
    fn random_families_are_sparse() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sparse_family(&lat(), 2, &mut rng).unwrap();
            assert!(crate::dyadic::carleson_constant(s.family()).unwrap() <= 2.0);
        }
    }

    #[test]
    fn presets_parse() {
        assert!(weight_preset("power:a=0.5", lat()).is_ok());
        assert!(weight_preset("spike:width=0.01", lat()).is_ok());
        assert!(weight_preset("power", lat()).is_err());
        assert!(weight_preset("nope", lat()).is_err());
    }
}
