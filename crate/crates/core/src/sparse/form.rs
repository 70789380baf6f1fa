//! Bilinear sparse forms, sparse operators and the checkerboard
//! constructor for geometrically weighted scale families.

use std::collections::{BTreeMap, HashMap};

use crate::dyadic::{carleson_constant, certify_sparse, CubeFamily, DyadicCube, SparseCollection};
use crate::error::{Error, Result};
use crate::func::{check_exponent, CellIntegrator, GridFunction, Lattice};

/// `<f>_{p,Q}` for many cubes of one function.
pub struct CubeAverager<'a> {
    f: &'a GridFunction,
    p: f64,
    ig: Option<CellIntegrator>,
}

impl<'a> CubeAverager<'a> {
    pub fn new(f: &'a GridFunction, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let ig = if p.is_finite() { Some(CellIntegrator::new(f.lattice(), &f.abs(), p)) } else { None };
        Ok(Self { f, p, ig })
    }

    pub fn average(&self, q: &DyadicCube) -> Result<f64> {
        let Some(ig) = &self.ig else { return self.f.local_average(q, self.p) };
        let lat = self.f.lattice();
        let d = lat.dim();
        let lo: Vec<f64> = (0..d).map(|a| q.lower(a)).collect();
        let hi: Vec<f64> = (0..d).map(|a| q.upper(a)).collect();
        let tol = 1e-12 * lat.length();
        if (0..d).any(|a| lo[a] < -tol || hi[a] > lat.length() + tol) {
            return Err(Error::CubeOutsideDomain);
        }
        let int = ig.integral(&lo, &hi);
        Ok(if self.p == 1.0 { int / q.volume() } else { (int / q.volume()).powf(1.0 / self.p) })
    }
}

/// Value of a sparse form with its per-cube terms.
#[derive(Clone, Debug)]
pub struct SparseFormResult {
    pub value: f64,
    pub collection: SparseCollection,
    /// `(Q, |Q| <f>_{r,Q} <g>_{s',Q})` in family order.
    pub terms: Vec<(DyadicCube, f64)>,
}

/// `sum_Q |Q| <f>_{r,Q} <g>_{s',Q}`.
pub fn sparse_form(s: &SparseCollection, f: &GridFunction, g: &GridFunction, r: f64, s_prime: f64) -> Result<SparseFormResult> {
    let af = CubeAverager::new(f, r)?;
    let ag = CubeAverager::new(g, s_prime)?;
    let mut terms = Vec::with_capacity(s.cubes().len());
    for q in s.cubes() {
        let t = q.volume() * af.average(q)? * ag.average(q)?;
        terms.push((*q, t));
    }
    let value = terms.iter().map(|t| t.1).sum();
    Ok(SparseFormResult { value, collection: s.clone(), terms })
}

/// Fraction of cell `i` covered by `q`, per axis product.
fn cell_fractions(lat: &Lattice, q: &DyadicCube) -> Vec<(usize, f64)> {
    let d = lat.dim();
    let n = lat.samples();
    let dx = lat.dx();
    let axis = |a: usize| -> Vec<(usize, f64)> {
        let (lo, hi) = (q.lower(a), q.upper(a));
        let (i0, i1) = crate::func::cell_range(lat, lo, hi);
        (i0..i1)
            .filter_map(|i| {
                let c0 = i as f64 * dx;
                let ov = (hi.min(c0 + dx) - lo.max(c0)).max(0.0) / dx;
                (ov > 0.0).then_some((i, ov))
            })
            .collect()
    };
    if d == 1 {
        axis(0)
    } else {
        let (a0, a1) = (axis(0), axis(1));
        a0.iter().flat_map(|&(i, u)| a1.iter().map(move |&(j, v)| (i * n + j, u * v))).collect()
    }
}

/// `A_{r,S} f = sum_Q <f>_{r,Q} chi_Q`, with `chi_Q` sampled as the
/// covered fraction of each cell so that pairing with a cell function is
/// exact.
pub fn sparse_operator(s: &SparseCollection, f: &GridFunction, r: f64) -> Result<GridFunction> {
    let lat = *f.lattice();
    let af = CubeAverager::new(f, r)?;
    let mut out = vec![0.0; lat.size()];
    for q in s.cubes() {
        let a = af.average(q)?;
        for (i, frac) in cell_fractions(&lat, q) {
            out[i] += a * frac;
        }
    }
    GridFunction::new(lat, out.into_iter().map(|v| num_complex::Complex64::new(v, 0.0)).collect())
}

/// One scale family with its weight. Several levels may share `j`.
#[derive(Clone, Debug)]
pub struct Level {
    pub j: i32,
    pub family: CubeFamily,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub scale: i32,
    pub parent_scale: i32,
    pub weight: f64,
    /// `sum |Q| <f><g>` over the full family at this scale.
    pub full: f64,
    /// Same sum over the selected cubes.
    pub selected: f64,
}

/// Output of [`sparse_from_decaying`].
#[derive(Clone, Debug)]
pub struct DecayingSparse {
    pub collection: SparseCollection,
    pub carleson: f64,
    /// `max_j (W_j / W_0)^{1/j}` over per-`j` aggregated weights.
    pub decay_ratio: f64,
    /// `Lambda_{S,r,s'}(f, g)`.
    pub form: f64,
    /// `sum_k W_k sum_{l(Q) = 2^k} |Q| <f><g>`.
    pub weighted_sum: f64,
    /// `weighted_sum / form`.
    pub certificate: f64,
    /// A priori bound `max_i W_i 2^{n (p_i - k_i)}` on the certificate.
    pub bound: f64,
    pub levels: Vec<LevelSummary>,
}

/// Per-`j` geometric decay ratio of aggregated weights.
pub fn decay_ratio(levels: &[Level]) -> Result<f64> {
    let mut per_j: BTreeMap<i32, f64> = BTreeMap::new();
    for l in levels {
        if !(l.weight >= 0.0) || !l.weight.is_finite() {
            return Err(Error::Parameter(format!("weight {} at j = {}", l.weight, l.j)));
        }
        *per_j.entry(l.j).or_insert(0.0) += l.weight;
    }
    let Some((&j0, &w0)) = per_j.iter().next() else { return Ok(0.0) };
    let mut q = 0.0f64;
    for (&j, &w) in per_j.iter().skip(1) {
        if w == 0.0 {
            continue;
        }
        if w0 == 0.0 {
            return Err(Error::NonDecaying(f64::INFINITY));
        }
        q = q.max((w / w0).powf(1.0 / (j - j0) as f64));
    }
    if q >= 1.0 {
        return Err(Error::NonDecaying(q));
    }
    Ok(q)
}

/// Merge weighted scale families into one sparse collection.
///
/// Scales are ordered from coarse to fine, `k_0 > k_1 > ...`. Level 0 is
/// kept whole; at level `i >= 1` each parent cube of scale
/// `min(k_i + i, root_scale - 1)` keeps the single child of scale `k_i`
/// maximizing `<f>_r <g>_{s'}` (first in lexicographic order on ties).
/// A cube of level `i` then contains at most `2^{-i'}`-fractions of its
/// measure from each finer level `i'`, so the Carleson constant is at
/// most 2 in one dimension.
pub fn sparse_from_decaying(
    levels: &[Level],
    f: &GridFunction,
    g: &GridFunction,
    r: f64,
    s_prime: f64,
    root_scale: i32,
) -> Result<DecayingSparse> {
    let decay = decay_ratio(levels)?;
    let n = f.lattice().dim() as i32;
    let mut by_scale: BTreeMap<i32, (f64, Vec<DyadicCube>)> = BTreeMap::new();
    let mut shift = None;
    for l in levels {
        let Some(first) = l.family.cubes().first() else { continue };
        let k = first.scale();
        if l.family.cubes().iter().any(|q| q.scale() != k) {
            return Err(Error::Parameter(format!("level j = {} mixes scales", l.j)));
        }
        match shift {
            None => shift = Some(l.family.shift()),
            Some(s) if s != l.family.shift() => return Err(Error::MixedShift),
            _ => {}
        }
        let e = by_scale.entry(k).or_insert((0.0, Vec::new()));
        e.0 += l.weight;
        e.1.extend_from_slice(l.family.cubes());
    }
    let af = CubeAverager::new(f, r)?;
    let ag = CubeAverager::new(g, s_prime)?;
    let mut cache: HashMap<DyadicCube, f64> = HashMap::new();
    let mut product = |q: &DyadicCube| -> Result<f64> {
        if let Some(v) = cache.get(q) {
            return Ok(*v);
        }
        let v = af.average(q)? * ag.average(q)?;
        cache.insert(*q, v);
        Ok(v)
    };
    let mut selected_all = Vec::new();
    let mut summaries = Vec::new();
    let mut bound = 0.0f64;
    for (i, (&k, (w, cubes))) in by_scale.iter_mut().rev().enumerate() {
        cubes.sort();
        cubes.dedup();
        let mut full = 0.0;
        for q in cubes.iter() {
            full += q.volume() * product(q)?;
        }
        let p = if i == 0 { k } else { (k + i as i32).min(root_scale - 1).max(k + 1) };
        let chosen: Vec<DyadicCube> = if i == 0 {
            cubes.clone()
        } else {
            let mut best: BTreeMap<DyadicCube, (DyadicCube, f64)> = BTreeMap::new();
            for q in cubes.iter() {
                let v = product(q)?;
                let parent = q.ancestor(p);
                match best.get(&parent) {
                    Some(&(_, bv)) if bv >= v => {}
                    _ => {
                        best.insert(parent, (*q, v));
                    }
                }
            }
            best.into_values().map(|b| b.0).collect()
        };
        let mut sel = 0.0;
        for q in &chosen {
            sel += q.volume() * product(q)?;
        }
        bound = bound.max(*w * 2f64.powi(n * (p - k)));
        summaries.push(LevelSummary { scale: k, parent_scale: p, weight: *w, full, selected: sel });
        selected_all.extend(chosen);
    }
    let shift = shift.unwrap_or_else(|| crate::dyadic::GridShift::zero(f.lattice().dim()));
    let family = CubeFamily::new(shift, selected_all)?;
    let (carleson, collection) = if family.is_empty() {
        (0.0, SparseCollection::unwitnessed(family, 0.9))
    } else {
        let c = carleson_constant(&family)?;
        let eta = (0.9 / c).min(0.9);
        let col = certify_sparse(&family, eta)?
            .collection()
            .ok_or_else(|| Error::Numerical("constructed family failed certification".into()))?;
        (c, col)
    };
    let mut form = 0.0;
    for q in collection.cubes() {
        form += q.volume() * product(q)?;
    }
    let weighted_sum: f64 = summaries.iter().map(|s| s.weight * s.full).sum();
    let certificate = if weighted_sum == 0.0 { 0.0 } else { weighted_sum / form };
    Ok(DecayingSparse {
        collection,
        carleson,
        decay_ratio: decay,
        form,
        weighted_sum,
        certificate,
        bound,
        levels: summaries,
    })
}

/// Standard-grid tiling of `[0, L)^n` at `scale`.
pub fn tiling(lat: &Lattice, scale: i32) -> Result<CubeFamily> {
    let d = lat.dim();
    let side = 2f64.powi(scale);
    let count = (lat.length() / side).round() as i64;
    if count < 1 || (count as f64 * side - lat.length()).abs() > 1e-12 * lat.length() {
        return Err(Error::Lattice(format!("period {} is not a multiple of 2^{scale}", lat.length())));
    }
    let cubes: Vec<DyadicCube> = if d == 1 {
        (0..count).map(|m| DyadicCube::standard(scale, &[m])).collect()
    } else {
        (0..count)
            .flat_map(|a| (0..count).map(move |b| DyadicCube::standard(scale, &[a, b])))
            .collect()
    };
    CubeFamily::new(crate::dyadic::GridShift::zero(d), cubes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::random_function;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat() -> Lattice {
        Lattice::new(1, 1.0, 256).unwrap()
    }

    fn coll(cubes: Vec<DyadicCube>) -> SparseCollection {
        SparseCollection::unwitnessed(CubeFamily::from_cubes(cubes).unwrap(), 0.5)
    }

    fn chi(q: &DyadicCube) -> GridFunction {
        let q = *q;
        GridFunction::from_real_fn(lat(), move |x| if q.contains_point(x) { 1.0 } else { 0.0 })
    }

    #[test]
    fn single_cube_forms() {
        let q = DyadicCube::standard(-2, &[1]);
        let s = coll(vec![q]);
        let v = sparse_form(&s, &chi(&q), &chi(&q), 1.5, 3.0).unwrap().value;
        assert!((v - 0.25).abs() < 1e-14);
        let zero = GridFunction::zeros(lat());
        assert_eq!(sparse_form(&s, &chi(&q), &zero, 1.5, 3.0).unwrap().value, 0.0);
        let a = sparse_operator(&s, &chi(&q), 2.0).unwrap();
        assert!(a.values().iter().zip(chi(&q).values()).all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn nested_pair_matches_two_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_function(lat(), &mut rng);
        let g = random_function(lat(), &mut rng);
        let q = DyadicCube::standard(-1, &[0]);
        let c = q.children()[1];
        let s = coll(vec![q, c]);
        let (r, sp) = (1.5, 2.5);
        let want = q.volume() * f.local_average(&q, r).unwrap() * g.local_average(&q, sp).unwrap()
            + c.volume() * f.local_average(&c, r).unwrap() * g.local_average(&c, sp).unwrap();
        let got = sparse_form(&s, &f, &g, r, sp).unwrap().value;
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn single_level_is_the_tiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = random_function(lat(), &mut rng);
        let g = random_function(lat(), &mut rng);
        let t = tiling(&lat(), -3).unwrap();
        let out = sparse_from_decaying(&[Level { j: 0, family: t.clone(), weight: 1.0 }], &f, &g, 2.0, 2.0, 0).unwrap();
        assert_eq!(out.collection.cubes(), t.cubes());
        assert!((out.certificate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_function(lat(), &mut rng);
        let g = random_function(lat(), &mut rng);
        let levels = [
            Level { j: 0, family: tiling(&lat(), -2).unwrap(), weight: 1.0 },
            Level { j: 1, family: tiling(&lat(), -4).unwrap(), weight: 0.125 },
        ];
        let out = sparse_from_decaying(&levels, &f, &g, 1.5, 2.0, 0).unwrap();
        assert!(out.carleson <= 2.0);
        assert!(out.certificate <= out.bound * (1.0 + 1e-12));
        // exhaustive recomputation of the certificate
        let full = |k: i32| -> f64 {
            tiling(&lat(), k)
                .unwrap()
                .cubes()
                .iter()
                .map(|q| q.volume() * f.local_average(q, 1.5).unwrap() * g.local_average(q, 2.0).unwrap())
                .sum()
        };
        let form = sparse_form(&out.collection, &f, &g, 1.5, 2.0).unwrap().value;
        let want = (full(-2) + 0.125 * full(-4)) / form;
        assert!((out.certificate - want).abs() < 1e-12 * want);
    }

    #[test]
    fn ties_pick_first_child() {
        let q0 = DyadicCube::standard(0, &[0]);
        let f = chi(&q0);
        let levels: Vec<Level> = (0..4)
            .map(|i| Level { j: i, family: tiling(&lat(), -i - 1).unwrap(), weight: 0.5f64.powi(i) })
            .collect();
        let out = sparse_from_decaying(&levels, &f, &f, 2.0, 2.0, 0).unwrap();
        for q in out.collection.cubes().iter().filter(|q| q.scale() < -1) {
            let p = q.parent();
            // selected child is the lowest-index child of its parent group
            let k = q.scale();
            let i = -k - 1;
            let group = q.ancestor((k + i).min(-1).max(k + 1));
            let first = (0..).map(|_| ()).take(1).fold(group, |c, _| {
                let mut c = c;
                while c.scale() > k {
                    c = c.children()[0];
                }
                c
            });
            assert_eq!(*q, first, "parent {p:?}");
        }
    }

    #[test]
    fn non_decaying_rejected() {
        let f = GridFunction::zeros(lat());
        let levels = [
            Level { j: 0, family: tiling(&lat(), -2).unwrap(), weight: 1.0 },
            Level { j: 1, family: tiling(&lat(), -3).unwrap(), weight: 2.0 },
        ];
        assert!(matches!(sparse_from_decaying(&levels, &f, &f, 1.0, 1.0, 0), Err(Error::NonDecaying(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn operator_duality_and_monotonicity(seed in any::<u64>(), r in 1.0f64..2.0, dr in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_function(lat(), &mut rng);
            let g = random_function(lat(), &mut rng).map(|z| num_complex::Complex64::new(z.norm(), 0.0));
            let s = coll(vec![
                DyadicCube::standard(-1, &[0]),
                DyadicCube::standard(-3, &[1]),
                DyadicCube::standard(-2, &[3]),
                DyadicCube::standard(-5, &[17]),
            ]);
            let a = sparse_operator(&s, &f, r).unwrap();
            let pairing = a.inner(&g).re;
            let form = sparse_form(&s, &f, &g, r, 1.0).unwrap().value;
            prop_assert!((pairing - form).abs() <= 1e-12 * form);
            let b = sparse_operator(&s, &f, r + dr).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!(x.re <= y.re * (1.0 + 1e-12) + 1e-15);
            }
            let swapped = sparse_form(&s, &g, &f, 1.0, r).unwrap().value;
            prop_assert!((swapped - form).abs() <= 1e-12 * form);
        }
    }
}
