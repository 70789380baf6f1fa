//! Fast paths against brute-force references.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsepdo::cli::accept::{direct_apply, maximal_oracle, single_cube_oracle};
use sparsepdo::dyadic::{carleson_constant, certify_sparse, CubeFamily, DyadicCube};
use sparsepdo::func::{random_function, GridFunction, Lattice};
use sparsepdo::maximal::{maximal, MaximalKind};
use sparsepdo::pdo::{apply_t, full_operator, opnorm};
use sparsepdo::sparse::best_single_cube;
use sparsepdo::symbol::{model_bessel, model_oscillatory, model_x_dependent, Symbol};

fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

fn symbols(len: f64) -> Vec<Symbol> {
    vec![model_oscillatory(-0.5, 0.5), model_bessel(-0.75), model_x_dependent(-0.5, 0.5, len), model_oscillatory(-0.25, 0.0)]
}

#[test]
fn apply_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lat = Lattice::new(1, 8.0, 128).unwrap();
    for t in 0..10 {
        let a = &symbols(8.0)[t % 4];
        let f = random_function(lat, &mut rng);
        let e = rel(apply_t(a, &f).unwrap().values(), &direct_apply(a, &f));
        assert!(e < 1e-8, "instance {t}: {e}");
    }
}

#[test]
fn matrix_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lat = Lattice::new(1, 4.0, 64).unwrap();
    for a in symbols(4.0) {
        let f = random_function(lat, &mut rng);
        let op = full_operator(&a, &lat).unwrap();
        assert!(rel(op.apply(&f).values(), &direct_apply(&a, &f)) < 1e-8);
    }
}

#[test]
fn l2_norm_matches_svd() {
    let lat = Lattice::new(1, 8.0, 256).unwrap();
    for a in symbols(8.0) {
        let op = full_operator(&a, &lat).unwrap();
        let dense: DMatrix<Complex64> = op.to_dense();
        let sv = dense.singular_values().iter().copied().fold(0.0, f64::max);
        let est = opnorm(&op, 2.0, 2.0).unwrap().estimate;
        assert!((est / sv - 1.0).abs() < 1e-8, "{} vs {sv}", est);
    }
}

#[test]
fn power_iteration_matches_svd() {
    let lat = Lattice::new(1, 8.0, 1024).unwrap();
    let op = full_operator(&model_x_dependent(-0.5, 0.5, 8.0), &lat).unwrap();
    let sv = op.to_dense().singular_values().iter().copied().fold(0.0, f64::max);
    let est = opnorm(&op, 2.0, 2.0).unwrap();
    assert!(est.estimate <= sv * (1.0 + 1e-12));
    assert!((est.estimate / sv - 1.0).abs() < 1e-8, "{} vs {sv}", est.estimate);
}

#[test]
fn maximal_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (len, n) in [(4.0, 64), (1.0, 32), (8.0, 16)] {
        let lat = Lattice::new(1, len, n).unwrap();
        for _ in 0..4 {
            let f = random_function(lat, &mut rng);
            let fast = maximal(&f, MaximalKind::Hl).unwrap();
            let slow = maximal_oracle(&f).unwrap();
            for (u, v) in fast.values().iter().zip(&slow) {
                assert!((u.re - v).abs() <= 1e-12 * v, "{} vs {v}", u.re);
            }
            let sq = GridFunction::new(lat, f.values().iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect()).unwrap();
            let slow2 = maximal_oracle(&sq).unwrap();
            let fast2 = maximal(&f, MaximalKind::Lp(2.0)).unwrap();
            for (u, v) in fast2.values().iter().zip(&slow2) {
                assert!((u.re - v.sqrt()).abs() <= 1e-12 * v.sqrt());
            }
        }
    }
}

#[test]
fn single_cube_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lat = Lattice::new(1, 4.0, 64).unwrap();
    for (r, s) in [(1.0, 1.0), (1.5, 2.0), (2.0, 4.0)] {
        for _ in 0..5 {
            let f = random_function(lat, &mut rng);
            let g = random_function(lat, &mut rng);
            let x0: f64 = rng.gen_range(0.5..3.5);
            let w: f64 = rng.gen_range(0.01..0.4);
            let (q, v) = best_single_cube(&f, &g, r, s, x0 - w, x0 + w).unwrap();
            let o = single_cube_oracle(&f, &g, r, s, x0 - w, x0 + w).unwrap();
            assert!((v - o).abs() <= 1e-12 * o, "{v} vs {o}");
            assert!(q.lower(0) <= x0 - w && q.upper(0) >= x0 + w);
        }
    }
}

/// Edmonds-Karp on an adjacency matrix.
fn max_flow(cap: &mut [Vec<i64>], s: usize, t: usize) -> i64 {
    let n = cap.len();
    let mut total = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut push = i64::MAX;
        let mut v = t;
        while v != s {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            cap[prev[v]][v] -= push;
            cap[v][prev[v]] += push;
            v = prev[v];
        }
        total += push;
    }
}

/// Witness sets exist iff every cube can be sent `floor(eta cells) + 1`
/// cells it contains, each cell used once.
fn witness_feasible(family: &CubeFamily, eta: f64) -> bool {
    let cubes = family.cubes();
    let unit = cubes.iter().map(|q| q.scale()).min().unwrap() - 10;
    let span = |q: &DyadicCube| {
        let mul = 1i64 << (q.scale() - unit);
        let lo = q.lower_num(0) as i64 * mul;
        (lo, lo + 3 * mul)
    };
    let mut cuts: Vec<i64> = cubes.iter().flat_map(|q| {
        let (a, b) = span(q);
        [a, b]
    }).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let atoms: Vec<(i64, i64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let (nq, na) = (cubes.len(), atoms.len());
    let (s, t) = (nq + na, nq + na + 1);
    let mut cap = vec![vec![0i64; nq + na + 2]; nq + na + 2];
    let mut demand = 0;
    for (i, q) in cubes.iter().enumerate() {
        let (a, b) = span(q);
        let need = (eta * (b - a) as f64).floor() as i64 + 1;
        cap[s][i] = need;
        demand += need;
        for (k, &(x, y)) in atoms.iter().enumerate() {
            if x >= a && y <= b {
                cap[i][nq + k] = i64::MAX / 4;
            }
        }
    }
    for (k, &(x, y)) in atoms.iter().enumerate() {
        cap[nq + k][t] = y - x;
    }
    max_flow(&mut cap, s, t) == demand
}

fn random_family(rng: &mut ChaCha8Rng) -> CubeFamily {
    let mut cubes = Vec::new();
    for k in -4..=0 {
        for i in 0..(1i64 << -k) {
            if rng.gen_bool(0.35) {
                cubes.push(DyadicCube::standard(k, &[i]));
            }
        }
    }
    if cubes.is_empty() {
        cubes.push(DyadicCube::standard(0, &[0]));
    }
    CubeFamily::from_cubes(cubes).unwrap()
}

fn carleson_brute(family: &CubeFamily) -> f64 {
    family
        .cubes()
        .iter()
        .map(|q| family.cubes().iter().filter(|r| q.contains_cube(r)).map(|r| r.volume()).sum::<f64>() / q.volume())
        .fold(0.0, f64::max)
}

#[test]
fn certification_matches_max_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut seen = [0usize; 2];
    for _ in 0..200 {
        let fam = random_family(&mut rng);
        let eta: f64 = rng.gen_range(0.05..0.95);
        let cert = certify_sparse(&fam, eta).unwrap();
        let feasible = witness_feasible(&fam, eta);
        assert_eq!(cert.is_sparse(), feasible, "eta {eta}, {} cubes", fam.len());
        seen[feasible as usize] += 1;
        if let Some(c) = cert.collection() {
            assert!(c.verify());
        }
    }
    assert!(seen[0] > 10 && seen[1] > 10, "{seen:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn carleson_matches_brute_force(seed in any::<u64>()) {
        let fam = random_family(&mut ChaCha8Rng::seed_from_u64(seed));
        let c = carleson_constant(&fam).unwrap();
        prop_assert!((c - carleson_brute(&fam)).abs() < 1e-12);
    }
}
