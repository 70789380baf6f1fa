//! Exponent pairs and the open trapezoid of admissible `(1/r, 1/s')`.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Pair `(r, s')` with `r, s' >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentPair {
    pub r: f64,
    pub s_prime: f64,
}

impl ExponentPair {
    pub fn new(r: f64, s_prime: f64) -> Result<Self> {
        if !(r >= 1.0) {
            return Err(Error::Exponent(r));
        }
        if !(s_prime >= 1.0) {
            return Err(Error::Exponent(s_prime));
        }
        Ok(Self { r, s_prime })
    }

    /// From coordinates `(1/r, 1/s')`.
    pub fn from_point(x: f64, y: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::Parameter(format!("point ({x}, {y}) outside the unit square")));
        }
        Self::new(1.0 / x, 1.0 / y)
    }

    pub fn point(&self) -> (f64, f64) {
        (1.0 / self.r, 1.0 / self.s_prime)
    }

    /// `s`, the dual of `s'`.
    pub fn s(&self) -> f64 {
        crate::pdo::dual(self.s_prime)
    }

    pub fn swapped(&self) -> ExponentPair {
        ExponentPair { r: self.s_prime, s_prime: self.r }
    }
}

/// The trapezoid for `(m, rho, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub m: f64,
    pub rho: f64,
    pub n: usize,
    /// `true` when `m <= -n(1-rho)/2`.
    pub large_order: bool,
    pub vertices: [(f64, f64); 4],
}

fn check_params(m: f64, rho: f64, n: usize) -> Result<()> {
    if !(m < 0.0) {
        return Err(Error::NonNegativeOrder(m));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Parameter(format!("rho = {rho} must lie in [0, 1)")));
    }
    if n == 0 {
        return Err(Error::Dimension(n));
    }
    Ok(())
}

/// Vertices `v1..v4`. For `m <= -n(1-rho)/2`:
/// `(1,0), (1,mu), (mu,1), (0,1)`; otherwise
/// `(1/2+mu, 1/2-mu), (1/2+mu, 1/2), (1/2, 1/2+mu), (1/2-mu, 1/2+mu)`,
/// with `mu = -m / (n(1-rho))` (capped at 1 in the first case).
pub fn region_vertices(m: f64, rho: f64, n: usize) -> Result<Region> {
    check_params(m, rho, n)?;
    let w = n as f64 * (1.0 - rho);
    let mu = -m / w;
    let large = m <= -w / 2.0;
    let vertices = if large {
        let mu = mu.min(1.0);
        [(1.0, 0.0), (1.0, mu), (mu, 1.0), (0.0, 1.0)]
    } else {
        [(0.5 + mu, 0.5 - mu), (0.5 + mu, 0.5), (0.5, 0.5 + mu), (0.5 - mu, 0.5 + mu)]
    };
    Ok(Region { m, rho, n, large_order: large, vertices })
}

/// Strict constraint systems at `(x, y) = (1/r, 1/s')` for order `m` and
/// width `w = n(1-rho)`, including the dual (swapped) systems.
fn systems(x: f64, y: f64, m: f64, w: f64) -> bool {
    let one = |x: f64, y: f64| {
        // r <= s <= 2
        let a = y <= 0.5 && x + y >= 1.0 && m < -w * (x - 0.5);
        // r <= 2 <= s <= r'
        let b = x >= 0.5 && y >= 0.5 && y <= x && m < -w * (x + y - 1.0);
        a || b
    };
    (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) && (one(x, y) || one(y, x))
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

impl Region {
    fn width(&self) -> f64 {
        self.n as f64 * (1.0 - self.rho)
    }

    /// Edges excluded from the region (strict constraints).
    pub fn open_edges(&self) -> Vec<((f64, f64), (f64, f64))> {
        let v = self.vertices;
        if self.large_order {
            let mut e = vec![(v[1], v[2])];
            if self.m == -self.width() / 2.0 {
                e.push((v[0], v[1]));
                e.push((v[2], v[3]));
            }
            e
        } else {
            vec![(v[0], v[1]), (v[1], v[2]), (v[2], v[3])]
        }
    }

    /// Euclidean distance from `pt` to the closed trapezoid.
    pub fn exterior_distance(&self, pt: &ExponentPair) -> f64 {
        let p = pt.point();
        let v = self.vertices;
        // convex polygon, counter-clockwise or clockwise: same-side test
        let mut sign = 0.0;
        let mut inside = true;
        for i in 0..4 {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            let c = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if c.abs() < 1e-15 {
                continue;
            }
            if sign == 0.0 {
                sign = c.signum();
            } else if c.signum() != sign {
                inside = false;
            }
        }
        if inside {
            return 0.0;
        }
        (0..4).map(|i| seg_dist(p, v[i], v[(i + 1) % 4])).fold(f64::INFINITY, f64::min)
    }
}

/// Whether `pt` satisfies one of the strict constraint systems and lies at
/// least `margin` away from every open edge.
pub fn in_region(pt: &ExponentPair, region: &Region, margin: f64) -> bool {
    let (x, y) = pt.point();
    if !systems(x, y, region.m, region.width()) {
        return false;
    }
    region.open_edges().iter().all(|&(a, b)| seg_dist((x, y), a, b) >= margin)
}

/// Default margin in `(1/r, 1/s')` coordinates.
pub const DEFAULT_MARGIN: f64 = 0.02;

pub type Q = Ratio<i64>;

/// Exact vertices on rational inputs.
pub fn region_vertices_exact(m: Q, rho: Q, n: i64) -> Result<[(Q, Q); 4]> {
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    let half = Q::new(1, 2);
    if m >= zero {
        return Err(Error::NonNegativeOrder(*m.numer() as f64 / *m.denom() as f64));
    }
    if rho < zero || rho >= one || n <= 0 {
        return Err(Error::Parameter("rho must lie in [0, 1) and n >= 1".into()));
    }
    let w = Q::from_integer(n) * (one - rho);
    let mu = -m / w;
    Ok(if m <= -w * half {
        let mu = mu.min(one);
        [(one, zero), (one, mu), (mu, one), (zero, one)]
    } else {
        [(half + mu, half - mu), (half + mu, half), (half, half + mu), (half - mu, half + mu)]
    })
}

/// Exact strict membership for order `m` and width `w` at
/// `(x, y) = (1/r, 1/s')`.
pub fn in_region_exact(x: Q, y: Q, m: Q, w: Q) -> bool {
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    let half = Q::new(1, 2);
    let one_side = |x: Q, y: Q| {
        let a = y <= half && x + y >= one && m < -w * (x - half);
        let b = x >= half && y >= half && y <= x && m < -w * (x + y - one);
        a || b
    };
    x >= zero && x <= one && y >= zero && y <= one && (one_side(x, y) || one_side(y, x))
}

/// `r_e = -n(1-rho)/m` when `-n(1-rho) <= m <= -n(1-rho)/2`, else
/// `s_e = 2n(1-rho) / (n(1-rho) + 2m)` for `-n(1-rho)/2 < m < 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Endpoint {
    R(Q),
    S(Q),
}

pub fn corollary_endpoints(m: Q, rho: Q, n: i64) -> Result<Endpoint> {
    let zero = Q::from_integer(0);
    let w = Q::from_integer(n) * (Q::from_integer(1) - rho);
    if !(m < zero && m >= -w) {
        return Err(Error::Parameter("m must lie in [-n(1-rho), 0)".into()));
    }
    if m <= -w / 2 {
        Ok(Endpoint::R(-w / m))
    } else {
        Ok(Endpoint::S(w * 2 / (w + m * 2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a, b)
    }

    #[test]
    fn first_vertex_list() {
        let r = region_vertices(-0.5, 0.0, 1).unwrap();
        assert_eq!(r.vertices[1], (1.0, 0.5));
        assert_eq!(r.vertices[2], (0.5, 1.0));
        let e = region_vertices_exact(q(-1, 2), q(0, 1), 1).unwrap();
        assert_eq!(e[1], (q(1, 1), q(1, 2)));
        assert_eq!(e[2], (q(1, 2), q(1, 1)));
    }

    #[test]
    fn second_vertex_list() {
        let e = region_vertices_exact(q(-1, 4), q(0, 1), 1).unwrap();
        assert_eq!(e, [(q(3, 4), q(1, 4)), (q(3, 4), q(1, 2)), (q(1, 2), q(3, 4)), (q(1, 4), q(3, 4))]);
        let r = region_vertices(-0.25, 0.0, 1).unwrap();
        assert_eq!(r.vertices, [(0.75, 0.25), (0.75, 0.5), (0.5, 0.75), (0.25, 0.75)]);
    }

    #[test]
    fn degenerate_full_triangle() {
        let e = region_vertices_exact(q(-1, 2), q(1, 2), 1).unwrap();
        assert_eq!(e[1], (q(1, 1), q(1, 1)));
        assert_eq!(e[2], (q(1, 1), q(1, 1)));
    }

    #[test]
    fn membership_examples() {
        let reg = region_vertices(-0.5, 0.0, 1).unwrap();
        assert!(in_region(&ExponentPair::new(5.0 / 3.0, 5.0 / 3.0).unwrap(), &reg, 0.02));
        assert!(!in_region(&ExponentPair::new(4.0 / 3.0, 4.0 / 3.0).unwrap(), &reg, 0.0));
        let reg = region_vertices(-0.25, 0.0, 1).unwrap();
        assert!(!in_region(&ExponentPair::new(1.0, 1.0).unwrap(), &reg, 0.0));
        for m in [-0.01, -0.3, -0.9, -2.0] {
            let reg = region_vertices(m, 0.25, 1).unwrap();
            assert!(in_region(&ExponentPair::new(2.0, 2.0).unwrap(), &reg, 0.0));
        }
        assert!(region_vertices(0.0, 0.0, 1).is_err());
    }

    #[test]
    fn float_and_exact_membership_agree() {
        for mn in 1..8 {
            let m = q(-mn, 8);
            for rn in 0..4 {
                let rho = q(rn, 4);
                let w = (q(1, 1) - rho) * 1;
                let reg = region_vertices(-(mn as f64) / 8.0, rn as f64 / 4.0, 1).unwrap();
                for a in 0..=20 {
                    for b in 0..=20 {
                        let (x, y) = (q(a, 20), q(b, 20));
                        let exact = in_region_exact(x, y, m, w);
                        let pt = ExponentPair::from_point(a as f64 / 20.0, b as f64 / 20.0);
                        if let Ok(pt) = pt {
                            // boundary points may round either way
                            let fl = in_region(&pt, &reg, 0.0);
                            let v = reg.vertices;
                            let d = (0..4).map(|i| seg_dist(pt.point(), v[i], v[(i + 1) % 4])).fold(1.0, f64::min);
                            if d > 1e-12 {
                                assert_eq!(fl, exact, "m={m} rho={rho} ({a},{b})");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn interior_points_have_zero_distance() {
        let reg = region_vertices(-0.25, 0.0, 1).unwrap();
        assert_eq!(reg.exterior_distance(&ExponentPair::new(2.0, 2.0).unwrap()), 0.0);
        let out = ExponentPair::from_point(0.9, 0.3).unwrap();
        assert!((reg.exterior_distance(&out) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn endpoints() {
        assert_eq!(corollary_endpoints(q(-1, 2), q(0, 1), 1).unwrap(), Endpoint::R(q(2, 1)));
        assert_eq!(corollary_endpoints(q(-1, 4), q(0, 1), 1).unwrap(), Endpoint::S(q(4, 1)));
        assert_eq!(corollary_endpoints(q(-1, 1), q(0, 1), 1).unwrap(), Endpoint::R(q(1, 1)));
        assert!(corollary_endpoints(q(-2, 1), q(0, 1), 1).is_err());
    }
}
