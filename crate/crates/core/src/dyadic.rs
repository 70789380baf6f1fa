//! Shifted dyadic grids, exact cube geometry and sparse certification.
//!
//! A cube of grid `v` at scale `k` with index `m` is the box whose lower
//! corner along axis `i` is `2^k (m_i + (-1)^k v_i / 3)` and whose side is
//! `2^k`. The sign alternation keeps every grid nested, so children of a
//! cube stay in its grid. Coordinates are stored as integer numerators over
//! `3 * 2^-k`; containment and disjointness are decided in exact integer
//! arithmetic.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Grid shift vector `v` in `{0,1,2}^n`, `n` in `{1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridShift {
    dim: u8,
    v: [u8; 2],
}

impl GridShift {
    pub fn new(v: &[u8]) -> Result<Self> {
        if v.is_empty() || v.len() > 2 {
            return Err(Error::Dimension(v.len()));
        }
        if v.iter().any(|&c| c > 2) {
            return Err(Error::Parameter(format!("shift {v:?} outside {{0,1,2}}")));
        }
        let mut arr = [0u8; 2];
        arr[..v.len()].copy_from_slice(v);
        Ok(Self { dim: v.len() as u8, v: arr })
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        Self { dim: dim as u8, v: [0; 2] }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn v(&self) -> &[u8] {
        &self.v[..self.dim()]
    }

    /// All `3^n` shifts in lexicographic order.
    pub fn all(dim: usize) -> Vec<GridShift> {
        match dim {
            1 => (0..3).map(|a| Self { dim: 1, v: [a, 0] }).collect(),
            2 => (0..3)
                .flat_map(|a| (0..3).map(move |b| Self { dim: 2, v: [a, b] }))
                .collect(),
            _ => panic!("dimension must be 1 or 2"),
        }
    }
}

impl fmt::Display for GridShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.v() {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[inline]
fn parity_sign(k: i32) -> i64 {
    if k.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Compare `a * 2^ea` with `b * 2^eb` exactly.
fn cmp_scaled(a: i128, ea: i32, b: i128, eb: i32) -> Ordering {
    let (big, ebig, small, esmall, flip) = if ea >= eb {
        (a, ea, b, eb, false)
    } else {
        (b, eb, a, ea, true)
    };
    let shift = (ebig - esmall) as u32;
    let ord = match shifted(big, shift) {
        Some(v) => v.cmp(&small),
        // |big| * 2^shift exceeds the i128 range, so only its sign matters
        None => {
            if big > 0 {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
    };
    if flip {
        ord.reverse()
    } else {
        ord
    }
}

fn shifted(v: i128, shift: u32) -> Option<i128> {
    if v == 0 {
        return Some(0);
    }
    if shift >= 126 {
        return None;
    }
    let r = v.checked_mul(1i128 << shift)?;
    Some(r)
}

/// Exact `(mantissa, exponent)` with `x = mantissa * 2^exponent`.
fn decode_f64(x: f64) -> (i128, i32) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & 0x000f_ffff_ffff_ffff) as i128;
    let (mant, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1i128 << 52), exp_bits - 1075)
    };
    (sign * mant, exp)
}

/// Exact comparison of a finite float with `num * 2^k / 3`.
fn cmp_f64_third(x: f64, num: i128, k: i32) -> Ordering {
    let (m, e) = decode_f64(x);
    cmp_scaled(3 * m, e, num, k)
}

/// A cube of a shifted dyadic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    shift: GridShift,
    scale: i32,
    index: [i64; 2],
}

impl Ord for DyadicCube {
    /// Largest cubes first, then lexicographic index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .scale
            .cmp(&self.scale)
            .then_with(|| self.index().cmp(other.index()))
            .then_with(|| self.shift.cmp(&other.shift))
    }
}

impl PartialOrd for DyadicCube {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl DyadicCube {
    pub fn new(shift: GridShift, scale: i32, index: &[i64]) -> Result<Self> {
        if index.len() != shift.dim() {
            return Err(Error::Dimension(index.len()));
        }
        let mut arr = [0i64; 2];
        arr[..index.len()].copy_from_slice(index);
        Ok(Self { shift, scale, index: arr })
    }

    /// Cube of the standard grid (v = 0).
    pub fn standard(scale: i32, index: &[i64]) -> Self {
        Self::new(GridShift::zero(index.len()), scale, index).expect("valid standard cube")
    }

    pub fn shift(&self) -> GridShift {
        self.shift
    }
    pub fn scale(&self) -> i32 {
        self.scale
    }
    pub fn index(&self) -> &[i64] {
        &self.index[..self.dim()]
    }
    pub fn dim(&self) -> usize {
        self.shift.dim()
    }

    pub fn side(&self) -> f64 {
        2f64.powi(self.scale)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    /// Numerator of the lower corner along `axis`, in units of `2^k / 3`.
    pub fn lower_num(&self, axis: usize) -> i128 {
        3 * self.index[axis] as i128 + (parity_sign(self.scale) * self.shift.v[axis] as i64) as i128
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower_num(axis) as f64 * self.side() / 3.0
    }

    pub fn upper(&self, axis: usize) -> f64 {
        (self.lower_num(axis) + 3) as f64 * self.side() / 3.0
    }

    pub fn center(&self, axis: usize) -> f64 {
        0.5 * (self.lower(axis) + self.upper(axis))
    }

    /// The `2^n` cubes of scale `k - 1` tiling this cube, lexicographic.
    pub fn children(&self) -> Vec<DyadicCube> {
        let s = parity_sign(self.scale);
        let base: Vec<i64> = (0..self.dim())
            .map(|a| 2 * self.index[a] + s * self.shift.v[a] as i64)
            .collect();
        let mut out = Vec::with_capacity(1 << self.dim());
        match self.dim() {
            1 => {
                for b in 0..2 {
                    out.push(Self { shift: self.shift, scale: self.scale - 1, index: [base[0] + b, 0] });
                }
            }
            _ => {
                for b0 in 0..2 {
                    for b1 in 0..2 {
                        out.push(Self {
                            shift: self.shift,
                            scale: self.scale - 1,
                            index: [base[0] + b0, base[1] + b1],
                        });
                    }
                }
            }
        }
        out
    }

    pub fn parent(&self) -> DyadicCube {
        let s = parity_sign(self.scale + 1);
        let mut idx = [0i64; 2];
        for a in 0..self.dim() {
            idx[a] = (self.index[a] - s * self.shift.v[a] as i64).div_euclid(2);
        }
        Self { shift: self.shift, scale: self.scale + 1, index: idx }
    }

    /// Ancestor at `scale >= self.scale`.
    pub fn ancestor(&self, scale: i32) -> DyadicCube {
        let mut q = *self;
        while q.scale < scale {
            q = q.parent();
        }
        q
    }

    /// Cube of `shift` at `scale` whose half-open box contains `point`.
    pub fn containing(shift: GridShift, scale: i32, point: &[f64]) -> Result<Self> {
        if point.len() != shift.dim() {
            return Err(Error::Dimension(point.len()));
        }
        let side = 2f64.powi(scale);
        let s = parity_sign(scale);
        let mut idx = [0i64; 2];
        for a in 0..shift.dim() {
            let off = s as f64 * shift.v[a] as f64 / 3.0;
            let mut m = (point[a] / side - off).floor() as i64;
            // exact correction of the float guess
            loop {
                let lo = 3 * m as i128 + (s * shift.v[a] as i64) as i128;
                if cmp_f64_third(point[a], lo, scale) == Ordering::Less {
                    m -= 1;
                } else if cmp_f64_third(point[a], lo + 3, scale) != Ordering::Less {
                    m += 1;
                } else {
                    break;
                }
            }
            idx[a] = m;
        }
        Ok(Self { shift, scale, index: idx })
    }

    /// Exact test `lower <= x < upper` on every axis.
    pub fn contains_point(&self, point: &[f64]) -> bool {
        (0..self.dim()).all(|a| {
            let lo = self.lower_num(a);
            cmp_f64_third(point[a], lo, self.scale) != Ordering::Less
                && cmp_f64_third(point[a], lo + 3, self.scale) == Ordering::Less
        })
    }

    /// Exact test that the closed box `[lo, hi]` lies inside the closed cube.
    pub fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        (0..self.dim()).all(|a| {
            let l = self.lower_num(a);
            cmp_f64_third(lo[a], l, self.scale) != Ordering::Less
                && cmp_f64_third(hi[a], l + 3, self.scale) != Ordering::Greater
        })
    }

    /// Exact containment of closed cubes (any shifts).
    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        (0..self.dim()).all(|a| {
            cmp_scaled(self.lower_num(a), self.scale, other.lower_num(a), other.scale) != Ordering::Greater
                && cmp_scaled(other.lower_num(a) + 3, other.scale, self.lower_num(a) + 3, self.scale)
                    != Ordering::Greater
        })
    }

    /// Exact test that the interiors do not meet.
    pub fn is_disjoint(&self, other: &DyadicCube) -> bool {
        (0..self.dim()).any(|a| {
            cmp_scaled(self.lower_num(a) + 3, self.scale, other.lower_num(a), other.scale) != Ordering::Greater
                || cmp_scaled(other.lower_num(a) + 3, other.scale, self.lower_num(a), self.scale)
                    != Ordering::Greater
        })
    }
}

impl fmt::Display for DyadicCube {
    /// `shift k m1 [m2]`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.shift, self.scale)?;
        for m in self.index() {
            write!(f, " {m}")?;
        }
        Ok(())
    }
}

impl FromStr for DyadicCube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::Parse(format!("cube line `{s}`")));
        }
        let v: Vec<u8> = toks[0]
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| Error::Parse(format!("shift `{}`", toks[0]))))
            .collect::<Result<_>>()?;
        let shift = GridShift::new(&v)?;
        let scale: i32 = toks[1].parse().map_err(|_| Error::Parse(format!("scale `{}`", toks[1])))?;
        let idx: Vec<i64> = toks[2..]
            .iter()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("index `{t}`"))))
            .collect::<Result<_>>()?;
        DyadicCube::new(shift, scale, &idx)
    }
}

/// Cube of some shifted grid containing the closed ball `B(center, radius)`
/// with side `< 12 * radius`.
///
/// Among the three grids at a fixed scale the endpoint sets are disjoint and
/// spaced `2^k / 3` apart, so once `2^k >= 3 diam(B)` at most one shift per
/// axis has an endpoint inside `B`. Scales are scanned upward from the first
/// one whose side is at least the diameter, so the returned side is also the
/// smallest available among the shifts.
pub fn one_third_trick_cover(center: &[f64], radius: f64) -> Result<DyadicCube> {
    let dim = center.len();
    if dim != 1 && dim != 2 {
        return Err(Error::Dimension(dim));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Parameter(format!("radius {radius} must be positive")));
    }
    // ball endpoints, rounded outward only when the float sum is inexact
    let outward = |a: f64, b: f64, dir: f64| {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        if err == 0.0 || (err > 0.0) != (dir > 0.0) {
            s
        } else {
            s + dir * (s.abs() * f64::EPSILON + f64::MIN_POSITIVE)
        }
    };
    let lo: Vec<f64> = center.iter().map(|&c| outward(c, -radius, -1.0)).collect();
    let hi: Vec<f64> = center.iter().map(|&c| outward(c, radius, 1.0)).collect();
    let diam = 2.0 * radius;
    let k_start = diam.log2().ceil() as i32;
    let k_guaranteed = (3.0 * diam).log2().ceil() as i32;
    for k in k_start..=k_guaranteed + 2 {
        for shift in GridShift::all(dim) {
            let q = DyadicCube::containing(shift, k, center)?;
            if q.contains_box(&lo, &hi) {
                return Ok(q);
            }
        }
    }
    Err(Error::Numerical("one-third cover not found".into()))
}

/// Finite set of cubes of one grid, sorted largest-first and deduplicated.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeFamily {
    shift: GridShift,
    cubes: Vec<DyadicCube>,
}

impl CubeFamily {
    pub fn new(shift: GridShift, mut cubes: Vec<DyadicCube>) -> Result<Self> {
        if cubes.iter().any(|q| q.shift() != shift) {
            return Err(Error::MixedShift);
        }
        cubes.sort();
        cubes.dedup();
        Ok(Self { shift, cubes })
    }

    pub fn from_cubes(cubes: Vec<DyadicCube>) -> Result<Self> {
        let shift = cubes.first().ok_or(Error::EmptyFamily)?.shift();
        Self::new(shift, cubes)
    }

    pub fn shift(&self) -> GridShift {
        self.shift
    }
    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }
    pub fn len(&self) -> usize {
        self.cubes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.shift.dim()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for q in &self.cubes {
            s.push_str(&q.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let cubes = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(DyadicCube::from_str)
            .collect::<Result<Vec<_>>>()?;
        Self::from_cubes(cubes)
    }

    /// For each cube, the members of the family strictly inside it whose
    /// nearest family ancestor it is.
    fn tree_children(&self) -> Vec<Vec<usize>> {
        let pos: HashMap<DyadicCube, usize> = self.cubes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let top = self.cubes.first().map(|q| q.scale()).unwrap_or(0);
        let mut kids = vec![Vec::new(); self.cubes.len()];
        for (i, q) in self.cubes.iter().enumerate() {
            let mut a = *q;
            while a.scale() < top {
                a = a.parent();
                if let Some(&p) = pos.get(&a) {
                    kids[p].push(i);
                    break;
                }
            }
        }
        kids
    }
}

/// Exact Carleson constant `sup_Q sum_{Q' in F, Q' in Q} |Q'| / |Q|`.
pub fn carleson_constant(family: &CubeFamily) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let set: HashSet<DyadicCube> = family.cubes().iter().copied().collect();
    let top = family.cubes()[0].scale();
    let mut mass: HashMap<DyadicCube, f64> = HashMap::new();
    for q in family.cubes() {
        let vol = q.volume();
        let mut a = *q;
        loop {
            if set.contains(&a) {
                *mass.entry(a).or_insert(0.0) += vol;
            }
            if a.scale() >= top {
                break;
            }
            a = a.parent();
        }
    }
    Ok(family
        .cubes()
        .iter()
        .map(|q| mass[q] / q.volume())
        .fold(0.0, f64::max))
}

/// Axis-aligned box of integer cell indices, half-open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellBox {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
    pub dim: u8,
}

impl CellBox {
    fn measure(&self) -> i128 {
        (0..self.dim as usize)
            .map(|a| (self.hi[a] - self.lo[a]).max(0) as i128)
            .product()
    }

    fn is_empty(&self) -> bool {
        (0..self.dim as usize).any(|a| self.hi[a] <= self.lo[a])
    }

    fn intersect(&self, o: &CellBox) -> CellBox {
        let mut r = *self;
        for a in 0..self.dim as usize {
            r.lo[a] = self.lo[a].max(o.lo[a]);
            r.hi[a] = self.hi[a].min(o.hi[a]);
        }
        r
    }

    fn contains(&self, o: &CellBox) -> bool {
        (0..self.dim as usize).all(|a| self.lo[a] <= o.lo[a] && o.hi[a] <= self.hi[a])
    }

    /// `self \ o` as disjoint boxes.
    fn subtract(&self, o: &CellBox) -> Vec<CellBox> {
        let cut = self.intersect(o);
        if cut.is_empty() {
            return vec![*self];
        }
        let mut out = Vec::new();
        let mut rest = *self;
        for a in 0..self.dim as usize {
            if rest.lo[a] < cut.lo[a] {
                let mut b = rest;
                b.hi[a] = cut.lo[a];
                out.push(b);
                rest.lo[a] = cut.lo[a];
            }
            if cut.hi[a] < rest.hi[a] {
                let mut b = rest;
                b.lo[a] = cut.hi[a];
                out.push(b);
                rest.hi[a] = cut.hi[a];
            }
        }
        out
    }
}

impl fmt::Display for CellBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "{}..{}", self.lo[0], self.hi[0])
        } else {
            write!(f, "{}..{}x{}..{}", self.lo[0], self.hi[0], self.lo[1], self.hi[1])
        }
    }
}

impl FromStr for CellBox {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse_range = |r: &str| -> Result<(i64, i64)> {
            let (a, b) = r.split_once("..").ok_or_else(|| Error::Parse(format!("range `{r}`")))?;
            Ok((
                a.parse().map_err(|_| Error::Parse(format!("range `{r}`")))?,
                b.parse().map_err(|_| Error::Parse(format!("range `{r}`")))?,
            ))
        };
        let parts: Vec<&str> = s.split('x').collect();
        let mut b = CellBox { lo: [0; 2], hi: [0; 2], dim: parts.len() as u8 };
        if parts.len() > 2 {
            return Err(Error::Parse(format!("box `{s}`")));
        }
        for (a, p) in parts.iter().enumerate() {
            let (l, h) = parse_range(p)?;
            b.lo[a] = l;
            b.hi[a] = h;
        }
        Ok(b)
    }
}

/// Union of disjoint cell boxes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellSet {
    boxes: Vec<CellBox>,
}

impl CellSet {
    pub fn from_box(b: CellBox) -> Self {
        Self { boxes: if b.is_empty() { vec![] } else { vec![b] } }
    }

    pub fn boxes(&self) -> &[CellBox] {
        &self.boxes
    }

    pub fn measure(&self) -> i128 {
        self.boxes.iter().map(CellBox::measure).sum()
    }

    pub fn subtract_box(&mut self, o: &CellBox) {
        self.boxes = self.boxes.iter().flat_map(|b| b.subtract(o)).filter(|b| !b.is_empty()).collect();
    }

    pub fn subtract(&mut self, o: &CellSet) {
        for b in &o.boxes {
            self.subtract_box(b);
        }
    }

    pub fn within(&self, b: &CellBox) -> bool {
        self.boxes.iter().all(|x| b.contains(x))
    }

    pub fn is_disjoint(&self, o: &CellSet) -> bool {
        self.boxes
            .iter()
            .all(|a| o.boxes.iter().all(|b| a.intersect(b).is_empty()))
    }

    /// Split off the first `count` cells in row-major order.
    fn take_first(&self, count: i128) -> Option<CellSet> {
        let mut boxes = self.boxes.clone();
        boxes.sort_by_key(|a| a.lo);
        let mut need = count;
        let mut out = Vec::new();
        for b in boxes {
            if need == 0 {
                break;
            }
            let m = b.measure();
            if m <= need {
                out.push(b);
                need -= m;
                continue;
            }
            if b.dim == 1 {
                let mut t = b;
                t.hi[0] = b.lo[0] + need as i64;
                out.push(t);
            } else {
                let row = (b.hi[1] - b.lo[1]) as i128;
                let rows = need / row;
                if rows > 0 {
                    let mut t = b;
                    t.hi[0] = b.lo[0] + rows as i64;
                    out.push(t);
                }
                let rem = need - rows * row;
                if rem > 0 {
                    let mut t = b;
                    t.lo[0] = b.lo[0] + rows as i64;
                    t.hi[0] = t.lo[0] + 1;
                    t.hi[1] = b.lo[1] + rem as i64;
                    out.push(t);
                }
            }
            need = 0;
        }
        (need == 0).then_some(CellSet { boxes: out })
    }
}

/// Cell lattice for witness sets: cells of side `2^unit_exp / 3`, on which
/// every cube of the grid at scale `>= unit_exp` is a box of whole cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellGrid {
    pub dim: usize,
    pub unit_exp: i32,
}

impl CellGrid {
    pub fn cube_box(&self, q: &DyadicCube) -> CellBox {
        debug_assert!(q.scale() >= self.unit_exp);
        let mul = 1i64 << (q.scale() - self.unit_exp);
        let mut b = CellBox { lo: [0; 2], hi: [0; 2], dim: self.dim as u8 };
        for a in 0..self.dim {
            let l = q.lower_num(a) as i64;
            b.lo[a] = l * mul;
            b.hi[a] = (l + 3) * mul;
        }
        b
    }

    pub fn cube_cells(&self, q: &DyadicCube) -> i128 {
        self.cube_box(q).measure()
    }
}

/// Cells per axis of the finest cube are `3 * 2^REFINE`.
fn refinement(dim: usize) -> i32 {
    if dim == 1 {
        10
    } else {
        5
    }
}

/// Family with witness sets `E_Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCollection {
    family: CubeFamily,
    eta: f64,
    witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub grid: CellGrid,
    /// One set per cube, aligned with `family.cubes()`.
    pub sets: Vec<CellSet>,
}

impl SparseCollection {
    /// Collection without explicit witness sets.
    pub fn unwitnessed(family: CubeFamily, eta: f64) -> Self {
        Self { family, eta, witness: None }
    }

    pub fn family(&self) -> &CubeFamily {
        &self.family
    }
    pub fn cubes(&self) -> &[DyadicCube] {
        self.family.cubes()
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn witness(&self) -> Option<&Witness> {
        self.witness.as_ref()
    }

    /// Check the witness invariants: `E_Q` inside `Q`, pairwise disjoint,
    /// `|E_Q| > eta |Q|`.
    pub fn verify(&self) -> bool {
        let Some(w) = &self.witness else { return true };
        if w.sets.len() != self.family.len() {
            return false;
        }
        for (q, e) in self.family.cubes().iter().zip(&w.sets) {
            let b = w.grid.cube_box(q);
            if !e.within(&b) {
                return false;
            }
            if (e.measure() as f64) <= self.eta * b.measure() as f64 {
                return false;
            }
        }
        for i in 0..w.sets.len() {
            for j in i + 1..w.sets.len() {
                let (qi, qj) = (&self.family.cubes()[i], &self.family.cubes()[j]);
                if qi.is_disjoint(qj) {
                    continue;
                }
                if !w.sets[i].is_disjoint(&w.sets[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Certificate text: a header with the cell unit, then `cube -> ranges`.
    pub fn certificate_text(&self) -> String {
        let mut s = format!("# eta {}\n", self.eta);
        match &self.witness {
            Some(w) => {
                s.push_str(&format!("cells 2^{}/3\n", w.grid.unit_exp));
                for (q, e) in self.family.cubes().iter().zip(&w.sets) {
                    s.push_str(&q.to_string());
                    s.push_str(" ->");
                    for b in e.boxes() {
                        s.push(' ');
                        s.push_str(&b.to_string());
                    }
                    s.push('\n');
                }
            }
            None => s.push_str(&self.family.to_text()),
        }
        s
    }

    pub fn from_certificate_text(text: &str) -> Result<Self> {
        let mut eta = None;
        let mut unit = None;
        let mut cubes = Vec::new();
        let mut sets = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("# eta") {
                eta = Some(rest.trim().parse::<f64>().map_err(|_| Error::Parse(line.into()))?);
            } else if let Some(rest) = line.strip_prefix("cells 2^") {
                let e = rest.trim_end_matches("/3");
                unit = Some(e.parse::<i32>().map_err(|_| Error::Parse(line.into()))?);
            } else if let Some((c, r)) = line.split_once("->") {
                cubes.push(c.trim().parse::<DyadicCube>()?);
                let boxes = r.split_whitespace().map(CellBox::from_str).collect::<Result<Vec<_>>>()?;
                sets.push(CellSet { boxes });
            } else {
                cubes.push(line.parse::<DyadicCube>()?);
            }
        }
        let eta = eta.ok_or_else(|| Error::Parse("missing eta".into()))?;
        let family = CubeFamily::from_cubes(cubes.clone())?;
        let witness = match unit {
            Some(unit_exp) => {
                // realign sets with the sorted family order
                let by_cube: HashMap<DyadicCube, CellSet> = cubes.into_iter().zip(sets).collect();
                let sets = family.cubes().iter().map(|q| by_cube[q].clone()).collect();
                Some(Witness { grid: CellGrid { dim: family.dim(), unit_exp }, sets })
            }
            None => None,
        };
        Ok(Self { family, eta, witness })
    }
}

/// Why a family could not be certified.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFailure {
    /// Cube whose witness could not be allocated.
    pub cube: DyadicCube,
    /// That cube followed by the family members inside it that consumed
    /// its cells.
    pub chain: Vec<DyadicCube>,
    pub needed_cells: i128,
    pub available_cells: i128,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certification {
    Sparse(SparseCollection),
    Failed(SparseFailure),
}

impl Certification {
    pub fn is_sparse(&self) -> bool {
        matches!(self, Certification::Sparse(_))
    }
    pub fn collection(self) -> Option<SparseCollection> {
        match self {
            Certification::Sparse(s) => Some(s),
            Certification::Failed(_) => None,
        }
    }
}

/// Build explicit witness sets for `family` at density `eta`.
///
/// First pass: `E_Q = Q` minus the family members inside it. When some
/// `E_Q` is too thin, a bottom-up pass hands each cube (smallest first) the
/// first `floor(eta |Q|) + 1` cells not yet claimed inside it; this succeeds
/// whenever `eta <= 0.9 / carleson_constant(family)`.
pub fn certify_sparse(family: &CubeFamily, eta: f64) -> Result<Certification> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Parameter(format!("eta = {eta} must lie in (0, 1)")));
    }
    if family.is_empty() {
        return Ok(Certification::Sparse(SparseCollection { family: family.clone(), eta, witness: None }));
    }
    let dim = family.dim();
    let kmin = family.cubes().iter().map(|q| q.scale()).min().unwrap();
    let grid = CellGrid { dim, unit_exp: kmin - refinement(dim) };
    let cubes = family.cubes();
    let kids = family.tree_children();
    let boxes: Vec<CellBox> = cubes.iter().map(|q| grid.cube_box(q)).collect();

    let greedy_ok = cubes.iter().enumerate().all(|(i, _)| {
        let covered: i128 = kids[i].iter().map(|&c| boxes[c].measure()).sum();
        ((boxes[i].measure() - covered) as f64) > eta * boxes[i].measure() as f64
    });
    if greedy_ok {
        let sets = (0..cubes.len())
            .map(|i| {
                let mut e = CellSet::from_box(boxes[i]);
                for &c in &kids[i] {
                    e.subtract_box(&boxes[c]);
                }
                e
            })
            .collect();
        return Ok(Certification::Sparse(SparseCollection {
            family: family.clone(),
            eta,
            witness: Some(Witness { grid, sets }),
        }));
    }

    // bottom-up allocation, smallest cubes first
    let mut order: Vec<usize> = (0..cubes.len()).collect();
    order.sort_by(|&a, &b| cubes[a].scale().cmp(&cubes[b].scale()).then(cubes[a].index().cmp(cubes[b].index())));
    let mut sets: Vec<Option<CellSet>> = vec![None; cubes.len()];
    for &i in &order {
        let mut avail = CellSet::from_box(boxes[i]);
        let mut stack = kids[i].clone();
        let mut chain = vec![cubes[i]];
        while let Some(c) = stack.pop() {
            if let Some(e) = &sets[c] {
                avail.subtract(e);
            }
            chain.push(cubes[c]);
            stack.extend(kids[c].iter().copied());
        }
        let total = boxes[i].measure();
        let need = (eta * total as f64).floor() as i128 + 1;
        match avail.take_first(need) {
            Some(e) => sets[i] = Some(e),
            None => {
                return Ok(Certification::Failed(SparseFailure {
                    cube: cubes[i],
                    chain,
                    needed_cells: need,
                    available_cells: avail.measure(),
                }))
            }
        }
    }
    Ok(Certification::Sparse(SparseCollection {
        family: family.clone(),
        eta,
        witness: Some(Witness { grid, sets: sets.into_iter().map(Option::unwrap).collect() }),
    }))
}

/// All cubes of `shift` at `scale` meeting the box `[lo, hi)` in their
/// interiors.
pub fn cubes_meeting(shift: GridShift, scale: i32, lo: &[f64], hi: &[f64]) -> Result<Vec<DyadicCube>> {
    let dim = shift.dim();
    let first = DyadicCube::containing(shift, scale, lo)?;
    let side = 2f64.powi(scale);
    let counts: Vec<i64> = (0..dim)
        .map(|a| (((hi[a] - first.lower(a)) / side).ceil() as i64).max(1))
        .collect();
    let mut out = Vec::new();
    match dim {
        1 => {
            for i in 0..counts[0] {
                out.push(DyadicCube::new(shift, scale, &[first.index()[0] + i])?);
            }
        }
        _ => {
            for i in 0..counts[0] {
                for j in 0..counts[1] {
                    out.push(DyadicCube::new(shift, scale, &[first.index()[0] + i, first.index()[1] + j])?);
                }
            }
        }
    }
    out.retain(|q| (0..dim).all(|a| q.lower(a) < hi[a] && q.upper(a) > lo[a]));
    Ok(out)
}
