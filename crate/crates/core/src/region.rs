//! Regions with exact rational endpoints: closed intervals on the line and
//! axis boxes in the plane, kept as normalized disjoint unions.
//!
//! Normalization sorts by left endpoint and merges components that overlap or
//! touch. Endpoint sets are null for every measure in scope, so working with
//! closed components everywhere loses nothing and makes merging canonical.

use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::rat::Rat;

/// Closed interval `[lo, hi]`, `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rat,
    pub hi: Rat,
}

impl Interval {
    pub fn new(lo: Rat, hi: Rat) -> Interval {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn length(&self) -> Rat {
        self.hi.sub(&self.lo)
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Closed-overlap test (touching counts).
    pub fn meets(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegionError {
    MalformedComponent,
    TooManyComponents { count: usize, cap: usize },
    EtaOutOfRange,
    BadDim,
}

impl fmt::Display for RegionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionError::MalformedComponent => write!(f, "malformed region component"),
            RegionError::TooManyComponents { count, cap } => {
                write!(f, "region would have {count} components, cap is {cap}")
            }
            RegionError::EtaOutOfRange => write!(f, "eta must satisfy 0 < eta < 1/2"),
            RegionError::BadDim => write!(f, "operation requires a different dimension"),
        }
    }
}

/// Normalized disjoint union of closed intervals, sorted by left endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RegionUnion {
    comps: Vec<Interval>,
}

impl RegionUnion {
    pub fn empty() -> RegionUnion {
        RegionUnion { comps: Vec::new() }
    }

    /// Normalizes an arbitrary collection: sort, then merge overlapping or
    /// touching intervals.
    pub fn from_intervals(mut raw: Vec<Interval>) -> RegionUnion {
        raw.sort_unstable_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut comps: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            if let Some(last) = comps.last_mut() {
                if iv.lo <= last.hi {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                    continue;
                }
            }
            comps.push(iv);
        }
        RegionUnion { comps }
    }

    pub fn single(iv: Interval) -> RegionUnion {
        RegionUnion { comps: alloc::vec![iv] }
    }

    #[inline]
    pub fn components(&self) -> &[Interval] {
        &self.comps
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    /// Exact total length.
    pub fn length(&self) -> BigRational {
        let mut terms: Vec<BigRational> =
            self.comps.iter().map(|c| c.length().to_big()).collect();
        tree_sum(&mut terms)
    }

    pub fn contains(&self, x: &Rat) -> bool {
        // comps sorted by lo; binary search for the last with lo <= x.
        let idx = self.comps.partition_point(|c| c.lo <= *x);
        idx > 0 && self.comps[idx - 1].hi >= *x
    }

    pub fn union(&self, other: &RegionUnion) -> RegionUnion {
        let mut all = self.comps.clone();
        all.extend_from_slice(&other.comps);
        RegionUnion::from_intervals(all)
    }

    pub fn intersect_interval(&self, clip: &Interval) -> RegionUnion {
        let mut out = Vec::new();
        for c in &self.comps {
            if let Some(i) = c.intersect(clip) {
                out.push(i);
            }
        }
        RegionUnion { comps: out }
    }

    /// Whether `other` is covered by `self`, component by component.
    pub fn covers(&self, other: &RegionUnion) -> bool {
        let mut i = 0;
        for c in &other.comps {
            while i < self.comps.len() && self.comps[i].hi < c.lo {
                i += 1;
            }
            match self.comps.get(i) {
                Some(mine) if mine.contains_interval(c) => {}
                _ => return false,
            }
        }
        true
    }
}

/// Axis-parallel box with exact rational corners (any dimension).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalBox {
    pub lo: Vec<Rat>,
    pub hi: Vec<Rat>,
}

impl IntervalBox {
    pub fn unit(dim: usize) -> IntervalBox {
        IntervalBox { lo: alloc::vec![Rat::ZERO; dim], hi: alloc::vec![Rat::ONE; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, j: usize) -> Rat {
        self.hi[j].sub(&self.lo[j])
    }

    pub fn interval(&self, j: usize) -> Interval {
        Interval { lo: self.lo[j], hi: self.hi[j] }
    }

    pub fn contains_point(&self, x: &[Rat]) -> bool {
        (0..self.dim()).all(|j| self.lo[j] <= x[j] && x[j] <= self.hi[j])
    }

    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        (0..self.dim()).all(|j| self.lo[j] <= other.lo[j] && other.hi[j] <= self.hi[j])
    }

    pub fn meets(&self, other: &IntervalBox) -> bool {
        (0..self.dim()).all(|j| self.lo[j] <= other.hi[j] && other.lo[j] <= self.hi[j])
    }

    pub fn intersect(&self, other: &IntervalBox) -> Option<IntervalBox> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let l = self.lo[j].max(other.lo[j]);
            let h = self.hi[j].min(other.hi[j]);
            if l > h {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(IntervalBox { lo, hi })
    }

    pub fn volume(&self) -> BigRational {
        let mut v = BigRational::from_integer(1.into());
        for j in 0..self.dim() {
            v *= self.side(j).to_big();
        }
        v
    }
}

/// Normalized union of pairwise-disjoint axis boxes in the plane.
///
/// Canonical form: vertical slabs. Components are sorted lexicographically by
/// `(x.lo, y.lo)`; within one x-slab the y-intervals are disjoint and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RegionUnion2 {
    comps: Vec<IntervalBox>,
}

impl RegionUnion2 {
    pub fn empty() -> RegionUnion2 {
        RegionUnion2 { comps: Vec::new() }
    }

    #[inline]
    pub fn components(&self) -> &[IntervalBox] {
        &self.comps
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// Decomposes an arbitrary box collection into the canonical disjoint
    /// slab form (sweep over x-endpoints; merged y-unions per slab).
    pub fn from_boxes(raw: &[IntervalBox]) -> RegionUnion2 {
        if raw.is_empty() {
            return RegionUnion2::empty();
        }
        let mut xs: Vec<Rat> = Vec::with_capacity(raw.len() * 2);
        for b in raw {
            assert_eq!(b.dim(), 2);
            xs.push(b.lo[0]);
            xs.push(b.hi[0]);
        }
        xs.sort_unstable();
        xs.dedup();
        let mut comps = Vec::new();
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a == b {
                continue;
            }
            // boxes spanning the open slab (a, b)
            let ys: Vec<Interval> = raw
                .iter()
                .filter(|bx| bx.lo[0] <= a && bx.hi[0] >= b)
                .map(|bx| bx.interval(1))
                .collect();
            if ys.is_empty() {
                continue;
            }
            for y in RegionUnion::from_intervals(ys).components() {
                comps.push(IntervalBox { lo: alloc::vec![a, y.lo], hi: alloc::vec![b, y.hi] });
            }
        }
        // Merge x-adjacent slabs with identical y-intervals to keep the form
        // minimal; harmless for measure, nicer for output.
        comps.sort_unstable_by(|p, q| {
            p.lo[1].cmp(&q.lo[1]).then_with(|| p.hi[1].cmp(&q.hi[1])).then_with(|| p.lo[0].cmp(&q.lo[0]))
        });
        let mut merged: Vec<IntervalBox> = Vec::with_capacity(comps.len());
        for b in comps {
            if let Some(last) = merged.last_mut() {
                if last.lo[1] == b.lo[1] && last.hi[1] == b.hi[1] && last.hi[0] == b.lo[0] {
                    last.hi[0] = b.hi[0];
                    continue;
                }
            }
            merged.push(b);
        }
        merged.sort_unstable_by(|p, q| p.lo[0].cmp(&q.lo[0]).then_with(|| p.lo[1].cmp(&q.lo[1])));
        RegionUnion2 { comps: merged }
    }

    pub fn volume(&self) -> BigRational {
        let mut terms: Vec<BigRational> = self.comps.iter().map(|b| b.volume()).collect();
        tree_sum(&mut terms)
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        self.comps.iter().any(|b| b.contains_point(x))
    }
}

/// Pairwise tree sum; keeps intermediate denominators balanced.
pub fn tree_sum(terms: &mut Vec<BigRational>) -> BigRational {
    if terms.is_empty() {
        return BigRational::zero();
    }
    let mut n = terms.len();
    while n > 1 {
        let half = (n + 1) / 2;
        for i in 0..n / 2 {
            let hi = terms[n - 1 - i].clone();
            terms[i] += hi;
        }
        terms.truncate(half);
        n = half;
    }
    terms.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rat {
        Rat::new(n, d)
    }

    #[test]
    fn merge_touching_and_overlapping() {
        let u = RegionUnion::from_intervals(alloc::vec![
            Interval::new(r(1, 2), r(3, 4)),
            Interval::new(r(0, 1), r(1, 2)),
            Interval::new(r(9, 10), r(1, 1)),
        ]);
        assert_eq!(u.len(), 2);
        assert_eq!(u.components()[0], Interval::new(r(0, 1), r(3, 4)));
        assert_eq!(u.length(), Rat::new(17, 20).to_big());
    }

    #[test]
    fn normalization_idempotent() {
        let u = RegionUnion::from_intervals(alloc::vec![
            Interval::new(r(0, 1), r(1, 3)),
            Interval::new(r(1, 4), r(1, 2)),
            Interval::new(r(2, 3), r(3, 4)),
        ]);
        let again = RegionUnion::from_intervals(u.components().to_vec());
        assert_eq!(u, again);
    }

    #[test]
    fn contains_binary_search() {
        let u = RegionUnion::from_intervals(alloc::vec![
            Interval::new(r(0, 1), r(1, 4)),
            Interval::new(r(1, 2), r(3, 4)),
        ]);
        assert!(u.contains(&r(1, 8)));
        assert!(u.contains(&r(1, 4)));
        assert!(!u.contains(&r(3, 8)));
        assert!(u.contains(&r(1, 2)));
        assert!(!u.contains(&r(7, 8)));
    }

    #[test]
    fn slab_decomposition_volume() {
        // Two overlapping unit/2 squares: volume = 2*(1/4) - (1/16).
        let b1 = IntervalBox { lo: alloc::vec![r(0, 1), r(0, 1)], hi: alloc::vec![r(1, 2), r(1, 2)] };
        let b2 =
            IntervalBox { lo: alloc::vec![r(1, 4), r(1, 4)], hi: alloc::vec![r(3, 4), r(3, 4)] };
        let u = RegionUnion2::from_boxes(&[b1, b2]);
        assert_eq!(u.volume(), Rat::new(7, 16).to_big());
        // disjointness of canonical components
        for (i, a) in u.components().iter().enumerate() {
            for b in &u.components()[i + 1..] {
                let meet = a.intersect(b);
                if let Some(m) = meet {
                    assert!(m.volume().is_zero());
                }
            }
        }
    }
}
