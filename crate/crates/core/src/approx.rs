//! Exact construction of approximation sets: the neighborhoods `A_Q(eta, theta)`
//! and `A(q, eta, theta)` of shifted rationals `(p + theta)/q`, the rectangle
//! families `R(q, eta)`, and pruned enumeration of shifted rationals near `K`.
//!
//! All components are closed; endpoint sets are null for every measure in
//! scope, so nothing is lost and merging stays canonical.

use alloc::vec::Vec;

use num_integer::Integer;

use crate::digits::DigitSystem;
use crate::rat::Rat;
use crate::region::{Interval, IntervalBox, RegionError, RegionUnion, RegionUnion2};

/// A shifted rational `(p + theta)/q`. Not reduced: the family indexes all
/// integer vectors `p`, so `gcd(p, q) > 1` is allowed and meaningful.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftedRational {
    pub p: Vec<i128>,
    pub q: u64,
    pub theta: Vec<Rat>,
}

impl ShiftedRational {
    pub fn value(&self) -> Vec<Rat> {
        self.p
            .iter()
            .zip(&self.theta)
            .map(|(&p, th)| Rat::from_int(p).add(th).div(&Rat::from_int(self.q as i128)))
            .collect()
    }
}

/// Intervals `[(p+theta)/q - eta/q, (p+theta)/q + eta/q]` meeting `clip`,
/// clipped, with their `p`, in ascending order of `p`.
pub fn family_intervals_with_p(
    q: u64,
    eta: &Rat,
    theta: &Rat,
    clip: &Interval,
) -> Vec<(i128, Interval)> {
    let qr = Rat::from_int(q as i128);
    let h = eta.div(&qr);
    // (p+theta)/q + h >= clip.lo  and  (p+theta)/q - h <= clip.hi
    let p_lo = clip.lo.sub(&h).mul(&qr).sub(theta).ceil();
    let p_hi = clip.hi.add(&h).mul(&qr).sub(theta).floor();
    let mut out = Vec::new();
    for p in p_lo..=p_hi {
        let c = Rat::from_int(p).add(theta).div(&qr);
        let lo = c.sub(&h).max(clip.lo);
        let hi = c.add(&h).min(clip.hi);
        if lo <= hi {
            out.push((p, Interval::new(lo, hi)));
        }
    }
    out
}

/// As [`family_intervals_with_p`], intervals only.
pub fn family_intervals(q: u64, eta: &Rat, theta: &Rat, clip: &Interval) -> Vec<Interval> {
    family_intervals_with_p(q, eta, theta, clip).into_iter().map(|(_, iv)| iv).collect()
}

fn check_eta(eta: &Rat) -> Result<(), RegionError> {
    if eta.is_zero() || eta.is_negative() || *eta >= Rat::new(1, 2) {
        return Err(RegionError::EtaOutOfRange);
    }
    Ok(())
}

/// `A(q, eta, theta)` clipped: `{x : ||q x - theta|| < eta}` as a normalized
/// union (built with closed components).
pub fn build_aq_single(
    q: u64,
    eta: &Rat,
    theta: &Rat,
    clip: &Interval,
) -> Result<RegionUnion, RegionError> {
    check_eta(eta)?;
    Ok(RegionUnion::from_intervals(family_intervals(q, eta, theta, clip)))
}

/// `A_Q(eta, theta)` clipped: union over `Q <= q < 2Q` of `A(q, eta, theta)`.
pub fn build_aq(
    big_q: u64,
    eta: &Rat,
    theta: &Rat,
    clip: &Interval,
) -> Result<RegionUnion, RegionError> {
    check_eta(eta)?;
    let mut all = Vec::new();
    for q in big_q..2 * big_q {
        all.extend(family_intervals(q, eta, theta, clip));
    }
    Ok(RegionUnion::from_intervals(all))
}

/// Homogeneous coprime variant `E_Q(eta, 0)`: `0 < q < 2Q`, `gcd(p, q) = 1`.
pub fn build_eq_coprime(big_q: u64, eta: &Rat, clip: &Interval) -> Result<RegionUnion, RegionError> {
    check_eta(eta)?;
    let mut all = Vec::new();
    for q in 1..2 * big_q {
        for (p, iv) in family_intervals_with_p(q, eta, &Rat::ZERO, clip) {
            if p.gcd(&(q as i128)) == 1 {
                all.push(iv);
            }
        }
    }
    Ok(RegionUnion::from_intervals(all))
}

pub const RECT_COMPONENT_CAP: usize = 10_000_000;

/// `R(q, eta)` for `d = 2`: `{x in [0,1]^2 : ||q x_j|| <= eta_j}`, clipped to
/// `clip`, as a disjoint box union (grid of `(q+1)^2` boxes before clipping).
pub fn build_rect(
    q: u64,
    eta: &[Rat; 2],
    clip: &IntervalBox,
) -> Result<RegionUnion2, RegionError> {
    check_eta(&eta[0])?;
    check_eta(&eta[1])?;
    let xs = RegionUnion::from_intervals(family_intervals(q, &eta[0], &Rat::ZERO, &clip.interval(0)));
    let ys = RegionUnion::from_intervals(family_intervals(q, &eta[1], &Rat::ZERO, &clip.interval(1)));
    let count = xs.len().checked_mul(ys.len()).unwrap_or(usize::MAX);
    if count > RECT_COMPONENT_CAP {
        return Err(RegionError::TooManyComponents { count, cap: RECT_COMPONENT_CAP });
    }
    let mut boxes = Vec::with_capacity(count);
    for ix in xs.components() {
        for iy in ys.components() {
            boxes.push(IntervalBox {
                lo: alloc::vec![ix.lo, iy.lo],
                hi: alloc::vec![ix.hi, iy.hi],
            });
        }
    }
    // products of disjoint sorted families are already disjoint and sorted
    Ok(RegionUnion2::from_boxes(&boxes))
}

/// Whether the open interval `(lo, hi)` meets the one-dimensional `K`.
///
/// Exact and terminating: descend cylinder boxes overlapping the interval;
/// any cylinder box fully inside the open interval certifies a hit, and
/// at depth `ceil(log_b(2/(hi-lo))) + 2` every live path has resolved.
pub fn open_interval_meets_k(sys: &DigitSystem, lo: &Rat, hi: &Rat) -> bool {
    debug_assert_eq!(sys.dim(), 1);
    if lo >= hi {
        return false;
    }
    fn rec(sys: &DigitSystem, left: Rat, n: u32, lo: &Rat, hi: &Rat, fuel: u32) -> bool {
        let side = sys.scale(n);
        let right = left.add(&side);
        if *lo < left && right < *hi {
            return true; // whole cylinder box inside the open interval
        }
        if right <= *lo || *hi <= left {
            return false;
        }
        if fuel == 0 {
            // overlap did not resolve: zero-length or boundary-only contact
            return false;
        }
        let child = sys.scale(n + 1);
        for &d in sys.digits(0) {
            let cl = left.add(&Rat::from_int(d as i128).mul(&child));
            if rec(sys, cl, n + 1, lo, hi, fuel - 1) {
                return true;
            }
        }
        false
    }
    // fuel: enough depth for the interval width plus slack
    let width = hi.sub(lo);
    let mut fuel = 2u32;
    let mut s = Rat::ONE;
    let b = Rat::from_int(sys.base() as i128);
    while s > width && fuel < 100 {
        s = s.div(&b);
        fuel += 1;
    }
    rec(sys, Rat::ZERO, 0, lo, hi, fuel)
}

/// Exactly the shifted rationals `(p, q)` with `q` in `q_range` and
/// `dist((p + theta)/q, K) < radius` (sup-norm, strict).
///
/// Pruned by exact interval-meets-`K` tests per coordinate; output equals the
/// brute-force enumeration.
pub fn enumerate_rationals_near_set(
    sys: &DigitSystem,
    q_range: core::ops::RangeInclusive<u64>,
    radius: &Rat,
    theta: &[Rat],
) -> Vec<ShiftedRational> {
    assert!(!radius.is_negative() && !radius.is_zero(), "radius must be positive");
    assert_eq!(theta.len(), sys.dim());
    let mut out = Vec::new();
    for q in q_range {
        let qr = Rat::from_int(q as i128);
        // admissible p per coordinate
        let mut coord_ps: Vec<Vec<i128>> = Vec::with_capacity(sys.dim());
        for j in 0..sys.dim() {
            let f = sys.factor(j);
            let p_lo = Rat::ZERO.sub(radius).mul(&qr).sub(&theta[j]).ceil();
            let p_hi = Rat::ONE.add(radius).mul(&qr).sub(&theta[j]).floor();
            let mut ps = Vec::new();
            for p in p_lo..=p_hi {
                let x = Rat::from_int(p).add(&theta[j]).div(&qr);
                if open_interval_meets_k(&f, &x.sub(radius), &x.add(radius)) {
                    ps.push(p);
                }
            }
            coord_ps.push(ps);
        }
        // cartesian product across coordinates (odometer)
        if coord_ps.iter().any(|v| v.is_empty()) {
            continue;
        }
        let mut idx = alloc::vec![0usize; sys.dim()];
        'odo: loop {
            let p: Vec<i128> = idx.iter().zip(&coord_ps).map(|(&i, v)| v[i]).collect();
            out.push(ShiftedRational { p, q, theta: theta.to_vec() });
            for j in (0..sys.dim()).rev() {
                idx[j] += 1;
                if idx[j] < coord_ps[j].len() {
                    continue 'odo;
                }
                idx[j] = 0;
            }
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(Rat::ZERO, Rat::ONE)
    }

    #[test]
    fn q1_neighborhood() {
        // A(1, 1/4, 0) in [0,1] = [0, 1/4] u [3/4, 1]
        let u = build_aq_single(1, &Rat::new(1, 4), &Rat::ZERO, &unit()).unwrap();
        assert_eq!(u.components().len(), 2);
        assert_eq!(u.components()[0], Interval::new(Rat::ZERO, Rat::new(1, 4)));
        assert_eq!(u.components()[1], Interval::new(Rat::new(3, 4), Rat::ONE));
    }

    #[test]
    fn aq_q1_clip() {
        // A_1(1/10, 0) = [0, 1/10] u [9/10, 1]
        let u = build_aq(1, &Rat::new(1, 10), &Rat::ZERO, &unit()).unwrap();
        assert_eq!(u.components().len(), 2);
        assert_eq!(u.components()[0].hi, Rat::new(1, 10));
        assert_eq!(u.components()[1].lo, Rat::new(9, 10));
    }

    #[test]
    fn aq_q2_exact_union() {
        // q in {2,3}, eta = 1/10: per-q mass 1/5 each, overlaps of 1/30 at 0 and 1.
        let u = build_aq(2, &Rat::new(1, 10), &Rat::ZERO, &unit()).unwrap();
        assert_eq!(u.length(), Rat::new(1, 3).to_big());
    }

    #[test]
    fn shifted_family_avoids_integers() {
        // theta = 1/2: centers at (p + 1/2)/q only, so 0 is not in A_Q
        let u = build_aq(2, &Rat::new(1, 100), &Rat::new(1, 2), &unit()).unwrap();
        assert!(!u.contains(&Rat::ZERO));
        assert!(u.contains(&Rat::new(1, 4)));
    }

    #[test]
    fn single_family_length_identity() {
        // length(A(q, eta, 0) cap [0,1]) = 2*eta for every q >= 1
        for q in [1u64, 2, 3, 7, 50] {
            for eta in [Rat::new(1, 4), Rat::new(1, 10), Rat::new(3, 1000)] {
                let u = build_aq_single(q, &eta, &Rat::ZERO, &unit()).unwrap();
                assert_eq!(u.length(), eta.mul(&Rat::from_int(2)).to_big(), "q={q}");
            }
        }
    }

    #[test]
    fn eta_range_enforced() {
        assert!(build_aq(4, &Rat::new(1, 2), &Rat::ZERO, &unit()).is_err());
        assert!(build_aq(4, &Rat::ZERO, &Rat::ZERO, &unit()).is_err());
    }

    #[test]
    fn rect_volume_identity() {
        // volume(R(q, eta)) = prod_j min(1, 2 eta_j) by periodicity
        let clip = IntervalBox::unit(2);
        for q in [1u64, 2, 5, 9] {
            let eta = [Rat::new(1, 8), Rat::new(1, 5)];
            let u = build_rect(q, &eta, &clip).unwrap();
            let expect = Rat::new(2, 8).mul(&Rat::new(2, 5)).to_big();
            assert_eq!(u.volume(), expect, "q={q}");
        }
    }

    #[test]
    fn rect_q1_corner_volume() {
        let clip = IntervalBox::unit(2);
        let u = build_rect(1, &[Rat::new(1, 4), Rat::new(1, 4)], &clip).unwrap();
        assert_eq!(u.volume(), Rat::new(1, 4).to_big());
    }

    #[test]
    fn open_meet_tests() {
        let sys = DigitSystem::new_1d(3, &[0, 2]).unwrap();
        assert!(open_interval_meets_k(&sys, &Rat::new(1, 5), &Rat::new(2, 5)));
        // entirely inside the first deleted gap
        assert!(!open_interval_meets_k(&sys, &Rat::new(10, 27), &Rat::new(11, 27)));
    }

    #[test]
    fn enumeration_excludes_far_rationals() {
        // (3, {0,2}): 1/2 is at distance 1/6 from K, so radius 1/100 excludes it
        let sys = DigitSystem::new_1d(3, &[0, 2]).unwrap();
        let got = enumerate_rationals_near_set(&sys, 2..=2, &Rat::new(1, 100), &[Rat::ZERO]);
        let ps: Vec<i128> = got.iter().map(|s| s.p[0]).collect();
        assert_eq!(ps, alloc::vec![0, 2]); // 0/2 and 2/2, but not 1/2
    }

    #[test]
    fn full_set_enumeration_is_everything() {
        let sys = DigitSystem::full(4, 1);
        let r = Rat::new(1, 50);
        let got = enumerate_rationals_near_set(&sys, 3..=3, &r, &[Rat::ZERO]);
        // all p with (p)/3 in [-1/50, 1 + 1/50]: p = 0..3
        assert_eq!(got.len(), 4);
    }
}
