//! Exact bounds on the sup-norm distance from a rational point to `K(b, D)`.
//!
//! Used to prune the enumeration of shifted rationals near the set. The lower
//! bound comes from branch-and-bound over cylinder boxes; the upper bound from
//! explicit members of `K` (a digit word followed by a constant digit tail is
//! the rational `word + d/(b-1) * b^-n` and always lies in `K`).

use alloc::vec::Vec;

use crate::digits::DigitSystem;
use crate::rat::{pow_i128, Rat};

/// Exact membership test for rational `x` in the one-dimensional `K(b, D)`.
///
/// Walks the digit expansion with cycle detection on the remainder; boundary
/// points are handled by trying both expansions. Returns `None` when the
/// remainder cycle is longer than `state_cap` (undecided at this cost).
pub fn is_member_1d(sys: &DigitSystem, x: &Rat, state_cap: usize) -> Option<bool> {
    debug_assert_eq!(sys.dim(), 1);
    if x.is_negative() || *x > Rat::ONE {
        return Some(false);
    }
    if x.is_zero() {
        return Some(sys.digits(0).contains(&0));
    }
    if *x == Rat::ONE {
        return Some(sys.digits(0).contains(&((sys.base() - 1) as u8)));
    }
    // Expansion A: greedy digits. Expansion B exists when x is b-adic:
    // (w)(d)000... vs (w)(d-1)(b-1)(b-1)...; handle it via the b-adic case.
    let b = sys.base() as i128;
    let digits = sys.digits(0);
    let mut num = x.num();
    let den = x.den();
    let mut seen: Vec<i128> = Vec::new();
    for _ in 0..state_cap {
        let t = num * b;
        let dig = (t / den) as u8;
        let rem = t % den;
        if rem == 0 {
            // b-adic tail: either (dig)000... or (dig-1)(b-1)(b-1)...
            let zero_tail = digits.contains(&dig) && digits.contains(&0);
            let nine_tail = dig >= 1
                && digits.contains(&(dig - 1))
                && digits.contains(&((sys.base() - 1) as u8));
            return Some(zero_tail || nine_tail);
        }
        if !digits.contains(&dig) {
            return Some(false);
        }
        if seen.contains(&rem) {
            // purely periodic from here with all digits allowed
            return Some(true);
        }
        seen.push(rem);
        num = rem;
    }
    None
}

/// Lower and upper bounds on `dist(x, K)`; equal when resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DistBounds {
    pub lower: Rat,
    pub upper: Rat,
}

/// Distance from a rational point to the nearest point of the unit interval
/// boxes of a word: 0 inside.
fn dist_to_interval(x: &Rat, lo: &Rat, hi: &Rat) -> Rat {
    if x < lo {
        lo.sub(x)
    } else if x > hi {
        x.sub(hi)
    } else {
        Rat::ZERO
    }
}

/// Exact distance bounds to the one-dimensional `K(b, D)`, refined to `depth`.
pub fn distance_to_set_1d(sys: &DigitSystem, x: &Rat, depth: u32) -> DistBounds {
    debug_assert_eq!(sys.dim(), 1);
    if let Some(true) = is_member_1d(sys, x, 512) {
        return DistBounds { lower: Rat::ZERO, upper: Rat::ZERO };
    }
    let digits = sys.digits(0);
    let dmin = digits[0] as i128;
    let dmax = *digits.last().unwrap() as i128;
    let b = sys.base() as i128;

    // upper bound from a constant-digit tail appended to a box corner
    let tail_point = |left: Rat, n: u32, d: i128| -> Rat {
        // left + d/(b-1) * b^-n
        let bn = pow_i128(b, n).unwrap();
        left.add(&Rat::new(d, (b - 1) * bn))
    };

    let mut best_upper = {
        // distance to the two extreme members of K
        let lo_pt = tail_point(Rat::ZERO, 0, dmin);
        let hi_pt = tail_point(Rat::ZERO, 0, dmax);
        dist_to_interval(x, &lo_pt, &lo_pt).min(dist_to_interval(x, &hi_pt, &hi_pt))
    };
    // branch and bound over cylinder boxes; pruned boxes still cap the
    // lower bound (their box distance may equal the true distance)
    let mut best_lower: Option<Rat> = None;
    let note_lower = |cand: Rat, best_lower: &mut Option<Rat>| {
        *best_lower = Some(match *best_lower {
            None => cand,
            Some(bl) => bl.min(cand),
        });
    };
    struct Node {
        left: Rat,
        n: u32,
    }
    let mut stack = alloc::vec![Node { left: Rat::ZERO, n: 0 }];
    while let Some(Node { left, n }) = stack.pop() {
        let side = sys.scale(n);
        let right = left.add(&side);
        let d = dist_to_interval(x, &left, &right);
        if d >= best_upper {
            note_lower(d, &mut best_lower);
            continue;
        }
        // tighten the upper bound with explicit members inside this box
        let up_lo = tail_point(left, n, dmin);
        let up_hi = tail_point(left, n, dmax);
        let u = dist_to_interval(x, &up_lo, &up_lo).min(dist_to_interval(x, &up_hi, &up_hi));
        if u < best_upper {
            best_upper = u;
        }
        if n == depth {
            note_lower(d, &mut best_lower);
            continue;
        }
        let child_side = sys.scale(n + 1);
        for &dg in digits {
            let cl = left.add(&Rat::new(dg as i128, 1).mul(&child_side));
            stack.push(Node { left: cl, n: n + 1 });
        }
    }
    let lower = best_lower.unwrap_or(best_upper).min(best_upper);
    DistBounds { lower, upper: best_upper }
}

/// Sup-norm distance bounds to a product system (`dim <= 2`).
pub fn distance_to_set(sys: &DigitSystem, x: &[Rat], depth: u32) -> DistBounds {
    assert_eq!(x.len(), sys.dim());
    let mut lower = Rat::ZERO;
    let mut upper = Rat::ZERO;
    for j in 0..sys.dim() {
        let f = sys.factor(j);
        let b = distance_to_set_1d(&f, &x[j], depth);
        lower = lower.max(b.lower);
        upper = upper.max(b.upper);
    }
    DistBounds { lower, upper }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> DigitSystem {
        DigitSystem::new_1d(3, &[0, 2]).unwrap()
    }

    #[test]
    fn member_one_third() {
        // 1/3 = 0.0222..._3 is in K
        let b = distance_to_set_1d(&cantor(), &Rat::new(1, 3), 8);
        assert_eq!(b.lower, Rat::ZERO);
        assert_eq!(b.upper, Rat::ZERO);
    }

    #[test]
    fn midpoint_distance_exact() {
        // dist(1/2, K) = 1/6, attained at 1/3 and 2/3
        let b = distance_to_set_1d(&cantor(), &Rat::new(1, 2), 8);
        assert_eq!(b.lower, Rat::new(1, 6));
        assert_eq!(b.upper, Rat::new(1, 6));
    }

    #[test]
    fn members_resolve_to_zero() {
        for x in [Rat::ZERO, Rat::ONE, Rat::new(2, 3), Rat::new(1, 4)] {
            // 1/4 = 0.020202..._3 in K
            let b = distance_to_set_1d(&cantor(), &x, 10);
            assert_eq!((b.lower, b.upper), (Rat::ZERO, Rat::ZERO), "x = {x}");
        }
    }

    #[test]
    fn membership_decisions() {
        let sys = cantor();
        assert_eq!(is_member_1d(&sys, &Rat::new(1, 3), 64), Some(true));
        assert_eq!(is_member_1d(&sys, &Rat::new(1, 2), 64), Some(false));
        assert_eq!(is_member_1d(&sys, &Rat::new(1, 4), 64), Some(true));
        assert_eq!(is_member_1d(&sys, &Rat::new(5, 6), 64), Some(false));
    }

    #[test]
    fn product_distance_is_max() {
        let sys = DigitSystem::new_2d(3, &[0, 2], &[0, 1, 2]).unwrap();
        let b = distance_to_set(&sys, &[Rat::new(1, 2), Rat::new(1, 2)], 8);
        assert_eq!(b.lower, Rat::new(1, 6));
        assert_eq!(b.upper, Rat::new(1, 6));
    }
}
