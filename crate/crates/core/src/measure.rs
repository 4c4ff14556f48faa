//! Exact measure of regions under the natural measure of `K(b, D)`.
//!
//! The natural measure gives every depth-`n` cylinder mass `(#D)^-n`, so
//! `mu([0, x])` can be evaluated by walking the base-`b` digits of `x` and
//! counting allowed digits below the current one. The walk terminates exactly
//! when `x` is `b`-adic or falls into a gap; otherwise it stops at `max_depth`
//! with a one-unit bracket. Region measures are sums of prefix differences,
//! with the per-endpoint brackets accumulated into a certified error bound.

use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;

use crate::digits::DigitSystem;
use crate::rat::{pow_i128, Rat};
use crate::region::{tree_sum, Interval, RegionUnion, RegionUnion2};

/// Exact rational measure bracket: the true value lies in
/// `[value - error_bound, value + error_bound]` and `value` is in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureValue {
    pub value: BigRational,
    pub error_bound: BigRational,
}

impl MeasureValue {
    pub fn exact(value: BigRational) -> MeasureValue {
        MeasureValue { value, error_bound: BigRational::from_integer(0.into()) }
    }

    pub fn value_f64(&self) -> f64 {
        big_to_f64(&self.value)
    }

    pub fn error_f64(&self) -> f64 {
        big_to_f64(&self.error_bound)
    }
}

pub fn big_to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasureError {
    DepthTooLarge { max_depth: u32 },
    BadDim,
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::DepthTooLarge { max_depth } => {
                write!(f, "max_depth {max_depth} exceeds exact unit range")
            }
            MeasureError::BadDim => write!(f, "region dimension does not match system"),
        }
    }
}

/// `(#D)^max_depth` must fit in `i128` for exact unit accounting.
pub fn check_depth(sys_branching: u64, max_depth: u32) -> Result<i128, MeasureError> {
    pow_i128(sys_branching as i128, max_depth)
        .ok_or(MeasureError::DepthTooLarge { max_depth })
}

/// Lower/upper bounds on `mu([0, x])` in units of `(#D)^-max_depth`,
/// for a one-dimensional system.
pub fn prefix_units(sys: &DigitSystem, x: &Rat, max_depth: u32) -> (u128, u128) {
    debug_assert_eq!(sys.dim(), 1);
    let total = pow_i128(sys.branching() as i128, max_depth).expect("depth checked") as u128;
    if x.is_zero() || x.is_negative() {
        return (0, 0);
    }
    if *x >= Rat::ONE {
        return (total, total);
    }
    let b = sys.base() as i128;
    let digits = sys.digits(0);
    let nd = digits.len() as u128;
    // x = num/den in (0,1); extract digits by repeated multiply.
    let mut num = x.num();
    let den = x.den();
    let mut lo: u128 = 0;
    let mut sub_units = total; // units of the current cylinder
    for _level in 0..max_depth {
        sub_units /= nd;
        let t = num * b;
        let dig = (t / den) as u8;
        num = t % den;
        let below = digits.iter().filter(|&&d| d < dig).count() as u128;
        lo += below * sub_units;
        if !digits.contains(&dig) {
            // x sits in a deleted gap; [0, x] measure is exact.
            return (lo, lo);
        }
        if num == 0 {
            // b-adic point: boundary of the current cylinder, exact.
            return (lo, lo);
        }
    }
    (lo, lo + 1)
}

/// Measure of a closed interval (clipped to `[0,1]`), in units, as
/// `(lower, upper)` brackets.
pub fn interval_units(sys: &DigitSystem, iv: &Interval, max_depth: u32) -> (u128, u128) {
    let (alo, ahi) = prefix_units(sys, &iv.lo, max_depth);
    let (blo, bhi) = prefix_units(sys, &iv.hi, max_depth);
    (blo.saturating_sub(ahi), bhi.saturating_sub(alo))
}

/// `mu(R)` for a one-dimensional region union, with certified error bound.
///
/// If every endpoint is `b`-adic of depth `<= max_depth`, the error bound is
/// zero. Otherwise each unresolved endpoint contributes one straddling
/// cylinder of mass `(#D)^-max_depth` to the bound.
pub fn measure_of_region(
    sys: &DigitSystem,
    region: &RegionUnion,
    max_depth: u32,
) -> Result<MeasureValue, MeasureError> {
    if sys.dim() != 1 {
        return Err(MeasureError::BadDim);
    }
    check_depth(sys.branching(), max_depth)?;
    let mut lo_sum: u128 = 0;
    let mut hi_sum: u128 = 0;
    for c in region.components() {
        let (l, h) = interval_units(sys, c, max_depth);
        lo_sum += l;
        hi_sum += h;
    }
    Ok(units_to_value(sys.branching(), max_depth, lo_sum, hi_sum))
}

/// `mu(R)` for a two-dimensional product system over a disjoint box union.
pub fn measure_of_region2(
    sys: &DigitSystem,
    region: &RegionUnion2,
    max_depth: u32,
) -> Result<MeasureValue, MeasureError> {
    if sys.dim() != 2 {
        return Err(MeasureError::BadDim);
    }
    let fx = sys.factor(0);
    let fy = sys.factor(1);
    check_depth(fx.branching(), max_depth)?;
    check_depth(fy.branching(), max_depth)?;
    let ux = pow_i128(fx.branching() as i128, max_depth).unwrap();
    let uy = pow_i128(fy.branching() as i128, max_depth).unwrap();
    let unit_x = Rat::new(1, ux).to_big();
    let unit_y = Rat::new(1, uy).to_big();
    let mut lo_terms: Vec<BigRational> = Vec::new();
    let mut hi_terms: Vec<BigRational> = Vec::new();
    for b in region.components() {
        let (xl, xh) = interval_units(&fx, &b.interval(0), max_depth);
        let (yl, yh) = interval_units(&fy, &b.interval(1), max_depth);
        lo_terms.push(u128_big(xl) * &unit_x * u128_big(yl) * &unit_y);
        hi_terms.push(u128_big(xh) * &unit_x * u128_big(yh) * &unit_y);
    }
    let lo = tree_sum(&mut lo_terms);
    let hi = tree_sum(&mut hi_terms);
    let two = BigRational::from_integer(2.into());
    let value = (&lo + &hi) / &two;
    let error_bound = &hi - &lo;
    Ok(MeasureValue { value, error_bound })
}

fn u128_big(x: u128) -> BigRational {
    BigRational::from_integer(num_bigint::BigInt::from(x))
}

pub fn units_to_value(branching: u64, max_depth: u32, lo: u128, hi: u128) -> MeasureValue {
    let unit = Rat::new(1, pow_i128(branching as i128, max_depth).unwrap()).to_big();
    let lo_b = u128_big(lo) * &unit;
    let hi_b = u128_big(hi) * &unit;
    let two = BigRational::from_integer(2.into());
    MeasureValue { value: (&lo_b + &hi_b) / two, error_bound: hi_b - lo_b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::region::Interval;
    use alloc::vec;

    fn cantor() -> DigitSystem {
        DigitSystem::new_1d(3, &[0, 2]).unwrap()
    }

    fn region(parts: &[(i128, i128, i128, i128)]) -> RegionUnion {
        RegionUnion::from_intervals(
            parts
                .iter()
                .map(|&(a, b, c, d)| Interval::new(Rat::new(a, b), Rat::new(c, d)))
                .collect(),
        )
    }

    #[test]
    fn whole_space_is_one() {
        let m = measure_of_region(&cantor(), &region(&[(0, 1, 1, 1)]), 8).unwrap();
        assert_eq!(m.value, Rat::ONE.to_big());
        assert_eq!(m.error_bound, Rat::ZERO.to_big());
    }

    #[test]
    fn depth_one_cylinder_exact() {
        // [0, 1/3] is one of the two depth-1 cylinders.
        let m = measure_of_region(&cantor(), &region(&[(0, 1, 1, 3)]), 4).unwrap();
        assert_eq!(m.value, Rat::new(1, 2).to_big());
        assert_eq!(m.error_bound, Rat::ZERO.to_big());
    }

    #[test]
    fn gap_endpoint_exact() {
        // [1/3, 1/2] lies in the deleted middle gap, so [0,1/2] has mass 1/2.
        let m = measure_of_region(&cantor(), &region(&[(0, 1, 1, 2)]), 4).unwrap();
        assert_eq!(m.value, Rat::new(1, 2).to_big());
        assert_eq!(m.error_bound, Rat::ZERO.to_big());
        // and the gap piece itself has measure zero, exactly
        let m = measure_of_region(&cantor(), &region(&[(1, 3, 1, 2)]), 4).unwrap();
        assert_eq!(m.value, Rat::ZERO.to_big());
        assert_eq!(m.error_bound, Rat::ZERO.to_big());
    }

    #[test]
    fn additivity_on_disjoint_parts() {
        let sys = cantor();
        let whole = region(&[(0, 1, 2, 5), (2, 5, 1, 1)]);
        let a = measure_of_region(&sys, &region(&[(0, 1, 2, 5)]), 20).unwrap();
        let b = measure_of_region(&sys, &region(&[(2, 5, 1, 1)]), 20).unwrap();
        let w = measure_of_region(&sys, &whole, 20).unwrap();
        let diff = (a.value + b.value - &w.value).abs();
        assert!(diff <= a.error_bound + b.error_bound + w.error_bound);
    }

    #[test]
    fn unresolved_endpoint_brackets() {
        // 2/5 is not 3-adic and not in a gap forever; shallow depth must bracket.
        let m = measure_of_region(&cantor(), &region(&[(0, 1, 2, 5)]), 3).unwrap();
        let deep = measure_of_region(&cantor(), &region(&[(0, 1, 2, 5)]), 30).unwrap();
        let diff = (m.value - deep.value).abs();
        assert!(diff <= m.error_bound);
    }

    #[test]
    fn cylinder_consistency() {
        use crate::digits::{cylinder_box, cylinder_mass, CylinderWord};
        let sys = cantor();
        for word in [&[0u8][..], &[2, 0], &[0, 2, 2]] {
            let w = CylinderWord::new_1d(&sys, word).unwrap();
            let b = cylinder_box(&sys, &w);
            let iv = Interval::new(b.lo[0], b.hi[0]);
            let m = measure_of_region(&sys, &RegionUnion::single(iv), 6).unwrap();
            assert_eq!(m.value, cylinder_mass(&sys, w.depth()).to_big());
            assert_eq!(m.error_bound, Rat::ZERO.to_big());
        }
    }

    #[test]
    fn product_measure_2d() {
        let sys = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        // One depth-1 cylinder box [0,1/5]^2: mass (1/4)*(1/5).
        let b = crate::region::IntervalBox {
            lo: vec![Rat::ZERO, Rat::ZERO],
            hi: vec![Rat::new(1, 5), Rat::new(1, 5)],
        };
        let u = RegionUnion2::from_boxes(&[b]);
        let m = measure_of_region2(&sys, &u, 6).unwrap();
        assert_eq!(m.value, Rat::new(1, 20).to_big());
    }
}
