//! Exact rational arithmetic on `i128` components.
//!
//! `Rat` is the workhorse for region endpoints, shifts, and measure values at
//! desk scale. Denominators stay well below `2^90` in every code path of this
//! crate (shift denominators are small, dyadic denominators come from `f64`
//! mantissas, and `q` is bounded by the audit ranges), so `i128` components
//! with 256-bit cross-multiplication for comparisons are exact. Anything that
//! needs unbounded growth (long sums of unrelated fractions) goes through
//! `BigRational` instead.

use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;

/// Exact rational number `num/den` with `den > 0` and `gcd(num, den) = 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Rat {
    num: i128,
    den: i128,
}

/// Error for rationals that cannot be represented in `i128` components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RatOverflow;

impl fmt::Display for RatOverflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rational exceeds i128 component range")
    }
}

#[inline]
fn gcd_i128(a: i128, b: i128) -> i128 {
    a.gcd(&b)
}

impl Rat {
    pub const ZERO: Rat = Rat { num: 0, den: 1 };
    pub const ONE: Rat = Rat { num: 1, den: 1 };

    /// Builds `num/den`, reducing to lowest terms. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Rat {
        assert!(den != 0, "zero denominator");
        let (mut n, mut d) = if den < 0 { (-num, -den) } else { (num, den) };
        if n == 0 {
            return Rat::ZERO;
        }
        let g = gcd_i128(n, d);
        n /= g;
        d /= g;
        Rat { num: n, den: d }
    }

    #[inline]
    pub fn from_int(n: i128) -> Rat {
        Rat { num: n, den: 1 }
    }

    #[inline]
    pub fn num(&self) -> i128 {
        self.num
    }

    #[inline]
    pub fn den(&self) -> i128 {
        self.den
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    #[inline]
    pub fn is_negative(&self) -> bool {
        self.num < 0
    }

    pub fn checked_add(&self, other: &Rat) -> Option<Rat> {
        let g = gcd_i128(self.den, other.den);
        let l = (self.den / g).checked_mul(other.den)?;
        let a = self.num.checked_mul(l / self.den)?;
        let b = other.num.checked_mul(l / other.den)?;
        Some(Rat::new(a.checked_add(b)?, l))
    }

    pub fn checked_sub(&self, other: &Rat) -> Option<Rat> {
        self.checked_add(&other.neg())
    }

    pub fn checked_mul(&self, other: &Rat) -> Option<Rat> {
        // Reduce across the diagonal first to keep products small.
        let g1 = gcd_i128(self.num, other.den);
        let g2 = gcd_i128(other.num, self.den);
        let n = (self.num / g1).checked_mul(other.num / g2)?;
        let d = (self.den / g2).checked_mul(other.den / g1)?;
        Some(Rat::new(n, d))
    }

    pub fn checked_div(&self, other: &Rat) -> Option<Rat> {
        if other.num == 0 {
            return None;
        }
        self.checked_mul(&Rat::new(other.den, other.num))
    }

    pub fn add(&self, other: &Rat) -> Rat {
        self.checked_add(other).expect("Rat::add overflow")
    }

    pub fn sub(&self, other: &Rat) -> Rat {
        self.checked_sub(other).expect("Rat::sub overflow")
    }

    pub fn mul(&self, other: &Rat) -> Rat {
        self.checked_mul(other).expect("Rat::mul overflow")
    }

    pub fn div(&self, other: &Rat) -> Rat {
        self.checked_div(other).expect("Rat::div by zero or overflow")
    }

    #[inline]
    pub fn neg(&self) -> Rat {
        Rat { num: -self.num, den: self.den }
    }

    pub fn abs(&self) -> Rat {
        Rat { num: self.num.abs(), den: self.den }
    }

    pub fn recip(&self) -> Rat {
        assert!(self.num != 0, "reciprocal of zero");
        Rat::new(self.den, self.num)
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other { self } else { other }
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other { self } else { other }
    }

    /// Largest integer `<= self`.
    pub fn floor(&self) -> i128 {
        self.num.div_euclid(self.den)
    }

    /// Smallest integer `>= self`.
    pub fn ceil(&self) -> i128 {
        -(-self.num).div_euclid(self.den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact dyadic rational equal to the given finite `f64`.
    ///
    /// Every finite double is `m * 2^e` for integers `m`, `e`; this is the
    /// canonical way this crate turns irrational parameters (e.g. `Q^-tau`)
    /// into exact endpoints: round once in binary64, then stay exact.
    pub fn from_f64_exact(x: f64) -> Result<Rat, RatOverflow> {
        if !crate::fl::is_finite(x) {
            return Err(RatOverflow);
        }
        if x == 0.0 {
            return Ok(Rat::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1i128 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mut m, mut e) = if exp_bits == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1i128 << 52), exp_bits - 1075)
        };
        while m % 2 == 0 {
            m /= 2;
            e += 1;
        }
        if e >= 0 {
            if e > 74 {
                return Err(RatOverflow);
            }
            Ok(Rat { num: sign * (m << e), den: 1 })
        } else {
            if -e > 126 {
                return Err(RatOverflow);
            }
            Ok(Rat { num: sign * m, den: 1i128 << (-e) })
        }
    }

    pub fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    /// Parses `"num/den"` or `"num"` (ASCII, optional leading `-`).
    pub fn parse(s: &str) -> Result<Rat, RatParseError> {
        let s = s.trim();
        let (n_str, d_str) = match s.find('/') {
            Some(i) => (&s[..i], &s[i + 1..]),
            None => (s, "1"),
        };
        let n: i128 = n_str.trim().parse().map_err(|_| RatParseError)?;
        let d: i128 = d_str.trim().parse().map_err(|_| RatParseError)?;
        if d == 0 {
            return Err(RatParseError);
        }
        Ok(Rat::new(n, d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RatParseError;

impl fmt::Display for RatParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected rational as \"num/den\" or integer")
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        cmp_cross(self.num, self.den, other.num, other.den)
    }
}

/// Compares `a/b` with `c/d` for positive `b`, `d` via 256-bit cross products.
pub fn cmp_cross(a: i128, b: i128, c: i128, d: i128) -> Ordering {
    debug_assert!(b > 0 && d > 0);
    let lhs_neg = a < 0;
    let rhs_neg = c < 0;
    match (lhs_neg, rhs_neg) {
        (true, false) => {
            if a == 0 && c == 0 {
                Ordering::Equal
            } else {
                Ordering::Less
            }
        }
        (false, true) => Ordering::Greater,
        _ => {
            let x = wide_mul(a.unsigned_abs(), d.unsigned_abs());
            let y = wide_mul(c.unsigned_abs(), b.unsigned_abs());
            let mag = x.cmp(&y);
            if lhs_neg {
                mag.reverse()
            } else {
                mag
            }
        }
    }
}

/// Full 128x128 -> 256-bit unsigned product as `(hi, lo)`.
#[inline]
fn wide_mul(a: u128, b: u128) -> (u128, u128) {
    const M: u128 = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & M);
    let (b1, b0) = (b >> 64, b & M);
    let ll = a0 * b0;
    let lh = a0 * b1;
    let hl = a1 * b0;
    let hh = a1 * b1;
    let mid = (ll >> 64) + (lh & M) + (hl & M);
    let lo = (mid << 64) | (ll & M);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

/// `base^exp` in `i128`, `None` on overflow.
pub fn pow_i128(base: i128, exp: u32) -> Option<i128> {
    let mut acc: i128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_and_sign() {
        let r = Rat::new(6, -4);
        assert_eq!((r.num(), r.den()), (-3, 2));
        assert_eq!(Rat::new(0, -7), Rat::ZERO);
    }

    #[test]
    fn arithmetic() {
        let a = Rat::new(1, 6);
        let b = Rat::new(1, 10);
        assert_eq!(a.add(&b), Rat::new(4, 15));
        assert_eq!(a.sub(&b), Rat::new(1, 15));
        assert_eq!(a.mul(&b), Rat::new(1, 60));
        assert_eq!(a.div(&b), Rat::new(5, 3));
    }

    #[test]
    fn ordering_large_components() {
        // Cross products exceed i128 here; 256-bit compare must get it right.
        let a = Rat::new((1 << 90) + 1, 1 << 90);
        let b = Rat::new((1 << 91) + 1, 1 << 91);
        assert!(a > b);
        assert!(b < a);
        assert_eq!(a.cmp(&a), Ordering::Equal);
    }

    #[test]
    fn floor_ceil() {
        assert_eq!(Rat::new(-7, 2).floor(), -4);
        assert_eq!(Rat::new(-7, 2).ceil(), -3);
        assert_eq!(Rat::new(7, 2).floor(), 3);
        assert_eq!(Rat::new(7, 2).ceil(), 4);
        assert_eq!(Rat::new(6, 3).floor(), 2);
        assert_eq!(Rat::new(6, 3).ceil(), 2);
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        for &x in &[0.5, 0.1, 1.0 / 3.0, 2.0f64.powi(-20) * 3.0, 123.456] {
            let r = Rat::from_f64_exact(x).unwrap();
            assert_eq!(r.to_f64(), x);
        }
    }

    #[test]
    fn parse_display() {
        assert_eq!(Rat::parse("3/9").unwrap(), Rat::new(1, 3));
        assert_eq!(Rat::parse("-2").unwrap(), Rat::from_int(-2));
        assert!(Rat::parse("1/0").is_err());
    }
}
