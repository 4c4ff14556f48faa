//! Missing-digits sets `K(b, D)` and their cylinder structure.
//!
//! A system is a base `b >= 3` and one digit set per coordinate (product form
//! for `d = 2`). `K(b, D)` is the set of points in `[0,1]^d` all of whose
//! base-`b` digits lie in `D`; its natural measure puts equal weight on the
//! allowed digits independently at every level, which is the normalized
//! restriction of the `delta`-dimensional Hausdorff measure to `K`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fl;
use crate::rat::{pow_i128, Rat};
use crate::region::IntervalBox;

/// Set/measure computations are supported for `dim <= 2`; deeper recursion
/// would overflow exact `i128` denominators.
pub const MAX_WORD_DEPTH: u32 = 48;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DigitSystemError {
    BaseTooSmall,
    EmptyDigits { coord: usize },
    DigitOutOfRange { coord: usize, digit: u8 },
    DuplicateDigit { coord: usize, digit: u8 },
    BadDim { dim: usize },
}

impl fmt::Display for DigitSystemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DigitSystemError::BaseTooSmall => write!(f, "base must be >= 3"),
            DigitSystemError::EmptyDigits { coord } => {
                write!(f, "coordinate {coord}: digit set is empty")
            }
            DigitSystemError::DigitOutOfRange { coord, digit } => {
                write!(f, "coordinate {coord}: digit {digit} out of range")
            }
            DigitSystemError::DuplicateDigit { coord, digit } => {
                write!(f, "coordinate {coord}: digit {digit} repeated")
            }
            DigitSystemError::BadDim { dim } => write!(f, "unsupported dimension {dim}"),
        }
    }
}

/// Base, dimension, and per-coordinate digit sets defining `K(b, D)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitSystem {
    base: u32,
    digits: Vec<Vec<u8>>,
}

impl DigitSystem {
    /// New system with one ascending digit set per coordinate.
    ///
    /// Full digit sets are allowed; such a system is the Lebesgue reference
    /// system for its dimension (see [`DigitSystem::is_lebesgue_reference`]).
    pub fn new(base: u32, digits: Vec<Vec<u8>>) -> Result<DigitSystem, DigitSystemError> {
        if base < 3 {
            return Err(DigitSystemError::BaseTooSmall);
        }
        if digits.is_empty() {
            return Err(DigitSystemError::BadDim { dim: 0 });
        }
        let mut ds = Vec::with_capacity(digits.len());
        for (coord, set) in digits.into_iter().enumerate() {
            if set.is_empty() {
                return Err(DigitSystemError::EmptyDigits { coord });
            }
            let mut sorted = set;
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(DigitSystemError::DuplicateDigit { coord, digit: w[0] });
                }
            }
            if let Some(&d) = sorted.last() {
                if u32::from(d) >= base {
                    return Err(DigitSystemError::DigitOutOfRange { coord, digit: d });
                }
            }
            ds.push(sorted);
        }
        Ok(DigitSystem { base, digits: ds })
    }

    /// One-dimensional system.
    pub fn new_1d(base: u32, digits: &[u8]) -> Result<DigitSystem, DigitSystemError> {
        DigitSystem::new(base, vec![digits.to_vec()])
    }

    /// Product system `K(b, D1) x K(b, D2)`.
    pub fn new_2d(base: u32, d1: &[u8], d2: &[u8]) -> Result<DigitSystem, DigitSystemError> {
        DigitSystem::new(base, vec![d1.to_vec(), d2.to_vec()])
    }

    /// Full digit set in every coordinate (Lebesgue on `[0,1]^d`).
    pub fn full(base: u32, dim: usize) -> DigitSystem {
        let all: Vec<u8> = (0..base as u8).collect();
        DigitSystem::new(base, vec![all; dim]).expect("full digit system")
    }

    #[inline]
    pub fn base(&self) -> u32 {
        self.base
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.digits.len()
    }

    #[inline]
    pub fn digits(&self, coord: usize) -> &[u8] {
        &self.digits[coord]
    }

    /// Number of allowed digit vectors per level, `#D = prod_j #D_j`.
    pub fn branching(&self) -> u64 {
        self.digits.iter().map(|d| d.len() as u64).product()
    }

    /// True when every coordinate keeps all `b` digits.
    pub fn is_full(&self) -> bool {
        self.digits.iter().all(|d| d.len() == self.base as usize)
    }

    /// A full system represents Lebesgue measure on the unit cube; it is the
    /// sanity reference for every audit in this crate.
    pub fn is_lebesgue_reference(&self) -> bool {
        self.is_full()
    }

    /// Whether coordinate `coord` keeps all digits.
    pub fn coord_is_full(&self, coord: usize) -> bool {
        self.digits[coord].len() == self.base as usize
    }

    /// Hausdorff dimension `delta = sum_j log(#D_j) / log b = log(#D) / log b`.
    ///
    /// Equals `d` exactly when every digit set is full.
    pub fn hausdorff_dim(&self) -> f64 {
        let lb = fl::ln(self.base as f64);
        self.digits.iter().map(|d| fl::ln(d.len() as f64) / lb).sum()
    }

    /// Dimension of a single coordinate factor.
    pub fn coord_dim(&self, coord: usize) -> f64 {
        fl::ln(self.digits[coord].len() as f64) / fl::ln(self.base as f64)
    }

    /// `b^-depth` as an exact rational.
    pub fn scale(&self, depth: u32) -> Rat {
        let d = pow_i128(self.base as i128, depth).expect("depth too large for exact scale");
        Rat::new(1, d)
    }

    /// One-coordinate factor system (for product-form computations).
    pub fn factor(&self, coord: usize) -> DigitSystem {
        DigitSystem { base: self.base, digits: vec![self.digits[coord].clone()] }
    }
}

/// Finite digit word addressing a branch `K_w` of `K` and its `b`-adic box.
///
/// For `d = 2` the word holds one digit string per coordinate, both of the
/// same length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CylinderWord {
    coords: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordError {
    DigitNotInSystem { coord: usize, pos: usize, digit: u8 },
    LengthMismatch,
    TooDeep,
}

impl fmt::Display for WordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordError::DigitNotInSystem { coord, pos, digit } => {
                write!(f, "digit {digit} at position {pos} (coordinate {coord}) not in digit set")
            }
            WordError::LengthMismatch => write!(f, "coordinate digit strings differ in length"),
            WordError::TooDeep => write!(f, "word deeper than {MAX_WORD_DEPTH}"),
        }
    }
}

impl CylinderWord {
    /// Empty word (depth 0, the whole cube).
    pub fn root(dim: usize) -> CylinderWord {
        CylinderWord { coords: vec![Vec::new(); dim] }
    }

    /// Word from per-coordinate digit strings, validated against `sys`.
    pub fn new(sys: &DigitSystem, coords: Vec<Vec<u8>>) -> Result<CylinderWord, WordError> {
        if coords.len() != sys.dim() {
            return Err(WordError::LengthMismatch);
        }
        let depth = coords[0].len();
        if depth > MAX_WORD_DEPTH as usize {
            return Err(WordError::TooDeep);
        }
        for (j, s) in coords.iter().enumerate() {
            if s.len() != depth {
                return Err(WordError::LengthMismatch);
            }
            for (pos, &d) in s.iter().enumerate() {
                if !sys.digits(j).contains(&d) {
                    return Err(WordError::DigitNotInSystem { coord: j, pos, digit: d });
                }
            }
        }
        Ok(CylinderWord { coords })
    }

    /// One-dimensional word.
    pub fn new_1d(sys: &DigitSystem, digits: &[u8]) -> Result<CylinderWord, WordError> {
        CylinderWord::new(sys, vec![digits.to_vec()])
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.coords[0].len() as u32
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coord(&self, j: usize) -> &[u8] {
        &self.coords[j]
    }

    pub fn child(&self, digits: &[u8]) -> CylinderWord {
        let mut c = self.clone();
        for (j, &d) in digits.iter().enumerate() {
            c.coords[j].push(d);
        }
        c
    }

    /// Compact id like `0.213` (d=1) or `0.21|0.03` (d=2), empty word = `.`.
    pub fn id(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::new();
        for (j, cs) in self.coords.iter().enumerate() {
            if j > 0 {
                s.push('|');
            }
            s.push('.');
            for &d in cs {
                let _ = write!(s, "{d}");
            }
        }
        s
    }
}

/// Left endpoint of the word's box in one coordinate: `sum d_i b^-i`.
fn word_left(base: u32, digits: &[u8]) -> Rat {
    let mut num: i128 = 0;
    for &d in digits {
        num = num * base as i128 + d as i128;
    }
    let den = pow_i128(base as i128, digits.len() as u32).expect("depth within range");
    Rat::new(num, den)
}

/// The `b`-adic box of side `b^-|w|` addressed by `w`: exactly the points
/// whose first `|w|` digits are `w`.
pub fn cylinder_box(sys: &DigitSystem, word: &CylinderWord) -> IntervalBox {
    let side = sys.scale(word.depth());
    let mut lo = Vec::with_capacity(word.dim());
    let mut hi = Vec::with_capacity(word.dim());
    for j in 0..word.dim() {
        let l = word_left(sys.base(), word.coord(j));
        hi.push(l.add(&side));
        lo.push(l);
    }
    IntervalBox { lo, hi }
}

/// `mu(box(w) cap K) = (#D)^-|w|` as an exact rational.
pub fn cylinder_mass(sys: &DigitSystem, depth: u32) -> Rat {
    let den = pow_i128(sys.branching() as i128, depth).expect("depth within range");
    Rat::new(1, den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> DigitSystem {
        DigitSystem::new_1d(3, &[0, 2]).unwrap()
    }

    #[test]
    fn dims() {
        assert!((cantor().hausdorff_dim() - 0.6309297535714574).abs() < 1e-15);
        assert_eq!(DigitSystem::full(5, 1).hausdorff_dim(), 1.0);
        let s = DigitSystem::new_1d(5, &[0, 1, 2, 3]).unwrap();
        assert!((s.hausdorff_dim() - 0.8613531161467861).abs() < 1e-15);
        let p = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        assert!((p.hausdorff_dim() - 1.8613531161467861).abs() < 1e-14);
    }

    #[test]
    fn invalid_systems() {
        assert!(DigitSystem::new_1d(2, &[0, 1]).is_err());
        assert!(DigitSystem::new_1d(3, &[]).is_err());
        assert!(DigitSystem::new_1d(3, &[0, 3]).is_err());
        assert!(DigitSystem::new_1d(3, &[1, 1]).is_err());
    }

    #[test]
    fn boxes() {
        let sys = cantor();
        let root = CylinderWord::root(1);
        let b = cylinder_box(&sys, &root);
        assert_eq!(b.lo[0], Rat::ZERO);
        assert_eq!(b.hi[0], Rat::ONE);

        let w = CylinderWord::new_1d(&sys, &[2]).unwrap();
        let b = cylinder_box(&sys, &w);
        assert_eq!(b.lo[0], Rat::new(2, 3));
        assert_eq!(b.hi[0], Rat::ONE);

        let w = CylinderWord::new_1d(&sys, &[0, 2]).unwrap();
        let b = cylinder_box(&sys, &w);
        assert_eq!(b.lo[0], Rat::new(2, 9));
        assert_eq!(b.hi[0], Rat::new(3, 9));

        assert!(CylinderWord::new_1d(&sys, &[1]).is_err());
    }

    #[test]
    fn nesting_iff_prefix() {
        let sys = cantor();
        let w1 = CylinderWord::new_1d(&sys, &[0, 2]).unwrap();
        let w2 = CylinderWord::new_1d(&sys, &[0, 2, 0]).unwrap();
        let w3 = CylinderWord::new_1d(&sys, &[2, 0, 0]).unwrap();
        let b1 = cylinder_box(&sys, &w1);
        let b2 = cylinder_box(&sys, &w2);
        let b3 = cylinder_box(&sys, &w3);
        assert!(b1.contains_box(&b2));
        assert!(!b1.contains_box(&b3));
        assert!(!b2.contains_box(&b1));
    }
}
