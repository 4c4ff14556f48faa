//! Float helpers routed through `num_traits::Float` so the same libm-backed
//! code paths are used in `no_std` and test builds alike.

use num_traits::Float;

#[inline]
pub fn ln(x: f64) -> f64 {
    Float::ln(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    Float::exp(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    Float::powf(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    Float::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    Float::sin(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    Float::abs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    Float::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    Float::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    Float::round(x)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    Float::hypot(x, y)
}

#[inline]
pub fn is_finite(x: f64) -> bool {
    Float::is_finite(x)
}

/// log base `b`.
#[inline]
pub fn logb(x: f64, b: f64) -> f64 {
    ln(x) / ln(b)
}
