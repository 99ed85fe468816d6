//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All engine types are generic over [`Real`], implemented for `f32` and `f64`.
//! Special functions (normal CDF, log-gamma) are evaluated in `f64` and
//! narrowed, so `f32` instantiations trade precision for memory only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used throughout the engine.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits the scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Standard normal CDF. Arguments beyond ±38 are clamped to exactly 0 / 1.
    fn norm_cdf(self) -> Self {
        let z = self.to_f64_lossy();
        if z <= -38.0 {
            return Self::zero();
        }
        if z >= 38.0 {
            return Self::one();
        }
        Self::lit(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
    }

    /// Standard normal density.
    fn norm_pdf(self) -> Self {
        let z = self.to_f64_lossy();
        Self::lit((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Relative tolerance appropriate for the precision of the type.
    fn default_rel_tol() -> Self;
}

impl Real for f64 {
    fn default_rel_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn default_rel_tol() -> Self {
        1e-5
    }
}

/// Sums a slice by recursive halving so results do not depend on how callers
/// chunk the work.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_values() {
        assert!((0.0_f64.norm_cdf() - 0.5).abs() < 1e-15);
        assert!((1.959963984540054_f64.norm_cdf() - 0.975).abs() < 1e-14);
        assert!(((-1.0_f64).norm_cdf() - 0.15865525393145707).abs() < 1e-14);
        assert_eq!((-40.0_f64).norm_cdf(), 0.0);
        assert_eq!(40.0_f64.norm_cdf(), 1.0);
        assert!((1.0_f32.norm_cdf() - 0.841_344_7).abs() < 1e-6);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }
}
