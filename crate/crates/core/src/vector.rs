//! Dense real vectors, the per-round feedback pair and the game horizon.

use alloc::vec;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use crate::error::{Error, Result};

/// A dense point in `R^n` with finite entries.
///
/// Decisions, gradients and comparators all live in this type. Cloning gives
/// an independent copy, so learner states can be snapshotted freely.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector {
    entries: Vec<f64>,
}

impl RealVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "vector" });
        }
        Ok(Self { entries })
    }

    /// The origin of `R^dim`.
    ///
    /// # Panics
    ///
    /// Panics if `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self {
            entries: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    fn finite(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "vector arithmetic" });
        }
        Ok(Self { entries })
    }

    /// Euclidean norm, `sqrt(sum v_i^2)`.
    ///
    /// Falls back to a rescaled sum when the squares overflow or underflow.
    pub fn norm(&self) -> f64 {
        let sq = self.norm_squared();
        if sq.is_finite() && (sq > f64::MIN_POSITIVE || self.is_zero()) {
            return libm::sqrt(sq);
        }
        let scale = self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scaled: f64 = self
            .entries
            .iter()
            .map(|v| {
                let x = v / scale;
                x * x
            })
            .sum();
        scale * libm::sqrt(scaled)
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::finite(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::finite(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::finite(self.entries.iter().map(|v| v * s).collect())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_dim(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b;
        }
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "vector arithmetic" });
        }
        Ok(())
    }

    /// `||self - other||` without allocating.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        let sq: f64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(libm::sqrt(sq))
    }
}

impl From<f64> for RealVector {
    /// One-dimensional vector. Non-finite input is a programming error.
    fn from(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite scalar");
        Self { entries: vec![v] }
    }
}

/// What the learner observes after playing `w_t`: the gradient `g_t` and the
/// movement coefficient `lambda_{t+1}` that will apply to its next move.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub gradient: RealVector,
    pub next_lambda: f64,
}

impl Feedback {
    pub fn new(gradient: RealVector, next_lambda: f64) -> Result<Self> {
        if !next_lambda.is_finite() {
            return Err(Error::NonFinite { what: "next_lambda" });
        }
        if next_lambda < 0.0 {
            return Err(Error::InvalidParameter {
                name: "next_lambda",
                reason: "must be nonnegative",
            });
        }
        Ok(Self {
            gradient,
            next_lambda,
        })
    }
}

/// Number of rounds `T >= 1`, fixed before the game starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Horizon(NonZeroUsize);

impl Horizon {
    pub fn new(rounds: usize) -> Result<Self> {
        NonZeroUsize::new(rounds)
            .map(Self)
            .ok_or(Error::InvalidParameter {
                name: "horizon",
                reason: "must be at least one round",
            })
    }

    pub fn get(self) -> usize {
        self.0.get()
    }

    pub fn as_f64(self) -> f64 {
        self.0.get() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> RealVector {
        RealVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn three_four_five() {
        assert_eq!(v(&[3.0, 4.0]).norm(), 5.0);
    }

    #[test]
    fn orthogonal_dot_is_zero() {
        assert_eq!(v(&[1.0, 0.0]).dot(&v(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn componentwise_add() {
        assert_eq!(v(&[1.0, 2.0]).add(&v(&[3.0, 4.0])).unwrap(), v(&[4.0, 6.0]));
    }

    #[test]
    fn mismatched_dims_are_rejected() {
        let err = v(&[1.0]).dot(&v(&[1.0, 2.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
        assert!(v(&[1.0]).add(&v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert!(RealVector::new(vec![f64::NAN]).is_err());
        assert!(RealVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(RealVector::new(vec![]), Err(Error::EmptyVector));
        assert!(v(&[f64::MAX]).scale(10.0).is_err());
    }

    #[test]
    fn norm_survives_extreme_magnitudes() {
        assert_eq!(v(&[3e300, 4e300]).norm(), 5e300);
        assert!((v(&[3e-300, 4e-300]).norm() - 5e-300).abs() < 1e-314);
    }

    #[test]
    fn feedback_rejects_negative_lambda() {
        assert!(Feedback::new(v(&[0.0]), -1e-3).is_err());
        assert!(Feedback::new(v(&[0.0]), 0.0).is_ok());
    }

    #[test]
    fn horizon_is_positive() {
        assert!(Horizon::new(0).is_err());
        assert_eq!(Horizon::new(7).unwrap().get(), 7);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn triangle_inequality((a, b) in vec_pair()) {
            let (a, b) = (v(&a), v(&b));
            let lhs = a.add(&b).unwrap().norm();
            prop_assert!(lhs <= a.norm() + b.norm() + 1e-9);
        }

        #[test]
        fn self_dot_is_norm_squared((a, _) in vec_pair()) {
            let a = v(&a);
            let n = a.norm();
            let d = a.dot(&a).unwrap();
            prop_assert!((d - n * n).abs() <= 1e-12 * d.max(1e-300));
        }
    }
}
