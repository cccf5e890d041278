//! Parameter-free dynamic-regret learners for unconstrained online convex
//! optimization with time-varying movement costs.
//!
//! The stack, bottom up:
//!
//! - [`cmd::CmdLearner`]: composite mirror descent for a single learning rate,
//!   updated in closed form.
//! - [`grid::GridLearner`]: one instance per rate on an exponential grid; plays
//!   the sum of their iterates.
//! - [`batched::BatchedLearner`]: freezes the decision and batches gradients
//!   until their sum outweighs the current movement coefficient.
//!   [`batched::LipschitzWrapper`] adds a doubling trick for an unknown
//!   Lipschitz scale.
//! - [`delay::DelayReduction`] and [`memory::MemoryReduction`] turn delayed
//!   feedback and losses with memory into movement costs for any of the above.
//! - [`regret`] keeps the per-round regret ledger and evaluates the bound
//!   formulas on realized sequences.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod batched;
pub mod cmd;
pub mod delay;
pub mod error;
pub mod grid;
pub mod memory;
pub mod regret;
pub mod vector;

pub use error::{Error, Result};
pub use vector::{Feedback, Horizon, RealVector};

/// A learner for online convex optimization with movement costs.
///
/// Each round the caller plays [`decision`](Self::decision), then reports the
/// gradient together with the next round's movement coefficient.
pub trait OnlineLearner {
    fn decision(&self) -> &RealVector;

    fn observe(&mut self, fb: &Feedback) -> Result<()>;

    /// Number of updates the learner has committed to, plus one.
    fn epoch_index(&self) -> usize;

    /// Effective Lipschitz scale the learner is tuned for, if it has one.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

impl<L: OnlineLearner + ?Sized> OnlineLearner for alloc::boxed::Box<L> {
    fn decision(&self) -> &RealVector {
        (**self).decision()
    }

    fn observe(&mut self, fb: &Feedback) -> Result<()> {
        (**self).observe(fb)
    }

    fn epoch_index(&self) -> usize {
        (**self).epoch_index()
    }

    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
}
