//! Adaptive first-order batching.
//!
//! The decision is frozen while gradients accumulate in a buffer `H`. Once
//! `||H|| > lambda_{t+1}` the epoch closes and `(H, lambda_{t+1})` is sent to
//! an inner [`GridLearner`] as a single round of feedback. Rounds where the
//! buffer stays under the movement coefficient cost nothing to the learner.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridLearner, GridParams};
use crate::vector::{Feedback, Horizon, RealVector};
use crate::OnlineLearner;

/// One round's contribution to an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMember {
    pub gradient: RealVector,
    /// `lambda_t`, the coefficient in force when the gradient arrived.
    pub lambda: f64,
    /// `lambda_{t+1}`, delivered alongside the gradient.
    pub next_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub members: Vec<EpochMember>,
    /// Aggregated gradient sent to the inner learner.
    pub g_tilde: RealVector,
    /// Movement coefficient sent with `g_tilde`.
    pub lambda_tilde_next: f64,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchedLearner {
    inner: GridLearner,
    buffer: RealVector,
    epoch_index: usize,
    decision: RealVector,
    open: Vec<EpochMember>,
    log: Vec<EpochRecord>,
    lambda_in_force: f64,
}

impl BatchedLearner {
    pub fn new(lipschitz: f64, epsilon: f64, horizon: Horizon, dim: usize) -> Result<Self> {
        let inner = GridLearner::new(GridParams::new(lipschitz, epsilon, horizon)?, dim)?;
        let decision = inner.predict().clone();
        Ok(Self {
            inner,
            buffer: RealVector::zeros(dim),
            epoch_index: 1,
            decision,
            open: Vec::new(),
            log: Vec::new(),
            lambda_in_force: 0.0,
        })
    }

    pub fn predict(&self) -> &RealVector {
        &self.decision
    }

    pub fn inner(&self) -> &GridLearner {
        &self.inner
    }

    pub fn buffer(&self) -> &RealVector {
        &self.buffer
    }

    /// Index `tau` of the current (open) epoch, starting at 1.
    pub fn epoch_index(&self) -> usize {
        self.epoch_index
    }

    /// Closed epochs, in order.
    pub fn epoch_log(&self) -> &[EpochRecord] {
        &self.log
    }

    /// Members of the epoch currently accumulating.
    pub fn open_members(&self) -> &[EpochMember] {
        &self.open
    }

    /// Accumulates `g_t` and closes the epoch when `||H|| > lambda_{t+1}`.
    /// Returns whether a flush happened.
    pub fn observe(&mut self, fb: &Feedback) -> Result<bool> {
        if fb.gradient.dim() != self.buffer.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.buffer.dim(),
                found: fb.gradient.dim(),
            });
        }
        let mut buffer = self.buffer.clone();
        buffer.add_assign(&fb.gradient)?;
        let member = EpochMember {
            gradient: fb.gradient.clone(),
            lambda: self.lambda_in_force,
            next_lambda: fb.next_lambda,
        };
        let flush = buffer.norm() > fb.next_lambda;
        if flush {
            let aggregated = Feedback::new(buffer.clone(), fb.next_lambda)?;
            self.inner.update(&aggregated)?;
            self.open.push(member);
            self.log.push(EpochRecord {
                members: core::mem::take(&mut self.open),
                g_tilde: buffer,
                lambda_tilde_next: fb.next_lambda,
                closed: true,
            });
            self.decision = self.inner.predict().clone();
            self.buffer = RealVector::zeros(self.buffer.dim());
            self.epoch_index += 1;
        } else {
            self.open.push(member);
            self.buffer = buffer;
        }
        self.lambda_in_force = fb.next_lambda;
        Ok(flush)
    }
}

impl OnlineLearner for BatchedLearner {
    fn decision(&self) -> &RealVector {
        &self.decision
    }

    fn observe(&mut self, fb: &Feedback) -> Result<()> {
        BatchedLearner::observe(self, fb).map(|_| ())
    }

    fn epoch_index(&self) -> usize {
        self.epoch_index
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.inner.params().lipschitz)
    }
}

/// Checks `||g~||^2 + lambda~^2 <= sum (2 ||g_t||^2 + 4 lambda_t ||g_t||)` on
/// every closed epoch. A relative slack of `1e-12` absorbs summation rounding.
pub fn epoch_decomposition_check(log: &[EpochRecord]) -> bool {
    log.iter().all(|rec| {
        let g = rec.g_tilde.norm();
        let lhs = g * g + rec.lambda_tilde_next * rec.lambda_tilde_next;
        let rhs: f64 = rec
            .members
            .iter()
            .map(|m| {
                let n = m.gradient.norm();
                2.0 * n * n + 4.0 * m.lambda * n
            })
            .sum();
        rec.closed && lhs <= rhs * (1.0 + 1e-12)
    })
}

/// Doubling-trick wrapper that grows the Lipschitz guess on demand.
///
/// Whenever `||g_t|| + 2 lambda_{t+1}` exceeds the current guess, the guess is
/// multiplied by the smallest power of two that covers it and the inner
/// learner restarts from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzWrapper {
    current_l: f64,
    initial_guess: f64,
    epsilon: f64,
    horizon: Horizon,
    dim: usize,
    inner: BatchedLearner,
    restart_count: usize,
}

impl LipschitzWrapper {
    pub fn new(initial_guess: f64, epsilon: f64, horizon: Horizon, dim: usize) -> Result<Self> {
        let inner = BatchedLearner::new(initial_guess, epsilon, horizon, dim)?;
        Ok(Self {
            current_l: initial_guess,
            initial_guess,
            epsilon,
            horizon,
            dim,
            inner,
            restart_count: 0,
        })
    }

    pub fn current_lipschitz(&self) -> f64 {
        self.current_l
    }

    pub fn initial_guess(&self) -> f64 {
        self.initial_guess
    }

    pub fn restart_count(&self) -> usize {
        self.restart_count
    }

    pub fn inner(&self) -> &BatchedLearner {
        &self.inner
    }

    pub fn predict(&self) -> &RealVector {
        self.inner.predict()
    }

    /// Applies the doubling guard, then forwards the feedback.
    pub fn observe(&mut self, fb: &Feedback) -> Result<bool> {
        let demand = fb.gradient.norm() + 2.0 * fb.next_lambda;
        if demand > self.current_l {
            let mut l = self.current_l;
            while l < demand {
                l *= 2.0;
            }
            self.inner = BatchedLearner::new(l, self.epsilon, self.horizon, self.dim)?;
            self.current_l = l;
            self.restart_count += 1;
        }
        self.inner.observe(fb)
    }
}

impl OnlineLearner for LipschitzWrapper {
    fn decision(&self) -> &RealVector {
        self.inner.predict()
    }

    fn observe(&mut self, fb: &Feedback) -> Result<()> {
        LipschitzWrapper::observe(self, fb).map(|_| ())
    }

    fn epoch_index(&self) -> usize {
        self.inner.epoch_index()
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.current_l)
    }
}
