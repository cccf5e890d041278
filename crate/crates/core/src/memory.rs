//! Time-varying memory as time-varying movement costs.
//!
//! A round-`t` loss depends on the last `b_t + 1` decisions. The reduction
//! feeds the movement learner the gradient of the unary loss
//! `f^_t(w) = f_t(w, ..., w)` at the played point, with movement coefficient
//! `G xi_{t+1}` where
//!
//! ```text
//! xi_t = sum_{s=t}^{T} [t - (s - b_s)]_+
//! ```
//!
//! counts how many later losses still see the move made at round `t`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vector::{Feedback, Horizon, RealVector};
use crate::OnlineLearner;

/// Memory lengths `b_1..b_T` with `0 <= b_t <= t - 1`, known in advance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemorySchedule {
    lengths: Vec<usize>,
    horizon: Horizon,
    max_length: usize,
    // xi[t] for t in 1..=T+1, index 0 unused, xi[T+1] = 0
    xi: Vec<u64>,
}

impl MemorySchedule {
    pub fn new(lengths: Vec<usize>) -> Result<Self> {
        let horizon = Horizon::new(lengths.len())?;
        for (i, &b) in lengths.iter().enumerate() {
            if b > i {
                return Err(Error::MemoryTooLong {
                    round: i + 1,
                    length: b,
                    max: i,
                });
            }
        }
        let max_length = lengths.iter().copied().max().unwrap_or(0);
        let xi = precompute_xi(&lengths);
        Ok(Self {
            lengths,
            horizon,
            max_length,
            xi,
        })
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// `b_t` for 1-based `t`.
    pub fn length(&self, t: usize) -> usize {
        self.lengths[t - 1]
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// `B = max_t b_t`.
    pub fn max_length(&self) -> usize {
        self.max_length
    }

    /// `xi_t` for `1 <= t <= T + 1`, with `xi_{T+1} = 0`.
    pub fn xi(&self, t: usize) -> u64 {
        self.xi[t]
    }

    pub fn sum_squared_lengths(&self) -> u64 {
        self.lengths.iter().map(|&b| (b * b) as u64).sum()
    }

    /// Smallest Lipschitz constant the movement learner needs: `H + 2 G B^2`.
    pub fn required_lipschitz(&self, h: f64, g: f64) -> f64 {
        let b = self.max_length as f64;
        h + 2.0 * g * b * b
    }
}

// Round s contributes t - (s - b_s) to every t in [s - b_s + 1, s]; total work
// is O(sum b_s).
fn precompute_xi(lengths: &[usize]) -> Vec<u64> {
    let t_max = lengths.len();
    let mut xi = vec![0u64; t_max + 2];
    for (i, &b) in lengths.iter().enumerate() {
        let s = i + 1;
        let start = s - b;
        for (t, slot) in xi.iter_mut().enumerate().take(s + 1).skip(start + 1) {
            *slot += (t - start) as u64;
        }
    }
    xi
}

/// Checks `xi_t <= B^2` for every `t` and `sum_t xi_t <= sum_t b_t^2`.
pub fn xi_bounds_check(schedule: &MemorySchedule) -> bool {
    let b = schedule.max_length() as u64;
    let t_max = schedule.horizon().get();
    let uniform = (1..=t_max).all(|t| schedule.xi(t) <= b * b);
    let total: u64 = (1..=t_max).map(|t| schedule.xi(t)).sum();
    uniform && total <= schedule.sum_squared_lengths()
}

/// Environment side of the memory game.
pub trait UnaryOracle {
    /// Declared bound `H` on unary gradient norms.
    fn gradient_bound(&self) -> f64;

    /// A (sub)gradient of `f^_t` at `w`.
    fn unary_gradient(&self, t: usize, w: &RealVector) -> RealVector;

    /// `f^_t(w) = f_t(w, ..., w)`.
    fn unary_loss(&self, t: usize, w: &RealVector) -> f64;

    /// `f_t(x_{t-b_t}, ..., x_t)`, window ordered oldest first.
    fn memory_loss(&self, t: usize, window: &[RealVector]) -> f64;
}

/// Runs a movement-cost learner on losses with memory.
#[derive(Debug, Clone)]
pub struct MemoryReduction<L> {
    schedule: MemorySchedule,
    inner: L,
    lipschitz: f64,
    history: VecDeque<RealVector>,
    next_round: usize,
}

impl<L: OnlineLearner> MemoryReduction<L> {
    /// `lipschitz` is the coordinate-wise Lipschitz constant `G`.
    pub fn new(schedule: MemorySchedule, inner: L, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "G",
                reason: "must be nonnegative and finite",
            });
        }
        let cap = schedule.max_length() + 1;
        Ok(Self {
            schedule,
            inner,
            lipschitz,
            history: VecDeque::with_capacity(cap),
            next_round: 1,
        })
    }

    pub fn schedule(&self) -> &MemorySchedule {
        &self.schedule
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    pub fn decision(&self) -> &RealVector {
        self.inner.decision()
    }

    /// Decisions `w_{t-b_t}, ..., w_t` of the last completed round `t`.
    pub fn last_window(&self) -> Vec<RealVector> {
        let t = self.next_round - 1;
        if t == 0 {
            return Vec::new();
        }
        let b = self.schedule.length(t);
        self.history
            .iter()
            .skip(self.history.len() - (b + 1))
            .cloned()
            .collect()
    }

    /// Plays round `t`: records `w_t`, queries the unary gradient and
    /// forwards `(h_t, G xi_{t+1})`.
    pub fn step<O: UnaryOracle + ?Sized>(&mut self, oracle: &O, t: usize) -> Result<Feedback> {
        if t != self.next_round {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                found: t,
            });
        }
        let t_max = self.schedule.horizon().get();
        if t > t_max {
            return Err(Error::PastHorizon {
                round: t,
                horizon: t_max,
            });
        }
        let w = self.inner.decision().clone();
        let h = oracle.unary_gradient(t, &w);
        let bound = oracle.gradient_bound();
        let norm = h.norm();
        // rounding in a normalized direction can overshoot the bound by an ulp
        if norm > bound * (1.0 + 1e-12) {
            return Err(Error::GradientBound {
                round: t,
                norm,
                bound,
            });
        }
        if self.history.len() == self.schedule.max_length() + 1 {
            self.history.pop_front();
        }
        self.history.push_back(w);
        let fb = Feedback::new(h, self.lipschitz * self.schedule.xi(t + 1) as f64)?;
        self.inner.observe(&fb)?;
        self.next_round += 1;
        Ok(fb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_xi(lengths: &[usize], t: usize) -> u64 {
        let t_max = lengths.len();
        (t..=t_max)
            .map(|s| {
                let start = s as i64 - lengths[s - 1] as i64;
                (t as i64 - start).max(0) as u64
            })
            .sum()
    }

    fn constant(b: usize, t_max: usize) -> MemorySchedule {
        MemorySchedule::new((0..t_max).map(|i| b.min(i)).collect()).unwrap()
    }

    #[test]
    fn memoryless_has_zero_xi() {
        let s = constant(0, 20);
        assert!((1..=21).all(|t| s.xi(t) == 0));
        assert!(xi_bounds_check(&s));
    }

    #[test]
    fn constant_two_interior_and_last() {
        let t_max = 10;
        let s = constant(2, t_max);
        for t in 3..=t_max - 2 {
            assert_eq!(s.xi(t), 3, "t = {t}");
        }
        assert_eq!(s.xi(t_max), 2);
        assert_eq!(s.xi(t_max + 1), 0);
        assert!((1..=t_max).all(|t| s.xi(t) <= 4));
        assert!((1..=t_max).map(|t| s.xi(t)).sum::<u64>() <= 40);
        assert!(xi_bounds_check(&s));
    }

    #[test]
    fn fast_matches_naive() {
        let lengths = [0, 1, 0, 3, 2, 5, 1, 0, 4, 4, 2];
        let s = MemorySchedule::new(lengths.to_vec()).unwrap();
        for t in 1..=lengths.len() {
            assert_eq!(s.xi(t), naive_xi(&lengths, t));
        }
    }

    #[test]
    fn overlong_memory_is_rejected() {
        assert_eq!(
            MemorySchedule::new(alloc::vec![0, 2]),
            Err(Error::MemoryTooLong {
                round: 2,
                length: 2,
                max: 1
            })
        );
    }

    #[test]
    fn required_lipschitz() {
        let s = constant(3, 10);
        assert_eq!(s.required_lipschitz(1.0, 0.5), 1.0 + 2.0 * 0.5 * 9.0);
    }
}
