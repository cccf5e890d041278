//! Delayed feedback as time-varying movement costs.
//!
//! The gradient of round `t` arrives at the end of round `t + d_t`. With
//! `o_t = {tau : tau + d_tau < t}` the rounds observed before `t` and
//! `m_t = [t-1] \ o_t` the missing ones, the reduction feeds the movement
//! learner the sum `h_t` of gradients arriving at the end of round `t` together
//! with the coefficient `G |m_{t+1}|` (plus any genuine movement coefficient).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vector::{Feedback, Horizon, RealVector};
use crate::OnlineLearner;

/// Delays `d_1..d_T` with `t + d_t <= T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySchedule {
    delays: Vec<usize>,
    horizon: Horizon,
}

impl DelaySchedule {
    pub fn new(delays: Vec<usize>) -> Result<Self> {
        let horizon = Horizon::new(delays.len())?;
        let t_max = delays.len();
        for (i, &d) in delays.iter().enumerate() {
            let round = i + 1;
            if round + d > t_max {
                return Err(Error::DelayPastHorizon {
                    round,
                    delay: d,
                    horizon: t_max,
                });
            }
        }
        Ok(Self { delays, horizon })
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// `d_t` for 1-based `t`.
    pub fn delay(&self, t: usize) -> usize {
        self.delays[t - 1]
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn total_delay(&self) -> usize {
        self.delays.iter().sum()
    }
}

/// Precomputed arrival buckets and missing counts for a schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayLedger {
    schedule: DelaySchedule,
    // buckets[t] = {tau : tau + d_tau = t}, index 0 unused
    buckets: Vec<Vec<usize>>,
    // missing[t] = |m_t| for t in 1..=T+1, index 0 unused
    missing: Vec<usize>,
    sigma_max: usize,
}

impl DelayLedger {
    pub fn build(schedule: DelaySchedule) -> Self {
        let t_max = schedule.horizon().get();
        let mut buckets = vec![Vec::new(); t_max + 1];
        for tau in 1..=t_max {
            buckets[tau + schedule.delay(tau)].push(tau);
        }
        let mut missing = vec![0usize; t_max + 2];
        let mut observed = 0usize;
        for t in 1..=t_max + 1 {
            // |o_t| counts arrivals at the end of rounds 1..t-1
            if t >= 2 {
                observed += buckets[t - 1].len();
            }
            missing[t] = (t - 1) - observed;
        }
        let sigma_max = missing[1..=t_max].iter().copied().max().unwrap_or(0);
        Self {
            schedule,
            buckets,
            missing,
            sigma_max,
        }
    }

    pub fn schedule(&self) -> &DelaySchedule {
        &self.schedule
    }

    pub fn horizon(&self) -> Horizon {
        self.schedule.horizon()
    }

    /// Source rounds whose gradients arrive at the end of round `t`,
    /// i.e. `o_{t+1} \ o_t`, in increasing order.
    pub fn arrivals(&self, t: usize) -> &[usize] {
        &self.buckets[t]
    }

    /// `|m_t|` for `1 <= t <= T + 1`.
    pub fn missing(&self, t: usize) -> usize {
        self.missing[t]
    }

    /// `max_t |m_t|` over `t in [T]`.
    pub fn sigma_max(&self) -> usize {
        self.sigma_max
    }

    pub fn total_delay(&self) -> usize {
        self.schedule.total_delay()
    }

    /// Smallest Lipschitz constant the movement learner needs:
    /// `G (1 + 3 sigma_max) + 2 lambda_max`.
    pub fn required_lipschitz(&self, g: f64, external_lambda_max: f64) -> f64 {
        g * (1.0 + 3.0 * self.sigma_max as f64) + 2.0 * external_lambda_max
    }
}

/// Checks `sum_t |m_t| |o_{t+1} \ o_t| <= 2 d_tot`.
pub fn delay_aux_check(ledger: &DelayLedger) -> bool {
    let t_max = ledger.horizon().get();
    let lhs: usize = (1..=t_max)
        .map(|t| ledger.missing(t) * ledger.arrivals(t).len())
        .sum();
    lhs <= 2 * ledger.total_delay()
}

/// Runs a movement-cost learner on delayed feedback.
#[derive(Debug, Clone)]
pub struct DelayReduction<L> {
    ledger: DelayLedger,
    inner: L,
    lipschitz: f64,
    next_round: usize,
}

impl<L: OnlineLearner> DelayReduction<L> {
    /// `lipschitz` is the loss Lipschitz constant `G` scaling the missing count.
    pub fn new(ledger: DelayLedger, inner: L, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "G",
                reason: "must be nonnegative and finite",
            });
        }
        Ok(Self {
            ledger,
            inner,
            lipschitz,
            next_round: 1,
        })
    }

    pub fn ledger(&self) -> &DelayLedger {
        &self.ledger
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    pub fn decision(&self) -> &RealVector {
        self.inner.decision()
    }

    /// Ends round `t`. `arrived` holds the gradients of exactly the rounds in
    /// [`DelayLedger::arrivals`]`(t)`; their order does not matter.
    /// Returns the feedback forwarded to the inner learner.
    pub fn step(
        &mut self,
        t: usize,
        arrived: &[RealVector],
        external_lambda_next: f64,
    ) -> Result<Feedback> {
        if t != self.next_round {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                found: t,
            });
        }
        let t_max = self.ledger.horizon().get();
        if t > t_max {
            return Err(Error::PastHorizon {
                round: t,
                horizon: t_max,
            });
        }
        let expected = self.ledger.arrivals(t).len();
        if arrived.len() != expected {
            return Err(Error::BucketMismatch {
                round: t,
                expected,
                found: arrived.len(),
            });
        }
        let mut h = RealVector::zeros(self.inner.decision().dim());
        for g in arrived {
            h.add_assign(g)?;
        }
        let coefficient =
            self.lipschitz * self.ledger.missing(t + 1) as f64 + external_lambda_next;
        let fb = Feedback::new(h, coefficient)?;
        self.inner.observe(&fb)?;
        self.next_round += 1;
        Ok(fb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ledger(d: &[usize]) -> DelayLedger {
        DelayLedger::build(DelaySchedule::new(d.to_vec()).unwrap())
    }

    #[test]
    fn three_round_example() {
        let l = ledger(&[1, 0, 0]);
        assert_eq!(l.missing(1), 0);
        assert_eq!(l.missing(2), 1);
        assert_eq!(l.missing(3), 0);
        assert_eq!(l.missing(4), 0);
        assert!(l.arrivals(1).is_empty());
        assert_eq!(l.arrivals(2), &[1, 2]);
        assert_eq!(l.arrivals(3), &[3]);
        assert_eq!(l.sigma_max(), 1);
        assert_eq!(l.total_delay(), 1);
        assert!(delay_aux_check(&l));
    }

    #[test]
    fn no_delay_means_nothing_missing() {
        let l = ledger(&[0; 12]);
        for t in 1..=13 {
            assert_eq!(l.missing(t), 0);
        }
        for t in 1..=12 {
            assert_eq!(l.arrivals(t), &[t]);
        }
        assert!(delay_aux_check(&l));
    }

    #[test]
    fn everything_at_the_end() {
        let t_max = 9;
        let d: Vec<usize> = (1..=t_max).map(|t| t_max - t).collect();
        let l = ledger(&d);
        for t in 1..=t_max {
            assert_eq!(l.missing(t), t - 1);
        }
        assert_eq!(l.sigma_max(), t_max - 1);
        assert!(delay_aux_check(&l));
    }

    #[test]
    fn delay_past_horizon_is_rejected() {
        assert_eq!(
            DelaySchedule::new(vec![0, 2, 0]),
            Err(Error::DelayPastHorizon {
                round: 2,
                delay: 2,
                horizon: 3
            })
        );
    }

    #[test]
    fn required_lipschitz_surfaces_sigma() {
        let l = ledger(&[2, 1, 0, 0]);
        assert_eq!(l.sigma_max(), 2);
        assert_eq!(l.required_lipschitz(1.5, 0.25), 1.5 * 7.0 + 0.5);
    }
}
