//! Learning-rate grid aggregation: one mirror-descent instance per rate in
//! `{2^i / (L sqrt T)} ∪ {1/L}` and the decision is the sum of all iterates.

use alloc::vec::Vec;

use crate::cmd::{CmdLearner, CmdParams};
use crate::error::{Error, Result};
use crate::vector::{Feedback, Horizon, RealVector};
use crate::OnlineLearner;

/// Smallest `k` with `k * k >= t`.
fn ceil_sqrt(t: u64) -> u64 {
    let mut k = libm::sqrt(t as f64) as u64;
    while k * k < t {
        k += 1;
    }
    while k > 0 && (k - 1) * (k - 1) >= t {
        k -= 1;
    }
    k
}

/// Strictly increasing rates `2^i / (L sqrt T)` while `2^i < ceil(sqrt T)`,
/// capped by a single trailing `1/L`.
pub fn build_grid(lipschitz: f64, horizon: Horizon) -> Vec<f64> {
    let t = horizon.get() as u64;
    let root = libm::sqrt(t as f64);
    let cap = ceil_sqrt(t);
    let mut rates = Vec::new();
    let mut pow = 1u64;
    while pow < cap {
        rates.push(pow as f64 / (lipschitz * root));
        pow *= 2;
    }
    rates.push(1.0 / lipschitz);
    rates
}

/// Tuning for the grid: effective Lipschitz constant `L` and precision `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub lipschitz: f64,
    pub epsilon: f64,
    pub horizon: Horizon,
}

impl GridParams {
    pub fn new(lipschitz: f64, epsilon: f64, horizon: Horizon) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: "must be positive and finite",
            });
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: "must be positive and finite",
            });
        }
        Ok(Self {
            lipschitz,
            epsilon,
            horizon,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLearner {
    instances: Vec<CmdLearner>,
    params: GridParams,
    decision: RealVector,
}

impl GridLearner {
    pub fn new(params: GridParams, dim: usize) -> Result<Self> {
        let instances = build_grid(params.lipschitz, params.horizon)
            .into_iter()
            .map(|eta| {
                CmdParams::new(params.epsilon, eta, params.horizon)
                    .map(|p| CmdLearner::new(p, dim))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            instances,
            params,
            decision: RealVector::zeros(dim),
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn instances(&self) -> &[CmdLearner] {
        &self.instances
    }

    /// Sum of all instances' iterates.
    pub fn predict(&self) -> &RealVector {
        &self.decision
    }

    /// Broadcasts the same feedback to every instance.
    pub fn update(&mut self, fb: &Feedback) -> Result<()> {
        // compute every step before committing so a failure leaves the state intact
        let next = self
            .instances
            .iter()
            .map(|inst| inst.next_iterate(fb))
            .collect::<Result<Vec<_>>>()?;
        let mut sum = RealVector::zeros(self.decision.dim());
        for (inst, w) in self.instances.iter_mut().zip(next) {
            sum.add_assign(&w)?;
            *inst = CmdLearner::with_iterate(*inst.params(), w, inst.round() + 1);
        }
        self.decision = sum;
        Ok(())
    }
}

impl OnlineLearner for GridLearner {
    fn decision(&self) -> &RealVector {
        &self.decision
    }

    fn observe(&mut self, fb: &Feedback) -> Result<()> {
        self.update(fb)
    }

    fn epoch_index(&self) -> usize {
        self.instances[0].round()
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.params.lipschitz)
    }
}

/// Whether the doubling grid `{2^i eta_min ∧ eta_max}` contains a rate with
/// `P/eta + eta V <= 3 sqrt(PV) + P/eta_max + eta_min V`.
pub fn grid_tuning_check(p: f64, v: f64, eta_min: f64, eta_max: f64) -> bool {
    assert!(
        eta_min > 0.0 && eta_min <= eta_max,
        "need 0 < eta_min <= eta_max"
    );
    let mut best = f64::INFINITY;
    let mut eta = eta_min;
    loop {
        let rate = eta.min(eta_max);
        best = best.min(p / rate + rate * v);
        if rate >= eta_max {
            break;
        }
        eta *= 2.0;
    }
    best <= 3.0 * libm::sqrt(p * v) + p / eta_max + eta_min * v
}
