//! Composite mirror descent with a linearithmic regularizer and a
//! movement-aware norm penalty.
//!
//! The regularizer is `psi(w) = (2/eta) * int_0^{||w||} ln(x/alpha + 1) dx`
//! and each round adds the penalty `phi_t(w) = (eta * beta_t^2 + gamma) ||w||`
//! with `beta_t = ||g_t|| + lambda_{t+1}`. The next iterate minimizes
//!
//! ```text
//! <g_t, w> + D_psi(w | w_t) + phi_t(w)
//! ```
//!
//! over all of `R^n`. Both `psi` and the penalty are radial, so the minimizer
//! lies on the ray spanned by `theta = grad psi(w_t) - g_t`. Along that ray the
//! problem is `min_{r >= 0} -||theta|| r + F(r) + c r` with
//! `F'(r) = (2/eta) ln(r/alpha + 1)` and `c = eta beta_t^2 + gamma`, which
//! gives `r = alpha (exp(eta (||theta|| - c) / 2) - 1)` when `||theta|| > c`
//! and `r = 0` otherwise.

use crate::error::{Error, Result};
use crate::vector::{Feedback, Horizon, RealVector};
use crate::OnlineLearner;

/// Exponents above this are treated as a mis-tuned learning rate.
pub const EXP_GUARD: f64 = 700.0;

/// Tuning of one mirror-descent instance. `gamma = 1/(eta T)` and
/// `alpha = epsilon0 / T` are derived at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmdParams {
    epsilon0: f64,
    eta: f64,
    horizon: Horizon,
    gamma: f64,
    alpha: f64,
}

impl CmdParams {
    pub fn new(epsilon0: f64, eta: f64, horizon: Horizon) -> Result<Self> {
        if !(epsilon0.is_finite() && epsilon0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon0",
                reason: "must be positive and finite",
            });
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: "must be positive and finite",
            });
        }
        let t = horizon.as_f64();
        Ok(Self {
            epsilon0,
            eta,
            horizon,
            gamma: 1.0 / (eta * t),
            alpha: epsilon0 / t,
        })
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `psi(w) = (2/eta) [ (||w|| + alpha) ln(||w||/alpha + 1) - ||w|| ]`.
pub fn psi(w: &RealVector, params: &CmdParams) -> f64 {
    let r = w.norm();
    let a = params.alpha;
    (2.0 / params.eta) * ((r + a) * libm::log1p(r / a) - r)
}

/// `grad psi(w) = (2/eta) ln(||w||/alpha + 1) w/||w||`, and `0` at the origin.
pub fn psi_gradient(w: &RealVector, params: &CmdParams) -> RealVector {
    let r = w.norm();
    if r == 0.0 {
        return RealVector::zeros(w.dim());
    }
    let radial = (2.0 / params.eta) * libm::log1p(r / params.alpha);
    // radial / r is finite for any finite nonzero w
    w.scale(radial / r)
        .expect("psi gradient of a finite vector is finite")
}

/// One mirror-descent instance: the iterate `w_t` plus its tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdLearner {
    w: RealVector,
    params: CmdParams,
    round: usize,
}

impl CmdLearner {
    /// Starts at the origin of `R^dim`.
    pub fn new(params: CmdParams, dim: usize) -> Self {
        Self {
            w: RealVector::zeros(dim),
            params,
            round: 1,
        }
    }

    /// Starts from an arbitrary iterate. Used by the verification harness to
    /// probe the update away from the origin.
    pub fn with_iterate(params: CmdParams, w: RealVector, round: usize) -> Self {
        Self { w, params, round }
    }

    pub fn params(&self) -> &CmdParams {
        &self.params
    }

    pub fn iterate(&self) -> &RealVector {
        &self.w
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Penalty weight `c = eta beta^2 + gamma` with `beta = ||g|| + lambda_{t+1}`.
    pub fn penalty_weight(&self, fb: &Feedback) -> f64 {
        let beta = fb.gradient.norm() + fb.next_lambda;
        self.params.eta * beta * beta + self.params.gamma
    }

    /// The raw update objective `<g, w> + D_psi(w | w_t) + c ||w||`.
    pub fn objective_value(&self, w: &RealVector, fb: &Feedback) -> Result<f64> {
        let grad_t = psi_gradient(&self.w, &self.params);
        let linear = fb.gradient.dot(w)?;
        let bregman =
            psi(w, &self.params) - psi(&self.w, &self.params) - grad_t.dot(&w.sub(&self.w)?)?;
        Ok(linear + bregman + self.penalty_weight(fb) * w.norm())
    }

    /// Closed-form minimizer of [`objective_value`](Self::objective_value).
    pub fn next_iterate(&self, fb: &Feedback) -> Result<RealVector> {
        if fb.gradient.dim() != self.w.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.w.dim(),
                found: fb.gradient.dim(),
            });
        }
        let theta = psi_gradient(&self.w, &self.params).sub(&fb.gradient)?;
        let theta_norm = theta.norm();
        let c = self.penalty_weight(fb);
        if theta_norm <= c {
            return Ok(RealVector::zeros(self.w.dim()));
        }
        let exponent = self.params.eta * (theta_norm - c) / 2.0;
        if exponent > EXP_GUARD {
            return Err(Error::ExpOverflow { exponent });
        }
        let r = self.params.alpha * libm::expm1(exponent);
        theta.scale(r / theta_norm)
    }

    pub fn update(&mut self, fb: &Feedback) -> Result<()> {
        self.w = self.next_iterate(fb)?;
        self.round += 1;
        Ok(())
    }
}

impl OnlineLearner for CmdLearner {
    fn decision(&self) -> &RealVector {
        &self.w
    }

    fn observe(&mut self, fb: &Feedback) -> Result<()> {
        self.update(fb)
    }

    fn epoch_index(&self) -> usize {
        self.round
    }
}
