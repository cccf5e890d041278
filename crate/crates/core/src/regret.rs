//! Per-round regret ledger and the bound formulas evaluated on realized data.
//!
//! Two regret notions are tracked side by side. The asymmetric one charges
//! movement only to the learner:
//!
//! ```text
//! R_T = sum_t f_t(w_t) - f_t(u_t) + lambda_t ||w_t - w_{t-1}||
//! ```
//!
//! and the symmetric one also charges the comparator
//! `lambda_t ||u_t - u_{t-1}||`. Both use `w_0 = u_0 = 0`.

use alloc::vec::Vec;

use crate::cmd::CmdParams;
use crate::error::{Error, Result};
use crate::vector::RealVector;

/// Everything the harness needs about one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundInput<'a> {
    pub decision: &'a RealVector,
    pub comparator: &'a RealVector,
    /// `f_t(w_t)` (or the memory loss on the learner's window).
    pub loss: f64,
    /// `f_t(u_t)` (or the memory loss on the comparator's window).
    pub comparator_loss: f64,
    /// `lambda_t`, charged on the move into round `t`.
    pub lambda: f64,
    /// `lambda_{t+1}`, revealed with this round's feedback.
    pub next_lambda: f64,
    /// `||g_t||` of the round's loss gradient at the decision.
    pub gradient_norm: f64,
    pub epoch_index: usize,
    pub current_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub lambda: f64,
    pub loss: f64,
    pub move_cost: f64,
    pub comp_loss: f64,
    pub comp_move: f64,
    pub regret_asym: f64,
    pub regret_sym: f64,
    pub w_norm: f64,
    pub epoch_index: usize,
    pub current_l: Option<f64>,
    pub w_step: f64,
    pub u_norm: f64,
    pub u_step: f64,
    pub gradient_norm: f64,
    pub next_lambda: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RegretTrace {
    rows: Vec<RoundRecord>,
    prev_w: Option<RealVector>,
    prev_u: Option<RealVector>,
}

impl RegretTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[RoundRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends round `t`, which must be the next one in sequence.
    pub fn account(&mut self, t: usize, input: RoundInput<'_>) -> Result<&RoundRecord> {
        let expected = self.rows.len() + 1;
        if t != expected {
            return Err(Error::OutOfOrder { expected, found: t });
        }
        if input.decision.dim() != input.comparator.dim() {
            return Err(Error::DimensionMismatch {
                expected: input.decision.dim(),
                found: input.comparator.dim(),
            });
        }
        for (v, what) in [
            (input.loss, "loss"),
            (input.comparator_loss, "comparator loss"),
            (input.lambda, "lambda"),
            (input.next_lambda, "next lambda"),
            (input.gradient_norm, "gradient norm"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite { what });
            }
        }
        let w_step = match &self.prev_w {
            Some(prev) => input.decision.distance(prev)?,
            None => input.decision.norm(),
        };
        let u_step = match &self.prev_u {
            Some(prev) => input.comparator.distance(prev)?,
            None => input.comparator.norm(),
        };
        let move_cost = input.lambda * w_step;
        let comp_move = input.lambda * u_step;
        let (asym, sym) = self
            .rows
            .last()
            .map_or((0.0, 0.0), |r| (r.regret_asym, r.regret_sym));
        let gap = input.loss - input.comparator_loss;
        self.rows.push(RoundRecord {
            t,
            lambda: input.lambda,
            loss: input.loss,
            move_cost,
            comp_loss: input.comparator_loss,
            comp_move,
            regret_asym: asym + gap + move_cost,
            regret_sym: sym + gap + move_cost - comp_move,
            w_norm: input.decision.norm(),
            epoch_index: input.epoch_index,
            current_l: input.current_l,
            w_step,
            u_norm: input.comparator.norm(),
            u_step,
            gradient_norm: input.gradient_norm,
            next_lambda: input.next_lambda,
        });
        self.prev_w = Some(input.decision.clone());
        self.prev_u = Some(input.comparator.clone());
        Ok(self.rows.last().expect("just pushed"))
    }

    pub fn regret_asym(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret_asym)
    }

    pub fn regret_sym(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret_sym)
    }

    /// `M = max_t ||u_t||`.
    pub fn comparator_max_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.u_norm).fold(0.0, f64::max)
    }

    /// `P_T = sum_{t=1}^T ||u_t - u_{t-1}||` with `u_0 = 0`.
    pub fn path_length(&self) -> f64 {
        self.rows.iter().map(|r| r.u_step).sum()
    }

    /// `max_t lambda_t` over `t in [T]`.
    pub fn lambda_max(&self) -> f64 {
        self.rows.iter().map(|r| r.lambda).fold(0.0, f64::max)
    }

    pub fn gradient_max_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.gradient_norm).fold(0.0, f64::max)
    }

    /// `sum_t ||w_t - w_{t-1}||`, unweighted.
    pub fn learner_path_length(&self) -> f64 {
        self.rows.iter().map(|r| r.w_step).sum()
    }

    pub fn total_move_cost(&self) -> f64 {
        self.rows.iter().map(|r| r.move_cost).sum()
    }

    /// `sum_t lambda_t ||u_t - u_{t-1}||`, the gap between the two regrets.
    pub fn comparator_move_cost(&self) -> f64 {
        self.rows.iter().map(|r| r.comp_move).sum()
    }
}

/// Right-hand side of the explicit-constant guarantee for a single
/// mirror-descent instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Bound {
    pub rhs: f64,
    /// Whether `eta <= 1/(G + lambda_max)` held; the bound is only certified then.
    pub precondition_met: bool,
}

/// ```text
/// ( 2||u_T|| ln(||u_T|| T/eps0 + 1)
///   + 2 sum_{t>=2} ||u_t - u_{t-1}|| ln(2 ||u_t - u_{t-1}|| T^2/eps0 + 1) ) / eta
/// + 2 eta sum_t (||g_t||^2 + lambda_{t+1}^2) ||u_t||
/// + (1/(eta T)) sum_t ||u_t||
/// + eps0 (G + lambda_max)
/// ```
pub fn prop1_bound(trace: &RegretTrace, params: &CmdParams, g: f64, lambda_max: f64) -> Prop1Bound {
    let t = params.horizon().as_f64();
    let eta = params.eta();
    let eps = params.epsilon0();
    let rows = trace.rows();
    let u_last = rows.last().map_or(0.0, |r| r.u_norm);
    let mut comparator_term = 2.0 * u_last * libm::log(u_last * t / eps + 1.0);
    for r in rows.iter().skip(1) {
        comparator_term += 2.0 * r.u_step * libm::log(2.0 * r.u_step * t * t / eps + 1.0);
    }
    let variance: f64 = rows
        .iter()
        .map(|r| (r.gradient_norm * r.gradient_norm + r.next_lambda * r.next_lambda) * r.u_norm)
        .sum();
    let norms: f64 = rows.iter().map(|r| r.u_norm).sum();
    let rhs = comparator_term / eta
        + 2.0 * eta * variance
        + norms / (eta * t)
        + eps * (g + lambda_max);
    Prop1Bound {
        rhs,
        precondition_met: eta <= 1.0 / (g + lambda_max),
    }
}

/// Which guarantee the realized regret is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    /// Explicit bound for a single mirror-descent instance.
    Prop1 {
        params: CmdParams,
        g: f64,
        lambda_max: f64,
    },
    /// Grid aggregation (squared movement coefficients).
    Thm1,
    /// Adaptive batching (first-order movement dependence).
    Thm2,
    /// Delayed feedback.
    Delay { g: f64, total_delay: f64 },
    /// Time-varying memory.
    Memory { g: f64, h: f64, sum_squared_lengths: f64 },
}

/// Bound formulas with their unknown leading constants removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub m_tilde: f64,
    pub p_tilde_thm1: f64,
    pub p_tilde_thm2: f64,
    pub thm1_shape: f64,
    pub thm2_shape: f64,
    pub delay_shape: Option<f64>,
    pub memory_shape: Option<f64>,
    pub prop1_rhs: Option<f64>,
    /// Shape of the guarantee selected by [`ShapeKind`].
    pub thm_shape: f64,
    /// `R_T / thm_shape`, absent when the shape is zero.
    pub ratio: Option<f64>,
}

pub fn bound_shapes(
    trace: &RegretTrace,
    epsilon: f64,
    lipschitz: f64,
    kind: ShapeKind,
) -> BoundReport {
    let rows = trace.rows();
    let t = rows.len() as f64;
    let m = trace.comparator_max_norm();
    let p = trace.path_length();
    let m_tilde = m * (libm::log(m * t / epsilon + 1.0) + 1.0);
    let p_tilde_thm1: f64 = rows
        .iter()
        .skip(1)
        .map(|r| r.u_step * libm::log(r.u_step * t * t / epsilon + 1.0))
        .sum();
    let p_tilde_thm2 = p * (libm::log(2.0 * m * t * t / epsilon + 1.0) + 1.0);
    let additive = epsilon * libm::log(t);

    let second_order: f64 = rows
        .iter()
        .map(|r| (r.gradient_norm * r.gradient_norm + r.next_lambda * r.next_lambda) * r.u_norm)
        .sum();
    let first_order: f64 = rows
        .iter()
        .map(|r| (r.gradient_norm * r.gradient_norm + r.lambda * r.gradient_norm) * r.u_norm)
        .sum();
    let thm1_shape = (additive + m_tilde + p_tilde_thm1) * lipschitz
        + libm::sqrt((m_tilde + p_tilde_thm1) * second_order);
    let thm2_shape = (additive + m_tilde + p_tilde_thm2) * lipschitz
        + libm::sqrt((m_tilde + p_tilde_thm2) * first_order);

    let mut delay_shape = None;
    let mut memory_shape = None;
    let mut prop1_rhs = None;
    let thm_shape = match kind {
        ShapeKind::Prop1 {
            params,
            g,
            lambda_max,
        } => {
            let rhs = prop1_bound(trace, &params, g, lambda_max).rhs;
            prop1_rhs = Some(rhs);
            rhs
        }
        ShapeKind::Thm1 => thm1_shape,
        ShapeKind::Thm2 => thm2_shape,
        ShapeKind::Delay { g, total_delay } => {
            let s = (m + p) * lipschitz + g * libm::sqrt((m * m + m * p) * (t + total_delay));
            delay_shape = Some(s);
            s
        }
        ShapeKind::Memory {
            g,
            h,
            sum_squared_lengths,
        } => {
            let s = (additive + m_tilde + p_tilde_thm2) * lipschitz
                + libm::sqrt(m * (m_tilde + p_tilde_thm2) * (h * h * t + g * h * sum_squared_lengths));
            memory_shape = Some(s);
            s
        }
    };
    let ratio = (thm_shape > 0.0).then(|| trace.regret_asym() / thm_shape);
    BoundReport {
        m_tilde,
        p_tilde_thm1,
        p_tilde_thm2,
        thm1_shape,
        thm2_shape,
        delay_shape,
        memory_shape,
        prop1_rhs,
        thm_shape,
        ratio,
    }
}

/// Least-squares fit of `ln R_T` against `ln T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: usize,
    /// Points with nonpositive regret, which have no logarithm.
    pub dropped: usize,
}

pub fn growth_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t > 0.0 && *r > 0.0 && r.is_finite())
        .map(|&(t, r)| (libm::log(t), libm::log(r)))
        .collect();
    let dropped = points.len() - logs.len();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "need at least two horizons with positive regret",
        });
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "need at least two distinct horizons",
        });
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        used: logs.len(),
        dropped,
    })
}
