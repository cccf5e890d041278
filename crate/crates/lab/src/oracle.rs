//! Numeric minimizer of the mirror-descent objective, independent of the
//! closed form it is used to check.

use movecost_core::cmd::{psi_gradient, CmdLearner};
use movecost_core::{Feedback, RealVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const RADIUS_TOL: f64 = 1e-10;
pub const CERTIFICATE_TOL: f64 = 1e-9;
pub const PERTURBATIONS: usize = 1000;
const SCALES: [f64; 2] = [1e-3, 1e-6];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub minimizer: RealVector,
    pub objective: f64,
    /// Largest objective decrease found by the random perturbations,
    /// relative to `max(1, |objective|)`.
    pub worst_improvement: f64,
    pub certified: bool,
}

fn objective(state: &CmdLearner, fb: &Feedback, w: &RealVector) -> f64 {
    state.objective_value(w, fb).expect("dimensions checked by caller")
}

/// Golden-section search on `[lo, hi]` for a unimodal function.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        // stop once the bracket no longer shrinks in floating point
        if x1 >= x2 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("three candidates")
}

/// Searches the ray along `theta = grad psi(w_t) - g` up to
/// `4 r_closed + alpha`, then certifies the result against Gaussian
/// perturbations in arbitrary directions.
pub fn cmd_update_oracle<R: Rng + ?Sized>(
    state: &CmdLearner,
    fb: &Feedback,
    tol: f64,
    rng: &mut R,
) -> OracleResult {
    assert!(tol > 0.0, "tolerance must be positive");
    let dim = state.iterate().dim();
    let params = state.params();
    let theta = psi_gradient(state.iterate(), params)
        .sub(&fb.gradient)
        .expect("matching dims");
    let theta_norm = theta.norm();
    let minimizer = if theta_norm == 0.0 {
        RealVector::zeros(dim)
    } else {
        let dir = theta.scale(1.0 / theta_norm).expect("finite direction");
        let closed_r = state.next_iterate(fb).map(|w| w.norm()).unwrap_or(0.0);
        let hi = 4.0 * closed_r + params.alpha();
        let along = |r: f64| objective(state, fb, &dir.scale(r).expect("finite point"));
        let r = golden_section(along, 0.0, hi, RADIUS_TOL);
        dir.scale(r).expect("finite point")
    };
    let best = objective(state, fb, &minimizer);
    let scale_ref = best.abs().max(1.0);
    let base = 1.0 + minimizer.norm();
    let mut worst: f64 = 0.0;
    for i in 0..PERTURBATIONS {
        let s = SCALES[i % SCALES.len()] * base;
        let delta: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                s * z
            })
            .collect();
        let probe = minimizer
            .add(&RealVector::new(delta).expect("finite perturbation"))
            .expect("matching dims");
        let drop = (best - objective(state, fb, &probe)) / scale_ref;
        worst = worst.max(drop);
    }
    OracleResult {
        minimizer,
        objective: best,
        worst_improvement: worst,
        certified: worst <= tol,
    }
}
