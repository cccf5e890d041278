//! Randomized property suites behind the `check` subcommand.
//!
//! Case `i` draws everything from seed `seed + i`, so any failure can be
//! replayed alone with `--seed <seed + i> --cases 1`.

use std::fmt;
use std::str::FromStr;

use movecost_core::batched::{epoch_decomposition_check, BatchedLearner};
use movecost_core::cmd::{CmdLearner, CmdParams};
use movecost_core::delay::{delay_aux_check, DelayLedger, DelaySchedule};
use movecost_core::grid::{build_grid, grid_tuning_check};
use movecost_core::memory::{xi_bounds_check, MemorySchedule};
use movecost_core::regret::{prop1_bound, RegretTrace, RoundInput};
use movecost_core::{Feedback, Horizon, OnlineLearner, RealVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::LabError;
use crate::oracle::{cmd_update_oracle, CERTIFICATE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Oracle,
    Lemmas,
    Ledger,
    Xi,
    Grid,
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "oracle" => Suite::Oracle,
            "lemmas" => Suite::Lemmas,
            "ledger" => Suite::Ledger,
            "xi" => Suite::Xi,
            "grid" => Suite::Grid,
            other => return Err(LabError::Config(format!("unknown suite {other:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Oracle => "oracle",
            Suite::Lemmas => "lemmas",
            Suite::Ledger => "ledger",
            Suite::Xi => "xi",
            Suite::Grid => "grid",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseFailure {
    pub case: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub base_seed: u64,
    pub failures: Vec<CaseFailure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

type CaseResult = Result<(), String>;

pub fn run_suite(suite: Suite, cases: usize, seed: u64) -> SuiteReport {
    let case = match suite {
        Suite::Oracle => oracle_case,
        Suite::Lemmas => lemmas_case,
        Suite::Ledger => ledger_case,
        Suite::Xi => xi_case,
        Suite::Grid => grid_case,
    };
    let failures = (0..cases)
        .into_par_iter()
        .filter_map(|i| {
            let case_seed = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
            case(&mut rng).err().map(|message| CaseFailure {
                case: i,
                seed: case_seed,
                message,
            })
        })
        .collect();
    SuiteReport {
        suite,
        cases,
        base_seed: seed,
        failures,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

fn gaussian_direction(rng: &mut ChaCha8Rng, dim: usize) -> RealVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let v = RealVector::new(v).expect("finite");
        let n = v.norm();
        if n > 1e-9 {
            return v.scale(1.0 / n).expect("finite");
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize, norm: f64) -> RealVector {
    gaussian_direction(rng, dim).scale(norm).expect("finite")
}

fn oracle_case(rng: &mut ChaCha8Rng) -> CaseResult {
    let dim = [1, 3, 10][rng.random_range(0..3)];
    let horizon = Horizon::new(rng.random_range(1..=10_000)).expect("positive");
    let eps0 = log_uniform(rng, 1e-2, 1e2);
    let g_norm = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5.0) };
    let lambda = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..3.0) };
    let scale = g_norm + lambda;
    let eta_cap = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    let eta = eta_cap * rng.random_range(0.05..=1.0);
    let w_norm = if rng.random_bool(0.2) { 0.0 } else { log_uniform(rng, 1e-4, 1e2) };
    let params = CmdParams::new(eps0, eta, horizon).map_err(|e| e.to_string())?;
    let w = random_vector(rng, dim, w_norm);
    let state = CmdLearner::with_iterate(params, w, 1);
    let fb = Feedback::new(random_vector(rng, dim, g_norm), lambda).map_err(|e| e.to_string())?;

    let closed = state.next_iterate(&fb).map_err(|e| format!("closed form failed: {e}"))?;
    let oracle = cmd_update_oracle(&state, &fb, CERTIFICATE_TOL, rng);
    let dist = closed.distance(&oracle.minimizer).expect("dims");
    if dist > 1e-6 * (1.0 + oracle.minimizer.norm()) {
        return Err(format!(
            "closed form {:?} vs oracle {:?} (distance {dist})",
            closed.as_slice(),
            oracle.minimizer.as_slice()
        ));
    }
    let f_closed = state.objective_value(&closed, &fb).expect("dims");
    let gap = (f_closed - oracle.objective) / oracle.objective.abs().max(1.0);
    if gap > 1e-9 {
        return Err(format!("objective gap {gap} (closed {f_closed}, oracle {})", oracle.objective));
    }
    if !oracle.certified {
        return Err(format!(
            "perturbation improved the oracle point by {}",
            oracle.worst_improvement
        ));
    }
    // the closed form must itself survive the certificate
    let mut worst: f64 = 0.0;
    for _ in 0..64 {
        let s = 1e-6 * (1.0 + closed.norm());
        let probe = closed.add(&random_vector(rng, dim, s)).expect("dims");
        let drop = (f_closed - state.objective_value(&probe, &fb).expect("dims")) / f_closed.abs().max(1.0);
        worst = worst.max(drop);
    }
    if worst > CERTIFICATE_TOL {
        return Err(format!("perturbation improved the closed form by {worst}"));
    }
    Ok(())
}

/// One single-rate run on random linear losses, checked against the
/// explicit bound.
pub fn prop1_case(rng: &mut ChaCha8Rng, t_max: usize) -> CaseResult {
    let g_bound = rng.random_range(0.1..3.0);
    let lambda_cap = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) };
    let u_cap = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5.0) };
    let switch_prob = rng.random_range(0.0..0.2);
    let eps0 = log_uniform(rng, 0.1, 10.0);
    let horizon = Horizon::new(t_max).expect("positive");

    let grads: Vec<f64> = (0..t_max).map(|_| rng.random_range(-g_bound..=g_bound)).collect();
    let mut lambdas = vec![0.0; t_max + 1];
    for l in &mut lambdas[1..t_max] {
        *l = rng.random_range(0.0..=lambda_cap);
    }
    let mut u = rng.random_range(-u_cap..=u_cap);
    let comps: Vec<f64> = (0..t_max)
        .map(|_| {
            if rng.random_bool(switch_prob) {
                u = rng.random_range(-u_cap..=u_cap);
            }
            u
        })
        .collect();
    let lambda_max = lambdas.iter().copied().fold(0.0, f64::max);
    let eta = rng.random_range(0.1..=1.0) / (g_bound + lambda_max);
    let params = CmdParams::new(eps0, eta, horizon).map_err(|e| e.to_string())?;
    let mut learner = CmdLearner::new(params, 1);
    let mut trace = RegretTrace::new();
    for t in 1..=t_max {
        let w = learner.decision().clone();
        let u = RealVector::from(comps[t - 1]);
        let g = grads[t - 1];
        trace
            .account(
                t,
                RoundInput {
                    decision: &w,
                    comparator: &u,
                    loss: g * w.as_slice()[0],
                    comparator_loss: g * comps[t - 1],
                    lambda: lambdas[t - 1],
                    next_lambda: lambdas[t],
                    gradient_norm: g.abs(),
                    epoch_index: learner.epoch_index(),
                    current_l: None,
                },
            )
            .map_err(|e| e.to_string())?;
        learner
            .update(&Feedback::new(RealVector::from(g), lambdas[t]).expect("valid"))
            .map_err(|e| e.to_string())?;
    }
    let bound = prop1_bound(&trace, &params, g_bound, lambda_max);
    if !bound.precondition_met {
        return Err("generated eta violates the precondition".into());
    }
    let regret = trace.regret_asym();
    if regret > bound.rhs + 1e-9 * (1.0 + bound.rhs.abs()) {
        return Err(format!("regret {regret} exceeds explicit bound {}", bound.rhs));
    }
    Ok(())
}

pub fn epoch_case(rng: &mut ChaCha8Rng, t_max: usize) -> CaseResult {
    let dim = rng.random_range(1..=3);
    let g_scale = rng.random_range(0.05..2.0);
    let lambda_cap = rng.random_range(0.0..3.0);
    let l = g_scale * (dim as f64).sqrt() + 2.0 * lambda_cap;
    let mut learner = BatchedLearner::new(l.max(1e-3), 1.0, Horizon::new(t_max).expect("positive"), dim)
        .map_err(|e| e.to_string())?;
    for t in 1..=t_max {
        let g: Vec<f64> = (0..dim).map(|_| rng.random_range(-g_scale..=g_scale)).collect();
        let next = if t == t_max { 0.0 } else { rng.random_range(0.0..=lambda_cap) };
        learner
            .observe(&Feedback::new(RealVector::new(g).expect("finite"), next).expect("valid"))
            .map_err(|e| e.to_string())?;
    }
    if !learner.open_members().is_empty() {
        return Err("rounds left unflushed after a zero final coefficient".into());
    }
    if !epoch_decomposition_check(learner.epoch_log()) {
        return Err("epoch decomposition inequality violated".into());
    }
    Ok(())
}

fn random_delay_schedule(rng: &mut ChaCha8Rng, t_max: usize) -> Vec<usize> {
    let d_max = rng.random_range(0..=t_max.min(300));
    let style = rng.random_range(0..3);
    (1..=t_max)
        .map(|t| {
            let d = match style {
                0 => rng.random_range(0..=d_max),
                1 if rng.random_bool(0.1) => d_max,
                1 => 0,
                _ => d_max,
            };
            d.min(t_max - t)
        })
        .collect()
}

pub fn ledger_identities(delays: &[usize]) -> CaseResult {
    let t_max = delays.len();
    let ledger = DelayLedger::build(DelaySchedule::new(delays.to_vec()).map_err(|e| e.to_string())?);
    // |o_t| counts arrival times tau + d_tau strictly before t
    let mut arrival_times: Vec<usize> = delays.iter().enumerate().map(|(i, d)| i + 1 + d).collect();
    arrival_times.sort_unstable();
    let observed = |t: usize| arrival_times.partition_point(|&a| a < t);
    let mut aux = 0u128;
    let mut missing_sum = 0usize;
    for t in 1..=t_max + 1 {
        let m = (t - 1) - observed(t);
        if ledger.missing(t) != m {
            return Err(format!("|m_{t}| = {} but direct count is {m}", ledger.missing(t)));
        }
        if t <= t_max {
            let fresh = observed(t + 1) - observed(t);
            if ledger.arrivals(t).len() != fresh {
                return Err(format!("bucket {t} has {} entries, expected {fresh}", ledger.arrivals(t).len()));
            }
            for &tau in ledger.arrivals(t) {
                if tau + delays[tau - 1] != t {
                    return Err(format!("round {tau} filed under bucket {t}"));
                }
            }
            let next = (t) - observed(t + 1);
            if next != m + 1 - fresh {
                return Err(format!("missing-count recurrence fails at {t}"));
            }
            aux += (m * fresh) as u128;
            missing_sum += m;
        }
    }
    if observed(t_max + 1) != t_max {
        return Err("not every gradient arrives by the end".into());
    }
    let d_tot = ledger.total_delay();
    if d_tot != delays.iter().sum::<usize>() {
        return Err("total delay mismatch".into());
    }
    if aux > 2 * d_tot as u128 {
        return Err(format!("aux sum {aux} exceeds 2 d_tot = {}", 2 * d_tot));
    }
    if missing_sum > d_tot {
        return Err(format!("sum of missing counts {missing_sum} exceeds d_tot {d_tot}"));
    }
    if !delay_aux_check(&ledger) {
        return Err("library aux check disagrees".into());
    }
    let sigma = (1..=t_max).map(|t| ledger.missing(t)).max().unwrap_or(0);
    if ledger.sigma_max() != sigma {
        return Err(format!("sigma_max {} vs {sigma}", ledger.sigma_max()));
    }
    Ok(())
}

fn ledger_case(rng: &mut ChaCha8Rng) -> CaseResult {
    let t_max = rng.random_range(1..=2000);
    ledger_identities(&random_delay_schedule(rng, t_max))
}

fn naive_xi(b: &[usize], t: usize) -> u64 {
    (t..=b.len())
        .map(|s| {
            let start = s - b[s - 1];
            if t > start {
                (t - start) as u64
            } else {
                0
            }
        })
        .sum()
}

pub fn xi_properties(lengths: &[usize]) -> CaseResult {
    let sched = MemorySchedule::new(lengths.to_vec()).map_err(|e| e.to_string())?;
    let big_b = lengths.iter().copied().max().unwrap_or(0) as u64;
    let sum_b2: u64 = lengths.iter().map(|&b| (b * b) as u64).sum();
    let mut total = 0;
    for t in 1..=lengths.len() {
        let xi = sched.xi(t);
        if xi != naive_xi(lengths, t) {
            return Err(format!("xi_{t} = {xi}, direct sum {}", naive_xi(lengths, t)));
        }
        if xi > big_b * big_b {
            return Err(format!("xi_{t} = {xi} exceeds B^2 = {}", big_b * big_b));
        }
        total += xi;
    }
    if sched.xi(lengths.len() + 1) != 0 {
        return Err("xi past the horizon must be zero".into());
    }
    if total > sum_b2 {
        return Err(format!("sum xi = {total} exceeds sum b^2 = {sum_b2}"));
    }
    if !xi_bounds_check(&sched) {
        return Err("library xi check disagrees".into());
    }
    Ok(())
}

fn random_memory_schedule(rng: &mut ChaCha8Rng, t_max: usize) -> Vec<usize> {
    let b_max = rng.random_range(0..=12);
    let style = rng.random_range(0..3);
    (1..=t_max)
        .map(|t| {
            let b = match style {
                0 => rng.random_range(0..=b_max),
                1 => (t - 1) % (b_max + 1),
                _ if rng.random_bool(0.05) => b_max,
                _ => 0,
            };
            b.min(t - 1)
        })
        .collect()
}

fn xi_case(rng: &mut ChaCha8Rng) -> CaseResult {
    let t_max = rng.random_range(1..=1000);
    xi_properties(&random_memory_schedule(rng, t_max))
}

fn grid_case(rng: &mut ChaCha8Rng) -> CaseResult {
    let p = if rng.random_bool(0.05) { 0.0 } else { log_uniform(rng, 1e-6, 1e6) };
    let v = if rng.random_bool(0.05) { 0.0 } else { log_uniform(rng, 1e-6, 1e6) };
    let eta_min = log_uniform(rng, 1e-6, 1.0);
    let eta_max = eta_min * log_uniform(rng, 1.0, 1e6);
    if !grid_tuning_check(p, v, eta_min, eta_max) {
        return Err(format!("tuning lemma fails for P={p} V={v} [{eta_min}, {eta_max}]"));
    }
    let t_max = rng.random_range(1..=1_000_000usize);
    let l = log_uniform(rng, 1e-2, 1e2);
    let rates = build_grid(l, Horizon::new(t_max).expect("positive"));
    let mut k = 0;
    while 4u64.pow(k) < t_max as u64 {
        k += 1;
    }
    if rates.len() != k as usize + 1 {
        return Err(format!("grid for T={t_max} has {} rates, expected {}", rates.len(), k + 1));
    }
    let first = 1.0 / (l * (t_max as f64).sqrt());
    if (rates[0] - first).abs() > 1e-12 * first || *rates.last().expect("nonempty") != 1.0 / l {
        return Err(format!("grid endpoints wrong for T={t_max}, L={l}"));
    }
    for w in rates.windows(2) {
        if !(w[1] > w[0] && w[1] <= 2.0 * w[0] * (1.0 + 1e-12)) {
            return Err(format!("grid spacing wrong for T={t_max}"));
        }
    }
    Ok(())
}

fn lemmas_case(rng: &mut ChaCha8Rng) -> CaseResult {
    prop1_case(rng, 200).map_err(|e| format!("explicit bound: {e}"))?;
    epoch_case(rng, 500).map_err(|e| format!("epoch decomposition: {e}"))?;
    let t_max = rng.random_range(1..=2000);
    ledger_identities(&random_delay_schedule(rng, t_max)).map_err(|e| format!("delay ledger: {e}"))?;
    let t_max = rng.random_range(1..=1000);
    xi_properties(&random_memory_schedule(rng, t_max)).map_err(|e| format!("xi: {e}"))?;
    Ok(())
}
