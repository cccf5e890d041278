//! One experiment: environment -> reduction -> learner -> regret ledger.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::warn;
use movecost_core::batched::{BatchedLearner, LipschitzWrapper};
use movecost_core::cmd::{CmdLearner, CmdParams};
use movecost_core::delay::{DelayLedger, DelayReduction};
use movecost_core::grid::{GridLearner, GridParams};
use movecost_core::memory::{MemoryReduction, MemorySchedule};
use movecost_core::regret::{bound_shapes, prop1_bound, BoundReport, RegretTrace, RoundInput, ShapeKind};
use movecost_core::{Feedback, Horizon, OnlineLearner, RealVector};
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig};
use crate::env::{
    generate_delays, generate_memory, ComparatorSpec, ComparatorStream, LambdaStream, LossStream,
    PRNG_ID,
};
use crate::error::LabError;

pub const CSV_HEADER: [&str; 11] = [
    "t",
    "lambda_t",
    "loss",
    "move_cost",
    "comp_loss",
    "comp_move",
    "regret_asym",
    "regret_sym",
    "w_norm",
    "epoch_index",
    "current_L",
];

/// Slack for floating-point accumulation in the per-round identities.
const ACCOUNTING_TOL: f64 = 1e-9;

/// All realized sequences of one experiment.
#[derive(Debug, Clone)]
pub struct Streams {
    pub losses: LossStream,
    pub comparator: ComparatorStream,
    pub lambdas: LambdaStream,
    pub delays: Option<DelayLedger>,
    pub memory: Option<MemorySchedule>,
}

pub fn generate_streams(cfg: &ExperimentConfig) -> Result<Streams, LabError> {
    let (t, dim, seed, g) = (cfg.horizon, cfg.dim, cfg.seed, cfg.learner.g);
    let (losses, comparator) = if matches!(cfg.comparator, ComparatorSpec::BestFixed { .. }) {
        let placeholder = vec![RealVector::zeros(dim); t];
        let losses = LossStream::generate(&cfg.environment, g, dim, &placeholder, seed)?;
        let sum = losses.gradient_sum();
        let comparator = ComparatorStream::generate(&cfg.comparator, t, dim, sum.as_ref(), seed)?;
        (losses, comparator)
    } else {
        let comparator = ComparatorStream::generate(&cfg.comparator, t, dim, None, seed)?;
        let losses = LossStream::generate(&cfg.environment, g, dim, comparator.values(), seed)?;
        (losses, comparator)
    };
    let lambdas = LambdaStream::generate(&cfg.lambda, t, seed)?;
    let delays = cfg
        .delay
        .as_ref()
        .map(|d| generate_delays(d, t, seed).map(DelayLedger::build))
        .transpose()?;
    let memory = cfg
        .memory
        .as_ref()
        .map(|m| generate_memory(m, t, seed))
        .transpose()?;
    Ok(Streams {
        losses,
        comparator,
        lambdas,
        delays,
        memory,
    })
}

/// The movement-cost learners the runner can drive.
#[derive(Debug, Clone)]
pub enum Mover {
    Cmd(CmdLearner),
    Grid(GridLearner),
    Batched(BatchedLearner),
    Doubling(LipschitzWrapper),
}

impl Mover {
    pub fn restarts(&self) -> usize {
        match self {
            Mover::Doubling(w) => w.restart_count(),
            _ => 0,
        }
    }
}

impl OnlineLearner for Mover {
    fn decision(&self) -> &RealVector {
        match self {
            Mover::Cmd(l) => OnlineLearner::decision(l),
            Mover::Grid(l) => OnlineLearner::decision(l),
            Mover::Batched(l) => OnlineLearner::decision(l),
            Mover::Doubling(l) => OnlineLearner::decision(l),
        }
    }

    fn observe(&mut self, fb: &Feedback) -> movecost_core::Result<()> {
        match self {
            Mover::Cmd(l) => OnlineLearner::observe(l, fb),
            Mover::Grid(l) => OnlineLearner::observe(l, fb),
            Mover::Batched(l) => OnlineLearner::observe(l, fb),
            Mover::Doubling(l) => OnlineLearner::observe(l, fb),
        }
    }

    fn epoch_index(&self) -> usize {
        match self {
            Mover::Cmd(l) => OnlineLearner::epoch_index(l),
            Mover::Grid(l) => OnlineLearner::epoch_index(l),
            Mover::Batched(l) => OnlineLearner::epoch_index(l),
            Mover::Doubling(l) => OnlineLearner::epoch_index(l),
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        match self {
            Mover::Cmd(l) => OnlineLearner::lipschitz(l),
            Mover::Grid(l) => OnlineLearner::lipschitz(l),
            Mover::Batched(l) => OnlineLearner::lipschitz(l),
            Mover::Doubling(l) => OnlineLearner::lipschitz(l),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    pub m_tilde: f64,
    pub p_tilde_thm1: f64,
    pub p_tilde_thm2: f64,
    pub thm1_shape: f64,
    pub thm2_shape: f64,
    pub delay_shape: Option<f64>,
    pub memory_shape: Option<f64>,
    pub prop1_rhs: Option<f64>,
    pub thm_shape: f64,
    pub ratio: Option<f64>,
    pub epsilon: f64,
    pub lipschitz: f64,
}

impl BoundSummary {
    fn new(r: BoundReport, epsilon: f64, lipschitz: f64) -> Self {
        Self {
            m_tilde: r.m_tilde,
            p_tilde_thm1: r.p_tilde_thm1,
            p_tilde_thm2: r.p_tilde_thm2,
            thm1_shape: r.thm1_shape,
            thm2_shape: r.thm2_shape,
            delay_shape: r.delay_shape,
            memory_shape: r.memory_shape,
            prop1_rhs: r.prop1_rhs,
            thm_shape: r.thm_shape,
            ratio: r.ratio,
            epsilon,
            lipschitz,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1Summary {
    pub eta: f64,
    pub epsilon0: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub lambda_max: f64,
    pub rhs: f64,
    pub precondition_met: bool,
    pub certified: bool,
}

/// Running totals of the memory-to-movement surrogate.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SurrogateSummary {
    pub linear: f64,
    pub movement: f64,
    pub path_term: f64,
    pub bound: f64,
    pub holds_every_round: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
    pub prng: &'static str,
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub regret_asym: f64,
    pub regret_sym: f64,
    pub total_loss: f64,
    pub comparator_loss: f64,
    pub total_move_cost: f64,
    pub comparator_move_cost: f64,
    pub learner_path_length: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "P_T")]
    pub path_length: f64,
    pub lambda_max: f64,
    /// `lambda_max P_T`, the largest possible gap between the two regrets.
    pub symmetric_gap_bound: f64,
    pub gradient_max_norm: f64,
    pub sigma_max: Option<usize>,
    pub d_tot: Option<usize>,
    #[serde(rename = "B")]
    pub memory_max: Option<usize>,
    pub sum_b_squared: Option<u64>,
    #[serde(rename = "required_L")]
    pub required_lipschitz: Option<f64>,
    #[serde(rename = "final_L")]
    pub final_lipschitz: Option<f64>,
    pub restarts: usize,
    pub final_epoch_index: usize,
    pub bounds: BoundSummary,
    pub prop1: Option<Prop1Summary>,
    pub memory_surrogate: Option<SurrogateSummary>,
    /// Runtime assertions that failed; non-empty means exit code 3.
    pub violations: Vec<String>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RegretTrace,
    pub summary: Summary,
}

fn build_learner(
    kind: Algorithm,
    fixed_l: Option<f64>,
    guess: f64,
    cfg: &ExperimentConfig,
    lambda_max: f64,
) -> Result<Mover, LabError> {
    let horizon = Horizon::new(cfg.horizon)?;
    let (eps, dim) = (cfg.learner.epsilon, cfg.dim);
    Ok(match kind {
        Algorithm::Cmd => {
            let eta = cfg.learner.eta.unwrap_or(1.0 / (cfg.learner.g + lambda_max));
            Mover::Cmd(CmdLearner::new(CmdParams::new(eps, eta, horizon)?, dim))
        }
        Algorithm::Grid => Mover::Grid(GridLearner::new(
            GridParams::new(fixed_l.expect("validated"), eps, horizon)?,
            dim,
        )?),
        _ => match fixed_l {
            Some(l) if kind != Algorithm::BatchedDoubling => {
                Mover::Batched(BatchedLearner::new(l, eps, horizon, dim)?)
            }
            _ => Mover::Doubling(LipschitzWrapper::new(fixed_l.unwrap_or(guess), eps, horizon, dim)?),
        },
    })
}

struct Round<'a> {
    t: usize,
    decision: &'a RealVector,
    comparator: &'a RealVector,
    loss: f64,
    comparator_loss: f64,
    lambda: f64,
    next_lambda: f64,
    gradient_norm: f64,
}

fn status(learner: &Mover) -> (usize, Option<f64>) {
    (learner.epoch_index(), learner.lipschitz())
}

/// Appends a round and checks the prefix identity between the two regrets.
fn account(
    trace: &mut RegretTrace,
    (epoch_index, current_l): (usize, Option<f64>),
    r: Round<'_>,
    comp_moves: &mut f64,
    violations: &mut Vec<String>,
) -> Result<(), LabError> {
    let rec = trace.account(
        r.t,
        RoundInput {
            decision: r.decision,
            comparator: r.comparator,
            loss: r.loss,
            comparator_loss: r.comparator_loss,
            lambda: r.lambda,
            next_lambda: r.next_lambda,
            gradient_norm: r.gradient_norm,
            epoch_index,
            current_l,
        },
    )?;
    *comp_moves += rec.comp_move;
    let gap = rec.regret_asym - rec.regret_sym - *comp_moves;
    if gap.abs() > ACCOUNTING_TOL * (1.0 + rec.regret_asym.abs()) && violations.is_empty() {
        violations.push(format!("regret identity broken at round {} by {gap}", r.t));
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    cfg.validate()?;
    let start = Instant::now();
    let streams = generate_streams(cfg)?;
    run_with_streams(cfg, &streams, start)
}

pub fn run_with_streams(
    cfg: &ExperimentConfig,
    s: &Streams,
    start: Instant,
) -> Result<RunOutcome, LabError> {
    let t_max = cfg.horizon;
    let g = cfg.learner.g;
    let lambda_max = s.lambdas.max();
    let comparator = s.comparator.values();
    let mut trace = RegretTrace::new();
    let mut violations = Vec::new();
    let mut comp_moves = 0.0;
    let mut required_l = None;
    let mut surrogate = None;

    let learner = match cfg.algorithm {
        Algorithm::Delay => {
            let ledger = s.delays.clone().expect("validated");
            let need = ledger.required_lipschitz(g, lambda_max);
            required_l = Some(need);
            if let Some(l) = cfg.learner.lipschitz.filter(|&l| l < need) {
                warn!("L = {l} is below G(1 + 3 sigma_max) + 2 lambda_max = {need}");
            }
            let inner = build_learner(cfg.algorithm, cfg.learner.lipschitz, g, cfg, lambda_max)?;
            let mut red = DelayReduction::new(ledger, inner, g)?;
            let mut pending: Vec<Option<RealVector>> = vec![None; t_max];
            for t in 1..=t_max {
                let w = red.decision().clone();
                let u = &comparator[t - 1];
                let grad = s.losses.subgradient(t, &w);
                account(
                    &mut trace,
                    status(red.inner()),
                    Round {
                        t,
                        decision: &w,
                        comparator: u,
                        loss: s.losses.loss(t, &w),
                        comparator_loss: s.losses.loss(t, u),
                        lambda: s.lambdas.at(t),
                        next_lambda: s.lambdas.at(t + 1),
                        gradient_norm: grad.norm(),
                    },
                    &mut comp_moves,
                    &mut violations,
                )?;
                pending[t - 1] = Some(grad);
                let arrived: Vec<RealVector> = red
                    .ledger()
                    .arrivals(t)
                    .iter()
                    .map(|&tau| pending[tau - 1].take().expect("each gradient arrives once"))
                    .collect();
                red.step(t, &arrived, s.lambdas.at(t + 1))?;
            }
            red.inner().clone()
        }
        Algorithm::Memory => {
            let schedule = s.memory.clone().expect("validated");
            let h = cfg.learner.h.unwrap_or(g);
            let need = schedule.required_lipschitz(h, g);
            required_l = Some(need);
            if let Some(l) = cfg.learner.lipschitz.filter(|&l| l < need) {
                warn!("L = {l} is below H + 2 G B^2 = {need}");
            }
            if h < s.losses.lipschitz() {
                warn!("H = {h} is below the unary gradient bound {}", s.losses.lipschitz());
            }
            let b_max = schedule.max_length() as f64;
            let inner = build_learner(cfg.algorithm, cfg.learner.lipschitz, h, cfg, 0.0)?;
            let mut red = MemoryReduction::new(schedule.clone(), inner, g)?;
            let mut sur = SurrogateSummary {
                holds_every_round: true,
                ..Default::default()
            };
            let mut path = 0.0;
            let mut prev_w: Option<RealVector> = None;
            for t in 1..=t_max {
                let w = red.decision().clone();
                let u = &comparator[t - 1];
                let state = status(red.inner());
                let fb = red.step(&s.losses, t)?;
                let window = red.last_window();
                let b = schedule.length(t);
                let u_window = &comparator[t - 1 - b..t];
                account(
                    &mut trace,
                    state,
                    Round {
                        t,
                        decision: &w,
                        comparator: u,
                        loss: s.losses.window_loss(t, &window),
                        comparator_loss: s.losses.window_loss(t, u_window),
                        lambda: 0.0,
                        next_lambda: 0.0,
                        gradient_norm: fb.gradient.norm(),
                    },
                    &mut comp_moves,
                    &mut violations,
                )?;
                sur.linear += fb.gradient.dot(&w.sub(u)?)?;
                if let Some(prev) = &prev_w {
                    sur.movement += g * schedule.xi(t) as f64 * w.distance(prev)?;
                }
                path += trace.rows()[t - 1].u_step;
                sur.path_term = g * path * b_max * b_max;
                sur.bound = sur.linear + sur.movement + sur.path_term;
                let regret = trace.regret_asym();
                if regret > sur.bound + ACCOUNTING_TOL * (1.0 + sur.bound.abs()) && sur.holds_every_round {
                    sur.holds_every_round = false;
                    violations.push(format!(
                        "memory surrogate fails at round {t}: regret {regret} > {}",
                        sur.bound
                    ));
                }
                prev_w = Some(w);
            }
            surrogate = Some(sur);
            red.inner().clone()
        }
        _ => {
            if cfg.algorithm == Algorithm::Batched {
                let need = g + 2.0 * lambda_max;
                required_l = Some(need);
                if let Some(l) = cfg.learner.lipschitz.filter(|&l| l < need) {
                    warn!("L = {l} is below G + 2 lambda_max = {need}");
                }
            }
            let mut learner = build_learner(cfg.algorithm, cfg.learner.lipschitz, g, cfg, lambda_max)?;
            for t in 1..=t_max {
                let w = learner.decision().clone();
                let u = &comparator[t - 1];
                let grad = s.losses.subgradient(t, &w);
                account(
                    &mut trace,
                    status(&learner),
                    Round {
                        t,
                        decision: &w,
                        comparator: u,
                        loss: s.losses.loss(t, &w),
                        comparator_loss: s.losses.loss(t, u),
                        lambda: s.lambdas.at(t),
                        next_lambda: s.lambdas.at(t + 1),
                        gradient_norm: grad.norm(),
                    },
                    &mut comp_moves,
                    &mut violations,
                )?;
                learner.observe(&Feedback::new(grad, s.lambdas.at(t + 1))?)?;
            }
            learner
        }
    };

    let eps = cfg.learner.epsilon;
    let g_real = trace.gradient_max_norm();
    let g_bound = g.max(g_real);
    let mut prop1 = None;
    let (kind, lipschitz) = match (&learner, cfg.algorithm) {
        (Mover::Cmd(l), _) => {
            let params = *l.params();
            let b = prop1_bound(&trace, &params, g_bound, lambda_max);
            let certified = trace.regret_asym() <= b.rhs + ACCOUNTING_TOL * (1.0 + b.rhs.abs());
            if b.precondition_met && !certified {
                violations.push(format!(
                    "explicit single-rate bound violated: {} > {}",
                    trace.regret_asym(),
                    b.rhs
                ));
            }
            prop1 = Some(Prop1Summary {
                eta: params.eta(),
                epsilon0: params.epsilon0(),
                g: g_bound,
                lambda_max,
                rhs: b.rhs,
                precondition_met: b.precondition_met,
                certified,
            });
            (
                ShapeKind::Prop1 {
                    params,
                    g: g_bound,
                    lambda_max,
                },
                g_bound + lambda_max,
            )
        }
        (l, Algorithm::Delay) => (
            ShapeKind::Delay {
                g,
                total_delay: s.delays.as_ref().map_or(0, DelayLedger::total_delay) as f64,
            },
            l.lipschitz().unwrap_or(g),
        ),
        (l, Algorithm::Memory) => (
            ShapeKind::Memory {
                g,
                h: cfg.learner.h.unwrap_or(g),
                sum_squared_lengths: s.memory.as_ref().map_or(0, MemorySchedule::sum_squared_lengths) as f64,
            },
            l.lipschitz().unwrap_or(g),
        ),
        (l @ Mover::Grid(_), _) => (ShapeKind::Thm1, l.lipschitz().unwrap_or(g)),
        (l, _) => (ShapeKind::Thm2, l.lipschitz().unwrap_or(g)),
    };
    let report = bound_shapes(&trace, eps, lipschitz, kind);

    let rows = trace.rows();
    let summary = Summary {
        name: cfg.name.clone(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_ID,
        algorithm: cfg.algorithm,
        horizon: t_max,
        regret_asym: trace.regret_asym(),
        regret_sym: trace.regret_sym(),
        total_loss: rows.iter().map(|r| r.loss).sum(),
        comparator_loss: rows.iter().map(|r| r.comp_loss).sum(),
        total_move_cost: trace.total_move_cost(),
        comparator_move_cost: trace.comparator_move_cost(),
        learner_path_length: trace.learner_path_length(),
        m: s.comparator.max_norm(),
        path_length: s.comparator.path_length(),
        lambda_max,
        symmetric_gap_bound: lambda_max * s.comparator.path_length(),
        gradient_max_norm: g_real,
        sigma_max: s.delays.as_ref().map(DelayLedger::sigma_max),
        d_tot: s.delays.as_ref().map(DelayLedger::total_delay),
        memory_max: s.memory.as_ref().map(MemorySchedule::max_length),
        sum_b_squared: s.memory.as_ref().map(MemorySchedule::sum_squared_lengths),
        required_lipschitz: required_l,
        final_lipschitz: learner.lipschitz(),
        restarts: learner.restarts(),
        final_epoch_index: learner.epoch_index(),
        bounds: BoundSummary::new(report, eps, lipschitz),
        prop1,
        memory_surrogate: surrogate,
        violations,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutcome { trace, summary })
}

/// CSV rendering of a trace: LF line endings, shortest round-trip decimals.
pub fn trace_csv(trace: &RegretTrace) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in trace.rows() {
        let current_l = r.current_l.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([
            r.t.to_string(),
            r.lambda.to_string(),
            r.loss.to_string(),
            r.move_cost.to_string(),
            r.comp_loss.to_string(),
            r.comp_move.to_string(),
            r.regret_asym.to_string(),
            r.regret_sym.to_string(),
            r.w_norm.to_string(),
            r.epoch_index.to_string(),
            current_l,
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn summary_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("summary serializes");
    out.push(b'\n');
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let io = |source| LabError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    const LINEAR: &str = r#"{
        "name": "linear", "T": 40, "algorithm": "batched_doubling",
        "environment": {"kind": "linear"},
        "comparator": {"kind": "fixed", "u": [0.5]}, "seed": 3
    }"#;

    #[test]
    fn zero_lambda_regrets_coincide() {
        let out = run_experiment(&cfg(LINEAR)).unwrap();
        assert_eq!(out.summary.regret_asym, out.summary.regret_sym);
        assert!(out.summary.violations.is_empty());
        assert_eq!(out.trace.len(), 40);
    }

    #[test]
    fn csv_has_header_and_one_row_per_round() {
        let out = run_experiment(&cfg(LINEAR)).unwrap();
        let text = String::from_utf8(trace_csv(&out.trace)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 41);
        assert!(!text.contains('\r'));
        assert!(lines[1].starts_with("1,0,"));
    }

    #[test]
    fn cmd_runs_certify_the_explicit_bound() {
        let text = LINEAR
            .replace("batched_doubling", "cmd")
            .replace("\"seed\": 3", "\"seed\": 3, \"lambda\": {\"kind\": \"uniform_random\", \"max\": 0.5}");
        let out = run_experiment(&cfg(&text)).unwrap();
        let p = out.summary.prop1.unwrap();
        assert!(p.precondition_met && p.certified);
        assert_eq!(out.summary.final_lipschitz, None);
        let last = String::from_utf8(trace_csv(&out.trace)).unwrap();
        assert!(last.lines().last().unwrap().ends_with(','));
    }
}
