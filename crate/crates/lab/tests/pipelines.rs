use movecost_lab::env::{DelaySpec, EnvironmentSpec, MemorySpec};
use movecost_lab::runner::{run_experiment, trace_csv};
use movecost_lab::ExperimentConfig;

fn base(algorithm: &str, env: &str, comparator: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"name": "p", "T": 400, "dim": 2, "algorithm": "{algorithm}",
            "learner": {{"L": 6.0}},
            "environment": {env}, "comparator": {comparator},
            "lambda": {{"kind": "zero"}}, "seed": {seed}}}"#
    ))
    .unwrap()
}

fn csv_text(trace: &movecost_core::regret::RegretTrace) -> String {
    String::from_utf8(trace_csv(trace)).unwrap()
}

fn delayed(mut cfg: ExperimentConfig, spec: DelaySpec) -> ExperimentConfig {
    cfg.algorithm = serde_json::from_str("\"delay\"").unwrap();
    cfg.delay = Some(spec);
    cfg
}

#[test]
fn zero_delay_trace_equals_direct_trace() {
    let envs = [
        (r#"{"kind": "tracking", "noise": 0.2}"#, r#"{"kind": "random_walk", "step": 0.05, "radius": 1.5}"#),
        (r#"{"kind": "linear"}"#, r#"{"kind": "best_fixed", "radius": 1.0}"#),
        (r#"{"kind": "tracking", "noise": 0.0}"#, r#"{"kind": "piecewise_constant", "switches": 4, "radius": 1.0}"#),
    ];
    for (env, comp) in envs {
        for seed in [1, 2, 3] {
            let direct = base("batched", env, comp, seed);
            let via_delay = delayed(direct.clone(), DelaySpec::Constant { d: 0 });
            let a = run_experiment(&direct).unwrap();
            let b = run_experiment(&via_delay).unwrap();
            assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace), "{env} seed {seed}");
        }
    }
}

#[test]
fn zero_delay_with_movement_costs_equals_direct() {
    let mut direct = base(
        "batched",
        r#"{"kind": "tracking", "noise": 0.1}"#,
        r#"{"kind": "fixed", "u": [0.5, -0.5]}"#,
        5,
    );
    direct.lambda = serde_json::from_str(r#"{"kind": "uniform_random", "max": 1.0}"#).unwrap();
    let via_delay = delayed(direct.clone(), DelaySpec::Constant { d: 0 });
    let a = run_experiment(&direct).unwrap();
    let b = run_experiment(&via_delay).unwrap();
    assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
}

#[test]
fn memoryless_game_equals_direct_tracking() {
    let comp = r#"{"kind": "piecewise_constant", "switches": 3, "radius": 1.0}"#;
    let direct = base("batched", r#"{"kind": "tracking", "noise": 0.0}"#, comp, 8);
    let mut memory = direct.clone();
    memory.algorithm = serde_json::from_str("\"memory\"").unwrap();
    memory.environment = EnvironmentSpec::MemoryTracking;
    memory.memory = Some(MemorySpec::Constant { b: 0 });
    let a = run_experiment(&direct).unwrap();
    let b = run_experiment(&memory).unwrap();
    assert_eq!(csv_text(&a.trace), csv_text(&b.trace));
}

#[test]
fn delayed_runs_respect_schedules() {
    for spec in [
        DelaySpec::Constant { d: 7 },
        DelaySpec::Uniform { max: 20 },
        DelaySpec::Bursty {
            probability: 0.1,
            long: 50,
        },
    ] {
        let cfg = delayed(
            base(
                "batched",
                r#"{"kind": "tracking", "noise": 0.1}"#,
                r#"{"kind": "fixed", "u": [1.0, 0.0]}"#,
                2,
            ),
            spec,
        );
        let mut doubling = cfg.clone();
        doubling.learner.lipschitz = None;
        for c in [cfg, doubling] {
            let out = run_experiment(&c).unwrap();
            assert!(out.summary.violations.is_empty());
            assert_eq!(out.trace.len(), 400);
            assert!(out.summary.d_tot.unwrap() > 0);
            assert!(out.summary.required_lipschitz.unwrap() >= 1.0);
        }
    }
}

#[test]
fn memory_surrogate_holds_on_varied_schedules() {
    let schedules = [
        r#"{"kind": "constant", "b": 3}"#,
        r#"{"kind": "periodic", "max": 4}"#,
        r#"{"kind": "random", "max": 6}"#,
    ];
    let comparators = [
        r#"{"kind": "piecewise_constant", "switches": 5, "radius": 1.0}"#,
        r#"{"kind": "random_walk", "step": 0.05, "radius": 2.0}"#,
    ];
    for (i, memory) in schedules.into_iter().enumerate() {
        for comparator in comparators {
            for learner in [r#"{"L": 40.0}"#, "{}"] {
                let cfg = ExperimentConfig::from_json(&format!(
                    r#"{{"name": "m", "T": 400, "dim": 2, "algorithm": "memory",
                        "learner": {learner}, "environment": {{"kind": "memory_tracking"}},
                        "comparator": {comparator}, "memory": {memory}, "seed": {i}}}"#
                ))
                .unwrap();
                let out = run_experiment(&cfg).unwrap();
                let s = out.summary.memory_surrogate.clone().unwrap();
                assert!(s.holds_every_round, "{memory} {comparator}");
                assert!(out.summary.regret_asym <= s.bound + 1e-9 * (1.0 + s.bound.abs()));
                assert!(out.summary.violations.is_empty());
            }
        }
    }
}

#[test]
fn single_rate_runs_certify_explicit_bound() {
    for seed in 0..20 {
        let mut cfg = base(
            "cmd",
            r#"{"kind": "linear"}"#,
            r#"{"kind": "random_walk", "step": 0.1, "radius": 3.0}"#,
            seed,
        );
        cfg.learner.lipschitz = None;
        cfg.lambda = serde_json::from_str(r#"{"kind": "bursty", "base": 0.2, "peak": 2.0, "probability": 0.1}"#).unwrap();
        let out = run_experiment(&cfg).unwrap();
        let p = out.summary.prop1.unwrap();
        assert!(p.precondition_met);
        assert!(p.certified, "seed {seed}: {} > {}", out.summary.regret_asym, p.rhs);
    }
}
