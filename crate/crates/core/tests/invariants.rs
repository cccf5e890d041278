use movecost_core::batched::{epoch_decomposition_check, BatchedLearner, LipschitzWrapper};
use movecost_core::cmd::{CmdLearner, CmdParams};
use movecost_core::delay::{delay_aux_check, DelayLedger, DelayReduction, DelaySchedule};
use movecost_core::grid::{build_grid, grid_tuning_check, GridLearner, GridParams};
use movecost_core::memory::{xi_bounds_check, MemorySchedule};
use movecost_core::{Feedback, Horizon, OnlineLearner, RealVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> RealVector {
    RealVector::new((0..dim).map(|_| rng.random_range(-scale..=scale)).collect()).unwrap()
}

#[test]
fn grid_prediction_is_sum_of_standalone_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = 200;
    let horizon = Horizon::new(t).unwrap();
    let (l, eps, dim) = (3.0, 0.5, 3);
    let mut grid = GridLearner::new(GridParams::new(l, eps, horizon).unwrap(), dim).unwrap();
    let mut shadows: Vec<CmdLearner> = build_grid(l, horizon)
        .into_iter()
        .map(|eta| CmdLearner::new(CmdParams::new(eps, eta, horizon).unwrap(), dim))
        .collect();
    for round in 1..=t {
        let g = random_vector(&mut rng, dim, 1.0);
        let lambda = if round == t { 0.0 } else { rng.random_range(0.0..1.0) };
        let decision = grid.predict().clone();
        let mut sum = RealVector::zeros(dim);
        for s in &shadows {
            sum.add_assign(s.iterate()).unwrap();
        }
        assert!(decision.distance(&sum).unwrap() <= 1e-12 * (1.0 + sum.norm()));
        // linearized loss splits across instances
        let whole = g.dot(&decision).unwrap();
        let parts: f64 = shadows.iter().map(|s| g.dot(s.iterate()).unwrap()).sum();
        assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole.abs()));

        let fb = Feedback::new(g, lambda).unwrap();
        grid.update(&fb).unwrap();
        for s in &mut shadows {
            s.update(&fb).unwrap();
        }
        for (inst, s) in grid.instances().iter().zip(&shadows) {
            assert_eq!(inst.iterate(), s.iterate());
        }
        assert_eq!(grid.instances().len(), shadows.len());
    }
}

fn run_batched(seed: u64, t: usize, dim: usize) -> (BatchedLearner, Vec<(RealVector, f64, bool)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = BatchedLearner::new(4.0, 1.0, Horizon::new(t).unwrap(), dim).unwrap();
    let mut seen = Vec::new();
    for round in 1..=t {
        let g = random_vector(&mut rng, dim, 1.0);
        let lambda = if round == t { 0.0 } else { rng.random_range(0.0..1.0) };
        let before = b.predict().clone();
        let flushed = b.observe(&Feedback::new(g.clone(), lambda).unwrap()).unwrap();
        if !flushed {
            assert_eq!(b.predict(), &before);
            assert!(b.buffer().norm() <= lambda);
        } else {
            assert!(b.buffer().is_zero());
        }
        seen.push((g, lambda, flushed));
    }
    (b, seen)
}

#[test]
fn epoch_structure_invariants() {
    for seed in 0..100 {
        let dim = 1 + (seed as usize % 3);
        let (b, seen) = run_batched(seed, 500, dim);
        let log = b.epoch_log();
        assert!(epoch_decomposition_check(log), "seed {seed}");
        // epochs partition rounds 1..=last flush
        let flushed: usize = log.iter().map(|r| r.members.len()).sum();
        let last_flush = seen.iter().rposition(|s| s.2).map_or(0, |i| i + 1);
        assert_eq!(flushed, last_flush);
        assert_eq!(last_flush, seen.len(), "final zero lambda flushes the residual");

        let g_max = seen.iter().map(|s| s.0.norm()).fold(0.0, f64::max);
        let mut i = 0;
        for rec in log {
            let mut sum = RealVector::zeros(dim);
            for (k, m) in rec.members.iter().enumerate() {
                assert_eq!(m.gradient, seen[i].0);
                assert_eq!(m.next_lambda, seen[i].1);
                let lambda_t = if i == 0 { 0.0 } else { seen[i - 1].1 };
                assert_eq!(m.lambda, lambda_t);
                sum.add_assign(&m.gradient).unwrap();
                if k + 1 < rec.members.len() {
                    assert!(sum.norm() <= m.next_lambda);
                }
                i += 1;
            }
            assert_eq!(sum, rec.g_tilde);
            assert!(rec.g_tilde.norm() > rec.lambda_tilde_next);
            let lambda_in_epoch = rec.members.iter().map(|m| m.lambda).fold(0.0, f64::max);
            assert!(rec.g_tilde.norm() <= lambda_in_epoch + g_max + 1e-12);
        }
    }
}

#[test]
fn batched_decision_tracks_shadow_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let t = 300;
    let horizon = Horizon::new(t).unwrap();
    let mut b = BatchedLearner::new(2.0, 1.0, horizon, 2).unwrap();
    let mut shadow = GridLearner::new(GridParams::new(2.0, 1.0, horizon).unwrap(), 2).unwrap();
    let mut buffer = RealVector::zeros(2);
    for round in 1..=t {
        let g = random_vector(&mut rng, 2, 0.5);
        let lambda = if round == t { 0.0 } else { rng.random_range(0.0..1.5) };
        buffer.add_assign(&g).unwrap();
        if buffer.norm() > lambda {
            shadow.update(&Feedback::new(buffer.clone(), lambda).unwrap()).unwrap();
            buffer = RealVector::zeros(2);
        }
        b.observe(&Feedback::new(g, lambda).unwrap()).unwrap();
        assert_eq!(b.predict(), shadow.predict());
    }
}

#[test]
fn zero_gradient_stream_never_moves() {
    let t = 1000;
    let mut w = LipschitzWrapper::new(1.0, 1.0, Horizon::new(t).unwrap(), 2).unwrap();
    let mut moved = 0.0;
    let mut prev = w.predict().clone();
    for round in 1..=t {
        let lambda = if round == t { 0.0 } else { 1.0 };
        w.observe(&Feedback::new(RealVector::zeros(2), lambda).unwrap())
            .unwrap();
        moved += w.predict().distance(&prev).unwrap();
        prev = w.predict().clone();
    }
    assert_eq!(moved, 0.0);
}

#[test]
fn doubling_restarts_are_logarithmic() {
    // escalating lambda forces repeated doubling
    let t = 400;
    let guess = 0.5;
    let mut w = LipschitzWrapper::new(guess, 1.0, Horizon::new(t).unwrap(), 1).unwrap();
    let mut lambda_max: f64 = 0.0;
    let mut g_max: f64 = 0.0;
    for round in 1..=t {
        let lambda = if round == t { 0.0 } else { 1.02f64.powi(round as i32) * 0.01 };
        let g = if round % 2 == 0 { 1.0 } else { -1.0 };
        lambda_max = lambda_max.max(lambda);
        g_max = g_max.max(1.0);
        let before = w.current_lipschitz();
        w.observe(&Feedback::new(RealVector::from(g), lambda).unwrap())
            .unwrap();
        let ratio = w.current_lipschitz() / before;
        assert_eq!(ratio, 2f64.powi(ratio.log2().round() as i32));
        assert!(w.current_lipschitz() >= 1.0 + 2.0 * lambda);
    }
    let limit = ((g_max + 2.0 * lambda_max) / guess).log2() + 1.0;
    assert!(w.restart_count() >= 5);
    assert!(w.restart_count() as f64 <= limit);
}

// observed set o_t straight from the definition
fn observed(d: &[usize], t: usize) -> Vec<usize> {
    (1..=d.len()).filter(|&tau| tau + d[tau - 1] < t).collect()
}

fn random_delays(rng: &mut ChaCha8Rng, t: usize, d_max: usize) -> Vec<usize> {
    (1..=t).map(|s| rng.random_range(0..=d_max.min(t - s))).collect()
}

#[test]
fn ledger_matches_set_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let t = rng.random_range(1..120);
        let d = random_delays(&mut rng, t, 1 + case % 17);
        let ledger = DelayLedger::build(DelaySchedule::new(d.clone()).unwrap());
        for s in 1..=t + 1 {
            let o = observed(&d, s);
            assert_eq!(ledger.missing(s), s - 1 - o.len());
            if s <= t {
                let next = observed(&d, s + 1);
                let fresh: Vec<usize> = next.iter().copied().filter(|x| !o.contains(x)).collect();
                assert_eq!(ledger.arrivals(s), fresh.as_slice());
                assert_eq!(
                    ledger.missing(s + 1) + fresh.len(),
                    ledger.missing(s) + 1
                );
            }
        }
        assert_eq!(observed(&d, t + 1), (1..=t).collect::<Vec<_>>());
        let arrivals: usize = (1..=t).map(|s| ledger.arrivals(s).len()).sum();
        assert_eq!(arrivals, t);
        assert!(delay_aux_check(&ledger));
    }
}

#[test]
fn aux_lemma_holds_on_long_schedules() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let t = rng.random_range(1..=2000);
        let d_max = rng.random_range(0..200);
        let d = random_delays(&mut rng, t, d_max);
        let ledger = DelayLedger::build(DelaySchedule::new(d).unwrap());
        assert!(delay_aux_check(&ledger));
    }
}

#[test]
fn zero_delay_reduction_is_transparent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = 150;
    let horizon = Horizon::new(t).unwrap();
    let ledger = DelayLedger::build(DelaySchedule::new(vec![0; t]).unwrap());
    let mut red = DelayReduction::new(
        ledger,
        BatchedLearner::new(2.0, 1.0, horizon, 2).unwrap(),
        1.0,
    )
    .unwrap();
    let mut direct = BatchedLearner::new(2.0, 1.0, horizon, 2).unwrap();
    for round in 1..=t {
        let g = random_vector(&mut rng, 2, 1.0);
        let fb = red.step(round, std::slice::from_ref(&g), 0.0).unwrap();
        assert_eq!(fb.next_lambda, 0.0);
        direct.observe(&Feedback::new(g, 0.0).unwrap()).unwrap();
        assert_eq!(red.decision(), direct.predict());
    }
}

#[test]
fn delay_step_checks_bucket_and_order() {
    let ledger = DelayLedger::build(DelaySchedule::new(vec![1, 0, 0]).unwrap());
    let inner = BatchedLearner::new(1.0, 1.0, Horizon::new(3).unwrap(), 1).unwrap();
    let mut red = DelayReduction::new(ledger, inner, 2.0).unwrap();
    let g = |x: f64| RealVector::from(x);
    assert!(red.step(1, &[g(1.0)], 0.0).is_err());
    let fb = red.step(1, &[], 0.0).unwrap();
    assert!(fb.gradient.is_zero());
    assert_eq!(fb.next_lambda, 2.0);
    assert!(red.step(3, &[g(1.0)], 0.0).is_err());
    let fb = red.step(2, &[g(0.25), g(0.5)], 0.0).unwrap();
    assert_eq!(fb.gradient, g(0.75));
    assert_eq!(fb.next_lambda, 0.0);
    red.step(3, &[g(-1.0)], 0.0).unwrap();
    assert!(red.step(4, &[], 0.0).is_err());
}

#[test]
fn arrived_gradient_norm_is_bounded_by_missing_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let t = rng.random_range(5..300);
        let d = random_delays(&mut rng, t, 12);
        let ledger = DelayLedger::build(DelaySchedule::new(d).unwrap());
        let grads: Vec<RealVector> = (0..t).map(|_| random_vector(&mut rng, 2, 0.7)).collect();
        let g_bound = 0.7 * 2f64.sqrt();
        for s in 1..=t {
            let mut h = RealVector::zeros(2);
            for &tau in ledger.arrivals(s) {
                h.add_assign(&grads[tau - 1]).unwrap();
            }
            assert!(h.norm() <= g_bound * (ledger.missing(s) + 1) as f64 + 1e-12);
        }
    }
}

fn naive_xi(b: &[usize], t: usize) -> u64 {
    let t_max = b.len();
    let mut total = 0i64;
    for s in t..=t_max {
        let v = t as i64 - (s as i64 - b[s - 1] as i64);
        if t as i64 > s as i64 - b[s - 1] as i64 {
            total += v;
        }
    }
    total as u64
}

#[test]
fn xi_matches_naive_and_bounds_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let t = rng.random_range(1..400);
        let b: Vec<usize> = (1..=t).map(|s| rng.random_range(0..=(s - 1).min(5))).collect();
        let sched = MemorySchedule::new(b.clone()).unwrap();
        let big_b = sched.max_length() as u64;
        for s in 1..=t {
            assert_eq!(sched.xi(s), naive_xi(&b, s));
            assert!(sched.xi(s) <= big_b * (big_b + 1) / 2);
        }
        assert!(xi_bounds_check(&sched));
    }
}

proptest! {
    #[test]
    fn grid_tuning_lemma(p in 0.0f64..1e3, v in 0.0f64..1e3, lo in 1e-4f64..10.0, span in 1.0f64..1e4) {
        prop_assert!(grid_tuning_check(p, v, lo, lo * span));
    }

    #[test]
    fn wrapper_never_shrinks(gs in prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 1..60)) {
        let t = gs.len();
        let mut w = LipschitzWrapper::new(0.25, 1.0, Horizon::new(t).unwrap(), 1).unwrap();
        let mut last = w.current_lipschitz();
        for (i, (g, l)) in gs.into_iter().enumerate() {
            let l = if i + 1 == t { 0.0 } else { l };
            w.observe(&Feedback::new(RealVector::from(g), l).unwrap()).unwrap();
            prop_assert!(w.current_lipschitz() >= last);
            last = w.current_lipschitz();
        }
        prop_assert!(w.lipschitz().unwrap() == last);
    }
}
