//! Synthetic losses, comparators, movement coefficients and schedules.
//!
//! Every generator draws from its own ChaCha8 stream derived from the
//! experiment seed, so adding or removing one component never shifts the
//! random numbers seen by another.

use movecost_core::delay::DelaySchedule;
use movecost_core::memory::{MemorySchedule, UnaryOracle};
use movecost_core::RealVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// Recorded in every summary so runs can be replayed elsewhere.
pub const PRNG_ID: &str = "chacha8 (rand_chacha 0.9, seed_from_u64, stream per component)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Loss = 0,
    Comparator = 1,
    Lambda = 2,
    Delay = 3,
    Memory = 4,
}

pub fn component_rng(seed: u64, component: Component) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component as u64);
    rng
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform direction with magnitude uniform in `[radius/2, radius]`.
fn random_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> RealVector {
    loop {
        let raw = gaussian_vector(rng, dim);
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            let mag = radius * rng.random_range(0.5..=1.0);
            return RealVector::new(raw.iter().map(|x| x * mag / n).collect())
                .expect("finite point");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// `f_t(w) = <g_t, w>` with iid `+-G/sqrt(n)` coordinates.
    Linear,
    /// `f_t(w) = G ||w - c_t||` with `c_t = u_t + noise`.
    Tracking {
        #[serde(default)]
        noise: f64,
    },
    /// `f_t(x_0..x_b) = G/(b+1) sum_i ||x_i - z_t||` with `z_t = u_t`.
    MemoryTracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparatorSpec {
    Fixed { u: Vec<f64> },
    PiecewiseConstant { switches: usize, radius: f64 },
    RandomWalk { step: f64, radius: f64 },
    /// Fixed point of norm `radius` that minimizes the linear losses in
    /// hindsight. Only valid with the linear environment.
    BestFixed { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSpec {
    Zero,
    Constant { value: f64 },
    Bursty { base: f64, peak: f64, probability: f64 },
    UniformRandom { max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    /// `d_t = min(d, T - t)`.
    Constant { d: usize },
    Uniform { max: usize },
    Bursty { probability: f64, long: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemorySpec {
    /// `b_t = min(b, t - 1)`.
    Constant { b: usize },
    /// `b_t = (t - 1) mod (max + 1)`.
    Periodic { max: usize },
    Random { max: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum LossKind {
    Linear { gradients: Vec<RealVector> },
    Tracking { centers: Vec<RealVector> },
    MemoryTracking { centers: Vec<RealVector> },
}

/// A realized loss sequence `f_1..f_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossStream {
    kind: LossKind,
    g: f64,
    dim: usize,
}

fn linear_gradients(seed: u64, horizon: usize, dim: usize, g: f64) -> Vec<RealVector> {
    let mut rng = component_rng(seed, Component::Loss);
    let c = g / (dim as f64).sqrt();
    (0..horizon)
        .map(|_| {
            let v = (0..dim)
                .map(|_| if rng.random_bool(0.5) { c } else { -c })
                .collect();
            RealVector::new(v).expect("finite gradient")
        })
        .collect()
}

impl LossStream {
    /// `comparator` provides the centers of the tracking kinds and is ignored
    /// by the linear kind.
    pub fn generate(
        spec: &EnvironmentSpec,
        g: f64,
        dim: usize,
        comparator: &[RealVector],
        seed: u64,
    ) -> Result<Self, LabError> {
        if !(g.is_finite() && g > 0.0) {
            return Err(config_err("G must be positive and finite"));
        }
        if dim == 0 {
            return Err(config_err("dim must be at least 1"));
        }
        let horizon = comparator.len();
        if horizon == 0 {
            return Err(config_err("T must be at least 1"));
        }
        let kind = match spec {
            EnvironmentSpec::Linear => LossKind::Linear {
                gradients: linear_gradients(seed, horizon, dim, g),
            },
            EnvironmentSpec::Tracking { noise } => {
                if !(noise.is_finite() && *noise >= 0.0) {
                    return Err(config_err("tracking noise must be nonnegative"));
                }
                let mut rng = component_rng(seed, Component::Loss);
                let centers = comparator
                    .iter()
                    .map(|u| {
                        let e = gaussian_vector(&mut rng, dim);
                        let shift = RealVector::new(e.iter().map(|x| x * noise).collect())
                            .expect("finite noise");
                        u.add(&shift).expect("matching dims")
                    })
                    .collect();
                LossKind::Tracking { centers }
            }
            EnvironmentSpec::MemoryTracking => LossKind::MemoryTracking {
                centers: comparator.to_vec(),
            },
        };
        Ok(Self { kind, g, dim })
    }

    pub fn lipschitz(&self) -> f64 {
        self.g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        match &self.kind {
            LossKind::Linear { gradients } => gradients.len(),
            LossKind::Tracking { centers } | LossKind::MemoryTracking { centers } => centers.len(),
        }
    }

    pub fn is_memory(&self) -> bool {
        matches!(self.kind, LossKind::MemoryTracking { .. })
    }

    /// `f_t(w)`; for the memory kind this is the unary loss.
    pub fn loss(&self, t: usize, w: &RealVector) -> f64 {
        match &self.kind {
            LossKind::Linear { gradients } => gradients[t - 1].dot(w).expect("matching dims"),
            LossKind::Tracking { centers } | LossKind::MemoryTracking { centers } => {
                self.g * w.distance(&centers[t - 1]).expect("matching dims")
            }
        }
    }

    /// A subgradient of [`loss`](Self::loss) at `w`, zero at a kink.
    pub fn subgradient(&self, t: usize, w: &RealVector) -> RealVector {
        match &self.kind {
            LossKind::Linear { gradients } => gradients[t - 1].clone(),
            LossKind::Tracking { centers } | LossKind::MemoryTracking { centers } => {
                let diff = w.sub(&centers[t - 1]).expect("matching dims");
                let n = diff.norm();
                if n == 0.0 {
                    RealVector::zeros(self.dim)
                } else {
                    diff.scale(self.g / n).expect("finite subgradient")
                }
            }
        }
    }

    /// Loss of a decision window ordered oldest first. Non-memory kinds only
    /// look at the newest entry.
    pub fn window_loss(&self, t: usize, window: &[RealVector]) -> f64 {
        match &self.kind {
            LossKind::MemoryTracking { centers } => {
                let z = &centers[t - 1];
                let total: f64 = window
                    .iter()
                    .map(|x| x.distance(z).expect("matching dims"))
                    .sum();
                self.g * total / window.len() as f64
            }
            _ => self.loss(t, window.last().expect("non-empty window")),
        }
    }

    /// Sum of the linear gradients. `None` for the other kinds.
    pub fn gradient_sum(&self) -> Option<RealVector> {
        match &self.kind {
            LossKind::Linear { gradients } => {
                let mut s = RealVector::zeros(self.dim);
                for g in gradients {
                    s.add_assign(g).expect("finite sum");
                }
                Some(s)
            }
            _ => None,
        }
    }
}

impl UnaryOracle for LossStream {
    fn gradient_bound(&self) -> f64 {
        self.g
    }

    fn unary_gradient(&self, t: usize, w: &RealVector) -> RealVector {
        self.subgradient(t, w)
    }

    fn unary_loss(&self, t: usize, w: &RealVector) -> f64 {
        self.loss(t, w)
    }

    fn memory_loss(&self, t: usize, window: &[RealVector]) -> f64 {
        self.window_loss(t, window)
    }
}

/// A realized comparator sequence `u_1..u_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorStream {
    values: Vec<RealVector>,
}

impl ComparatorStream {
    /// `gradient_sum` is needed only by the best-fixed kind.
    pub fn generate(
        spec: &ComparatorSpec,
        horizon: usize,
        dim: usize,
        gradient_sum: Option<&RealVector>,
        seed: u64,
    ) -> Result<Self, LabError> {
        if horizon == 0 || dim == 0 {
            return Err(config_err("T and dim must be at least 1"));
        }
        let check_radius = |r: f64| {
            if r.is_finite() && r >= 0.0 {
                Ok(())
            } else {
                Err(config_err("comparator radius must be nonnegative"))
            }
        };
        let mut rng = component_rng(seed, Component::Comparator);
        let values = match spec {
            ComparatorSpec::Fixed { u } => {
                if u.len() != dim {
                    return Err(config_err(format!(
                        "fixed comparator has {} entries, dim is {dim}",
                        u.len()
                    )));
                }
                let u = RealVector::new(u.clone())
                    .map_err(|e| config_err(format!("fixed comparator: {e}")))?;
                vec![u; horizon]
            }
            ComparatorSpec::PiecewiseConstant { switches, radius } => {
                check_radius(*radius)?;
                let k = (*switches).min(horizon.saturating_sub(1));
                let mut starts: Vec<usize> = sample(&mut rng, horizon - 1, k)
                    .into_iter()
                    .map(|i| i + 2)
                    .collect();
                starts.sort_unstable();
                let mut current = random_point(&mut rng, dim, *radius);
                let mut next = starts.iter().peekable();
                (1..=horizon)
                    .map(|t| {
                        if next.peek() == Some(&&t) {
                            next.next();
                            current = random_point(&mut rng, dim, *radius);
                        }
                        current.clone()
                    })
                    .collect()
            }
            ComparatorSpec::RandomWalk { step, radius } => {
                check_radius(*radius)?;
                if !(step.is_finite() && *step >= 0.0) {
                    return Err(config_err("random walk step must be nonnegative"));
                }
                let scale = step / (dim as f64).sqrt();
                let mut current = random_point(&mut rng, dim, *radius);
                let mut out = Vec::with_capacity(horizon);
                for _ in 0..horizon {
                    out.push(current.clone());
                    let e = gaussian_vector(&mut rng, dim);
                    let moved = current
                        .add(&RealVector::new(e.iter().map(|x| x * scale).collect()).expect("finite"))
                        .expect("matching dims");
                    let n = moved.norm();
                    current = if n > *radius {
                        moved.scale(radius / n).expect("finite")
                    } else {
                        moved
                    };
                }
                out
            }
            ComparatorSpec::BestFixed { radius } => {
                check_radius(*radius)?;
                let s = gradient_sum
                    .ok_or_else(|| config_err("best_fixed comparator needs the linear environment"))?;
                let n = s.norm();
                let u = if n == 0.0 {
                    RealVector::zeros(dim)
                } else {
                    s.scale(-radius / n).expect("finite")
                };
                vec![u; horizon]
            }
        };
        Ok(Self { values })
    }

    pub fn values(&self) -> &[RealVector] {
        &self.values
    }

    /// `M = max_t ||u_t||`.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(RealVector::norm).fold(0.0, f64::max)
    }

    /// `P_T = sum_t ||u_t - u_{t-1}||` with `u_0 = 0`.
    pub fn path_length(&self) -> f64 {
        let first = self.values[0].norm();
        first
            + self
                .values
                .windows(2)
                .map(|p| p[1].distance(&p[0]).expect("matching dims"))
                .sum::<f64>()
    }
}

/// Movement coefficients `lambda_1..lambda_{T+1}` with zero endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaStream {
    values: Vec<f64>,
}

impl LambdaStream {
    pub fn generate(spec: &LambdaSpec, horizon: usize, seed: u64) -> Result<Self, LabError> {
        if horizon == 0 {
            return Err(config_err("T must be at least 1"));
        }
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(config_err(format!("lambda {name} must be nonnegative")))
            }
        };
        let mut rng = component_rng(seed, Component::Lambda);
        let mut values = vec![0.0; horizon + 1];
        match spec {
            LambdaSpec::Zero => {}
            LambdaSpec::Constant { value } => {
                nonneg(*value, "value")?;
                values[1..horizon].fill(*value);
            }
            LambdaSpec::Bursty {
                base,
                peak,
                probability,
            } => {
                nonneg(*base, "base")?;
                nonneg(*peak, "peak")?;
                if !(0.0..=1.0).contains(probability) {
                    return Err(config_err("burst probability must be in [0, 1]"));
                }
                for v in &mut values[1..horizon] {
                    *v = if rng.random_bool(*probability) { *peak } else { *base };
                }
            }
            LambdaSpec::UniformRandom { max } => {
                nonneg(*max, "max")?;
                for v in &mut values[1..horizon] {
                    *v = rng.random::<f64>() * max;
                }
            }
        }
        Ok(Self { values })
    }

    /// `lambda_t` for `t` in `1..=T+1`.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn generate_delays(spec: &DelaySpec, horizon: usize, seed: u64) -> Result<DelaySchedule, LabError> {
    let mut rng = component_rng(seed, Component::Delay);
    let raw: Vec<usize> = match spec {
        DelaySpec::Constant { d } => vec![*d; horizon],
        DelaySpec::Uniform { max } => (0..horizon).map(|_| rng.random_range(0..=*max)).collect(),
        DelaySpec::Bursty { probability, long } => {
            if !(0.0..=1.0).contains(probability) {
                return Err(config_err("delay burst probability must be in [0, 1]"));
            }
            (0..horizon)
                .map(|_| if rng.random_bool(*probability) { *long } else { 0 })
                .collect()
        }
    };
    let clamped = raw
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.min(horizon - (i + 1)))
        .collect();
    DelaySchedule::new(clamped).map_err(|e| config_err(format!("delay schedule: {e}")))
}

pub fn generate_memory(spec: &MemorySpec, horizon: usize, seed: u64) -> Result<MemorySchedule, LabError> {
    let mut rng = component_rng(seed, Component::Memory);
    let lengths = (1..=horizon)
        .map(|t| match spec {
            MemorySpec::Constant { b } => (*b).min(t - 1),
            MemorySpec::Periodic { max } => (t - 1) % (max + 1),
            MemorySpec::Random { max } => rng.random_range(0..=(*max).min(t - 1)),
        })
        .collect();
    MemorySchedule::new(lengths).map_err(|e| config_err(format!("memory schedule: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(t: usize, dim: usize) -> Vec<RealVector> {
        vec![RealVector::zeros(dim); t]
    }

    #[test]
    fn zero_lambda_recovers_plain_oco() {
        let l = LambdaStream::generate(&LambdaSpec::Zero, 50, 1).unwrap();
        assert!(l.values().iter().all(|&v| v == 0.0));
        assert_eq!(l.max(), 0.0);
        assert_eq!(l.values().len(), 51);
    }

    #[test]
    fn lambda_endpoints_are_zero() {
        for spec in [
            LambdaSpec::Constant { value: 2.0 },
            LambdaSpec::UniformRandom { max: 3.0 },
            LambdaSpec::Bursty {
                base: 0.1,
                peak: 5.0,
                probability: 0.3,
            },
        ] {
            let l = LambdaStream::generate(&spec, 20, 9).unwrap();
            assert_eq!(l.at(1), 0.0);
            assert_eq!(l.at(21), 0.0);
            assert!(l.values().iter().all(|&v| v >= 0.0));
        }
        let single = LambdaStream::generate(&LambdaSpec::Constant { value: 1.0 }, 1, 0).unwrap();
        assert_eq!(single.values(), &[0.0, 0.0]);
    }

    #[test]
    fn fixed_comparator_path_is_its_norm() {
        let c = ComparatorStream::generate(
            &ComparatorSpec::Fixed { u: vec![3.0, 4.0] },
            10,
            2,
            None,
            0,
        )
        .unwrap();
        assert_eq!(c.path_length(), 5.0);
        assert_eq!(c.max_norm(), 5.0);
    }

    #[test]
    fn piecewise_comparator_switches_at_most_k_times() {
        let spec = ComparatorSpec::PiecewiseConstant {
            switches: 5,
            radius: 2.0,
        };
        let c = ComparatorStream::generate(&spec, 300, 3, None, 4).unwrap();
        let changes = c.values().windows(2).filter(|p| p[0] != p[1]).count();
        assert_eq!(changes, 5);
        assert!(c.max_norm() <= 2.0 + 1e-12);
    }

    #[test]
    fn random_walk_stays_in_ball() {
        let spec = ComparatorSpec::RandomWalk {
            step: 0.5,
            radius: 1.0,
        };
        let c = ComparatorStream::generate(&spec, 500, 2, None, 4).unwrap();
        assert!(c.max_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn best_fixed_needs_linear_losses() {
        let spec = ComparatorSpec::BestFixed { radius: 1.0 };
        assert!(ComparatorStream::generate(&spec, 5, 1, None, 0).is_err());
        let losses = LossStream::generate(&EnvironmentSpec::Linear, 1.0, 1, &zeros(40, 1), 2).unwrap();
        let s = losses.gradient_sum().unwrap();
        let c = ComparatorStream::generate(&spec, 40, 1, Some(&s), 0).unwrap();
        let u = &c.values()[0];
        let total: f64 = (1..=40).map(|t| losses.loss(t, u)).sum();
        assert!((total + s.norm()).abs() < 1e-9 || s.norm() == 0.0);
    }

    #[test]
    fn constant_delay_total_is_clamped_sum() {
        let (t, d) = (100, 7);
        let sched = generate_delays(&DelaySpec::Constant { d }, t, 0).unwrap();
        let expected: usize = (1..=t).map(|s| d.min(t - s)).sum();
        assert_eq!(sched.total_delay(), expected);
    }

    #[test]
    fn periodic_memory_cycles() {
        let m = generate_memory(&MemorySpec::Periodic { max: 4 }, 12, 0).unwrap();
        assert_eq!(m.lengths(), &[0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1]);
    }

    #[test]
    fn linear_gradients_have_norm_g() {
        let l = LossStream::generate(&EnvironmentSpec::Linear, 2.0, 4, &zeros(30, 4), 5).unwrap();
        for t in 1..=30 {
            let g = l.subgradient(t, &RealVector::zeros(4));
            assert!((g.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tracking_kink_has_zero_subgradient() {
        let centers = vec![RealVector::new(vec![1.0, -1.0]).unwrap(); 3];
        let l = LossStream::generate(&EnvironmentSpec::Tracking { noise: 0.0 }, 1.5, 2, &centers, 0)
            .unwrap();
        assert!(l.subgradient(2, &centers[0]).is_zero());
        assert_eq!(l.loss(2, &centers[0]), 0.0);
    }

    #[test]
    fn memory_window_of_equal_points_is_unary() {
        let centers = vec![RealVector::from(0.5); 4];
        let l = LossStream::generate(&EnvironmentSpec::MemoryTracking, 2.0, 1, &centers, 0).unwrap();
        let w = RealVector::from(-1.0);
        let window = vec![w.clone(); 3];
        assert_eq!(l.window_loss(3, &window), l.unary_loss(3, &w));
    }

    #[test]
    fn component_streams_are_independent() {
        let mut a = component_rng(5, Component::Loss);
        let mut b = component_rng(5, Component::Comparator);
        let x: u64 = a.random();
        let y: u64 = b.random();
        assert_ne!(x, y);
        let mut a2 = component_rng(5, Component::Loss);
        assert_eq!(x, a2.random::<u64>());
    }
}
