//! Runs one config across horizons and fits the regret growth rate.

use std::time::Instant;

use log::warn;
use movecost_core::regret::growth_slope;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::env::PRNG_ID;
use crate::error::LabError;
use crate::runner::run_experiment;

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub regrets: Vec<f64>,
    pub mean_regret: f64,
    pub mean_thm_shape: f64,
    /// `mean_regret / mean_thm_shape`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioStability {
    /// Largest `ratio(T_next) / ratio(T_prev)` over consecutive horizons.
    pub worst_step: f64,
    /// `ratio(T_last) / ratio(T_first)`.
    pub last_over_first: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
    pub prng: &'static str,
    pub replicates: usize,
    pub points: Vec<SweepPoint>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub dropped_points: usize,
    /// Why the slope is missing, when it is.
    pub slope_flag: Option<String>,
    pub ratio_stability: Option<RatioStability>,
    pub violations: Vec<String>,
    pub elapsed_ms: f64,
}

pub fn parse_horizons(text: &str) -> Result<Vec<usize>, LabError> {
    let horizons: Vec<usize> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| LabError::Config(format!("bad horizon {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(LabError::Config("horizons must be positive".into()));
    }
    Ok(horizons)
}

pub fn sweep(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<SweepReport, LabError> {
    if horizons.is_empty() {
        return Err(LabError::Config("sweep needs at least one horizon".into()));
    }
    cfg.validate()?;
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = horizons
        .iter()
        .flat_map(|&t| (0..cfg.replicates as u64).map(move |k| (t, cfg.seed.wrapping_add(k))))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(t, seed)| run_experiment(&cfg.with_horizon(t).with_seed(seed)).map(|o| o.summary))
        .collect::<Result<Vec<_>, _>>()?;

    let mut points = Vec::with_capacity(horizons.len());
    let mut violations = Vec::new();
    for (i, &t) in horizons.iter().enumerate() {
        let chunk = &runs[i * cfg.replicates..(i + 1) * cfg.replicates];
        for s in chunk {
            violations.extend(s.violations.iter().map(|v| format!("T={t} seed={}: {v}", s.seed)));
        }
        let n = chunk.len() as f64;
        let regrets: Vec<f64> = chunk.iter().map(|s| s.regret_asym).collect();
        let mean_regret = regrets.iter().sum::<f64>() / n;
        let mean_thm_shape = chunk.iter().map(|s| s.bounds.thm_shape).sum::<f64>() / n;
        points.push(SweepPoint {
            horizon: t,
            seeds: chunk.iter().map(|s| s.seed).collect(),
            regrets,
            mean_regret,
            mean_thm_shape,
            ratio: (mean_thm_shape > 0.0).then(|| mean_regret / mean_thm_shape),
        });
    }

    let data: Vec<(f64, f64)> = points.iter().map(|p| (p.horizon as f64, p.mean_regret)).collect();
    let (slope, intercept, dropped_points, slope_flag) = if points.len() < 2 {
        (None, None, 0, Some("fewer than two horizons".to_string()))
    } else {
        match growth_slope(&data) {
            Ok(fit) => {
                if fit.dropped > 0 {
                    warn!("dropped {} nonpositive regret points from the fit", fit.dropped);
                }
                (Some(fit.slope), Some(fit.intercept), fit.dropped, None)
            }
            Err(e) => (None, None, 0, Some(e.to_string())),
        }
    };
    let ratios: Option<Vec<f64>> = points.iter().map(|p| p.ratio).collect();
    let ratio_stability = ratios.filter(|r| r.len() >= 2).map(|r| RatioStability {
        worst_step: r.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max),
        last_over_first: r[r.len() - 1] / r[0],
    });
    Ok(SweepReport {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_ID,
        replicates: cfg.replicates,
        points,
        slope,
        intercept,
        dropped_points,
        slope_flag,
        ratio_stability,
        violations,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizons_parse() {
        assert_eq!(parse_horizons("256, 1024,4096").unwrap(), vec![256, 1024, 4096]);
        assert!(parse_horizons("12,x").is_err());
        assert!(parse_horizons("0").is_err());
    }

    #[test]
    fn single_point_is_flagged() {
        let cfg = ExperimentConfig::from_json(
            r#"{"name": "one", "T": 8, "algorithm": "batched_doubling",
                "environment": {"kind": "linear"},
                "comparator": {"kind": "best_fixed", "radius": 1.0}}"#,
        )
        .unwrap();
        let r = sweep(&cfg, &[64]).unwrap();
        assert!(r.slope.is_none());
        assert!(r.slope_flag.is_some());
        assert!(r.ratio_stability.is_none());
    }
}
