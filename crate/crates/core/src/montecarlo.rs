//! Stochastic simulation of last-iterate SGD on synthetic Gaussian data.
//!
//! Reproducibility contract: run `r` draws from `ChaCha8Rng` keyed by
//! `seed_from_u64(master_seed)` with `set_stream(r)`, so runs are independent
//! streams of one counter-based generator and every result is a pure function
//! of `(instance, schedule, config)` regardless of thread count. Within a
//! step the draw order is `z_1, ..., z_d, eps`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::schedule::Schedule;

/// Any |w_i| beyond this aborts the run with a divergence report. Far below
/// f64 overflow so the diagnostic fires before NaNs can propagate.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

/// Which iterate a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputVariant {
    /// The final iterate `w_N`.
    Last,
    /// Mean of `w_start, ..., w_(N-1)` (`N - start` iterates).
    TailAverage { start: usize },
}

/// Simulation parameters shared by all runs of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub runs: usize,
    pub master_seed: u64,
    pub variant: OutputVariant,
}

impl SimConfig {
    pub fn last(runs: usize, master_seed: u64) -> Self {
        Self {
            runs,
            master_seed,
            variant: OutputVariant::Last,
        }
    }
}

/// Sample mean and standard error of the excess risk over independent runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
    /// Set when any run diverged or produced a non-finite risk; `mean` and
    /// `stderr` are NaN in that case rather than averages of infinities.
    pub diverged: bool,
}

/// One SGD trajectory; returns the selected output iterate in eigenbasis
/// coordinates. Deterministic given `(config.master_seed, run_index)`.
pub fn run_sgd(
    instance: &ProblemInstance,
    schedule: &Schedule,
    config: &SimConfig,
    run_index: usize,
) -> Result<Vec<f64>> {
    debug_assert!(run_index < config.runs);
    let d = instance.dim();
    let n = schedule.horizon();
    let lambda = instance.spectrum().eigenvalues();
    let sqrt_lambda: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let w_star = instance.w_star();
    let sigma = instance.sigma2().sqrt();

    let avg_start = match config.variant {
        OutputVariant::Last => None,
        OutputVariant::TailAverage { start } => {
            if start >= n {
                return Err(Error::invalid(
                    "variant",
                    format!("tail average start {start} leaves no iterates before step {n}"),
                ));
            }
            Some(start)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(run_index as u64);

    let mut w = instance.w0().to_vec();
    let mut x = vec![0.0; d];
    let mut avg = vec![0.0; if avg_start.is_some() { d } else { 0 }];

    for t in 1..=n {
        let gamma = schedule.stepsize_at(t)?;
        if let Some(start) = avg_start {
            // w_(t-1) is the iterate before this step.
            if t > start {
                for i in 0..d {
                    avg[i] += w[i];
                }
            }
        }
        let mut y = 0.0;
        let mut pred = 0.0;
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let xi = sqrt_lambda[i] * z;
            x[i] = xi;
            y += w_star[i] * xi;
            pred += w[i] * xi;
        }
        let eps: f64 = rng.sample(StandardNormal);
        y += sigma * eps;

        let scale = gamma * (y - pred);
        let mut max_abs = 0.0f64;
        for i in 0..d {
            w[i] += scale * x[i];
            max_abs = max_abs.max(w[i].abs());
        }
        if max_abs.is_nan() || max_abs > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                run: run_index,
                t,
                gamma,
            });
        }
    }

    match avg_start {
        None => Ok(w),
        Some(start) => {
            let count = (n - start) as f64;
            Ok(avg.iter().map(|v| v / count).collect())
        }
    }
}

/// Exact conditional excess risk of a parameter vector:
/// `1/2 * sum_i lambda_i (w_i - w*_i)^2`. No test set is involved.
pub fn estimate_excess_risk(instance: &ProblemInstance, w: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), instance.dim());
    let lambda = instance.spectrum().eigenvalues();
    0.5 * lambda
        .iter()
        .zip(w.iter().zip(instance.w_star()))
        .map(|(l, (wi, si))| {
            let diff = wi - si;
            l * diff * diff
        })
        .sum::<f64>()
}

/// Mean and standard error of the excess risk over `config.runs` independent
/// trajectories. Runs execute in parallel; the reduction is in run order, so
/// the estimate does not depend on scheduling.
pub fn mc_risk(instance: &ProblemInstance, schedule: &Schedule, config: &SimConfig) -> McEstimate {
    let risks: Vec<Result<f64>> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_sgd(instance, schedule, config, r).map(|w| estimate_excess_risk(instance, &w)))
        .collect();

    let mut values = Vec::with_capacity(config.runs);
    for r in &risks {
        match r {
            Ok(v) if v.is_finite() => values.push(*v),
            _ => {
                return McEstimate {
                    mean: f64::NAN,
                    stderr: f64::NAN,
                    runs: config.runs,
                    diverged: true,
                }
            }
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    McEstimate {
        mean,
        stderr,
        runs: config.runs,
        diverged: false,
    }
}

/// Monte-Carlo check of the Gaussian fourth-moment identity.
///
/// Draws one random diagonal PSD matrix `A` from `seed`, estimates
/// `E[x x' A x x']` from `samples` feature draws, and compares entrywise
/// against `2 H A H + tr(H A) H`. Returns the maximum relative error over
/// entries whose exact value exceeds `1e-12 * trace^2`. Intended for small
/// dimensions (d <= 16).
pub fn verify_fourth_moment(instance: &ProblemInstance, samples: usize, seed: u64) -> f64 {
    let d = instance.dim();
    debug_assert!(instance.is_gaussian());
    debug_assert!(d <= 16);
    let lambda = instance.spectrum().eigenvalues();
    let sqrt_lambda: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();

    let mut est = vec![0.0; d * d];
    let mut x = vec![0.0; d];
    for _ in 0..samples {
        let mut quad = 0.0;
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[i] = sqrt_lambda[i] * z;
            quad += a[i] * x[i] * x[i];
        }
        for i in 0..d {
            let qi = quad * x[i];
            for j in 0..d {
                est[i * d + j] += qi * x[j];
            }
        }
    }
    let inv_n = 1.0 / samples as f64;
    let tr_ha: f64 = lambda.iter().zip(&a).map(|(l, ai)| l * ai).sum();
    let floor = 1e-12 * instance.spectrum().trace() * instance.spectrum().trace();

    let mut max_rel = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let exact = if i == j {
                2.0 * lambda[i] * lambda[i] * a[i] + tr_ha * lambda[i]
            } else {
                0.0
            };
            if exact.abs() > floor {
                let rel = (est[i * d + j] * inv_n - exact).abs() / exact.abs();
                max_rel = max_rel.max(rel);
            }
        }
    }
    max_rel
}
