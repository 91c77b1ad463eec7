//! Experiment dispatch: builds the cell grid for each experiment kind,
//! computes cells (in parallel where they are independent), and renders
//! rows in canonical order so output bytes never depend on scheduling.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use sgdlab::bounds::{self, BoundReport};
use sgdlab::montecarlo::{mc_risk, McEstimate, OutputVariant, SimConfig};
use sgdlab::oracle::exact_trajectory;
use sgdlab::problem::{make_target, ProblemInstance, Spectrum, TargetKind};
use sgdlab::schedule::{default_phase_length, Schedule};

use crate::config::{ExperimentConfig, ExperimentKind, VariantSpec};
use crate::csvfmt::fmt_f64;
use crate::ratefit::fit_rate;

/// Renders the experiment's output bytes (CSV, or JSON for `bounds_table`).
pub fn render_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    cfg.validate(kind)?;
    match kind {
        ExperimentKind::ScheduleTrace => schedule_trace(cfg),
        ExperimentKind::ExactCurve => exact_curve(cfg),
        ExperimentKind::McSweep => mc_sweep(cfg),
        ExperimentKind::BoundsTable => bounds_table(cfg),
        ExperimentKind::Fig2 => fig2(cfg),
        ExperimentKind::Rates => rates(cfg),
        ExperimentKind::Compare => compare(cfg),
    }
}

fn built_instance(cfg: &ExperimentConfig) -> Result<ProblemInstance> {
    let spec = cfg
        .instance
        .as_ref()
        .context("instance: required")?;
    Ok(spec.build()?)
}

fn fallback_gamma0(cfg: &ExperimentConfig) -> f64 {
    cfg.gamma0_grid[0]
}

fn fallback_n(cfg: &ExperimentConfig) -> usize {
    *cfg.n_list.last().unwrap()
}

fn schedule_trace(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let policies = cfg.schedules_or_default(ExperimentKind::ScheduleTrace)?;
    let mut out = String::from("schedule,t,gamma_t\n");
    for policy in &policies {
        let sched = policy.build(fallback_gamma0(cfg), fallback_n(cfg))?;
        let label = policy.display_label();
        for (i, gamma) in sched.stepsizes().enumerate() {
            writeln!(out, "{label},{},{}", i + 1, fmt_f64(gamma)).unwrap();
        }
    }
    Ok(out.into_bytes())
}

fn exact_curve(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let instance = built_instance(cfg)?;
    let policies = cfg.schedules_or_default(ExperimentKind::ExactCurve)?;
    let mut out = String::from("schedule,t,gamma_t,bias,variance,excess_risk\n");
    for policy in &policies {
        let sched = policy.build(fallback_gamma0(cfg), fallback_n(cfg))?;
        let label = policy.display_label();
        let traj = exact_trajectory(&instance, &sched)?;
        for t in 0..traj.len() {
            let gamma = if t == 0 {
                String::new()
            } else {
                fmt_f64(sched.stepsize_at(t)?)
            };
            writeln!(
                out,
                "{label},{t},{gamma},{},{},{}",
                fmt_f64(traj.bias[t]),
                fmt_f64(traj.variance[t]),
                fmt_f64(traj.excess_risk[t])
            )
            .unwrap();
        }
    }
    Ok(out.into_bytes())
}

fn mc_sweep(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let instance = built_instance(cfg)?;
    let instance_id = cfg.instance_label();
    let policies = cfg.schedules_or_default(ExperimentKind::McSweep)?;

    struct Cell {
        label: String,
        n: usize,
        gamma0: f64,
        schedule: Schedule,
        sim: SimConfig,
    }
    let mut cells = Vec::new();
    for policy in &policies {
        for &n in &cfg.n_list {
            for &gamma0 in &cfg.gamma0_grid {
                let schedule = policy.build(gamma0, n)?;
                let variant = match cfg.sim.variant {
                    VariantSpec::Last => OutputVariant::Last,
                    VariantSpec::TailAverage => OutputVariant::TailAverage {
                        start: policy.resolve_s(n),
                    },
                };
                cells.push(Cell {
                    label: policy.display_label(),
                    n,
                    gamma0,
                    schedule,
                    sim: SimConfig {
                        runs: cfg.sim.runs,
                        master_seed: cfg.sim.master_seed,
                        variant,
                    },
                });
            }
        }
    }

    let estimates: Vec<McEstimate> = cells
        .par_iter()
        .map(|cell| mc_risk(&instance, &cell.schedule, &cell.sim))
        .collect();

    let mut out = String::from("instance_id,schedule,gamma0,N,runs,mean,stderr,diverged\n");
    for (cell, est) in cells.iter().zip(&estimates) {
        writeln!(
            out,
            "{instance_id},{},{},{},{},{},{},{}",
            cell.label,
            fmt_f64(cell.gamma0),
            cell.n,
            est.runs,
            fmt_f64(est.mean),
            fmt_f64(est.stderr),
            est.diverged
        )
        .unwrap();
    }
    Ok(out.into_bytes())
}

#[derive(Serialize)]
struct BoundsEntry {
    instance_id: String,
    schedule: String,
    gamma0: f64,
    #[serde(rename = "N")]
    n: usize,
    upper: Option<BoundReport>,
    lower: Option<BoundReport>,
}

fn bounds_table(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let instance = built_instance(cfg)?;
    let instance_id = cfg.instance_label();
    let policies = cfg.schedules_or_default(ExperimentKind::BoundsTable)?;
    let mut entries = Vec::new();
    for policy in &policies {
        for &n in &cfg.n_list {
            for &gamma0 in &cfg.gamma0_grid {
                let schedule = policy.build(gamma0, n)?;
                let (upper, lower) = match schedule.variant_name() {
                    "tail_geometric" => (
                        Some(bounds::upper_bound_geo(&instance, &schedule, None, None)?),
                        Some(bounds::lower_bound_geo(&instance, &schedule)?),
                    ),
                    "tail_polynomial" => {
                        (None, Some(bounds::lower_bound_poly(&instance, &schedule)?))
                    }
                    other => bail!(
                        "schedules: bounds_table needs tail_geometric or tail_polynomial, got {other}"
                    ),
                };
                entries.push(BoundsEntry {
                    instance_id: instance_id.clone(),
                    schedule: policy.display_label(),
                    gamma0,
                    n,
                    upper,
                    lower,
                });
            }
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&entries)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// The six benchmark panels: spectra `1/i` and `1/i^2` crossed with targets
/// `1`, `1/i`, `1/i^2`; well-specified noise `sigma2 = 1`, zero start.
pub fn fig2_panels(d: usize) -> Vec<(String, ProblemInstance)> {
    let spectra: [(&str, Vec<f64>); 2] = [
        ("inv", (1..=d).map(|i| 1.0 / i as f64).collect()),
        ("invsq", (1..=d).map(|i| 1.0 / (i as f64 * i as f64)).collect()),
    ];
    let targets = [
        ("ones", TargetKind::Ones),
        ("inv", TargetKind::Inv),
        ("invsq", TargetKind::InvSq),
    ];
    let mut panels = Vec::new();
    for (sl, values) in &spectra {
        for (tl, target) in &targets {
            let spectrum = Spectrum::new(values.clone()).unwrap();
            let w_star = make_target(*target, d);
            let instance = ProblemInstance::gaussian(spectrum, w_star, vec![0.0; d], 1.0).unwrap();
            panels.push((format!("{sl}_{tl}"), instance));
        }
    }
    panels
}

/// The four benchmark algorithm variants at horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig2Variant {
    TailAverage,
    ExpDecay,
    TailExpDecay,
    TailPolyDecay,
}

impl Fig2Variant {
    pub const ALL: [Fig2Variant; 4] = [
        Fig2Variant::TailAverage,
        Fig2Variant::ExpDecay,
        Fig2Variant::TailExpDecay,
        Fig2Variant::TailPolyDecay,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Fig2Variant::TailAverage => "tail_average",
            Fig2Variant::ExpDecay => "exp_decay",
            Fig2Variant::TailExpDecay => "tail_exp_decay",
            Fig2Variant::TailPolyDecay => "tail_poly_decay",
        }
    }

    pub fn build(self, gamma0: f64, n: usize) -> Result<(Schedule, OutputVariant)> {
        Ok(match self {
            Fig2Variant::TailAverage => (
                Schedule::constant(gamma0, n)?,
                OutputVariant::TailAverage { start: n / 2 },
            ),
            Fig2Variant::ExpDecay => (
                Schedule::tail_geometric(gamma0, n, 0, default_phase_length(n, 0)?)?,
                OutputVariant::Last,
            ),
            Fig2Variant::TailExpDecay => (
                Schedule::tail_geometric(gamma0, n, n / 2, default_phase_length(n, n / 2)?)?,
                OutputVariant::Last,
            ),
            Fig2Variant::TailPolyDecay => (
                Schedule::tail_polynomial(gamma0, n, n / 2, 1.0)?,
                OutputVariant::Last,
            ),
        })
    }
}

/// One benchmark cell: panel label, variant label, horizon, and the winning
/// `(gamma0, estimate)` pair when any grid point converged.
pub type GridBestRow = (String, &'static str, usize, Option<(f64, McEstimate)>);

/// Grid-best Monte-Carlo risk per (panel, variant, horizon). The selection
/// is a pure argmin over recorded means, skipping divergent cells; ties go
/// to the smaller stepsize.
pub fn fig2_grid_best(
    panels: &[(String, ProblemInstance)],
    variants: &[Fig2Variant],
    n_list: &[usize],
    gamma0_grid: &[f64],
    runs: usize,
    master_seed: u64,
) -> Result<Vec<GridBestRow>> {
    struct Job {
        panel: usize,
        schedule: Schedule,
        sim: SimConfig,
    }
    let mut jobs = Vec::new();
    let mut cell_of_job = Vec::new();
    let mut cells = Vec::new();
    for (p, (label, _)) in panels.iter().enumerate() {
        for &variant in variants {
            for &n in n_list {
                cells.push((label.clone(), variant.label(), n));
                for &gamma0 in gamma0_grid {
                    let (schedule, output) = variant.build(gamma0, n)?;
                    jobs.push(Job {
                        panel: p,
                        schedule,
                        sim: SimConfig {
                            runs,
                            master_seed,
                            variant: output,
                        },
                    });
                    cell_of_job.push(cells.len() - 1);
                }
            }
        }
    }

    let estimates: Vec<McEstimate> = jobs
        .par_iter()
        .map(|job| mc_risk(&panels[job.panel].1, &job.schedule, &job.sim))
        .collect();

    let mut best: Vec<Option<(f64, McEstimate)>> = vec![None; cells.len()];
    for ((job, est), &cell) in jobs.iter().zip(&estimates).zip(&cell_of_job) {
        if est.diverged || !est.mean.is_finite() {
            continue;
        }
        let better = match &best[cell] {
            None => true,
            Some((_, cur)) => est.mean < cur.mean,
        };
        if better {
            best[cell] = Some((job.schedule.gamma0(), *est));
        }
    }
    Ok(cells
        .into_iter()
        .zip(best)
        .map(|((panel, variant, n), b)| (panel, variant, n, b))
        .collect())
}

fn fig2(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let panels = fig2_panels(256);
    let rows = fig2_grid_best(
        &panels,
        &Fig2Variant::ALL,
        &cfg.n_list,
        &cfg.gamma0_grid,
        cfg.sim.runs,
        cfg.sim.master_seed,
    )?;
    let mut out = String::from("instance_id,variant,N,runs,best_gamma0,best_mean,best_stderr\n");
    for (panel, variant, n, best) in rows {
        let (g, mean, se) = match best {
            Some((g, est)) => (fmt_f64(g), fmt_f64(est.mean), fmt_f64(est.stderr)),
            None => (fmt_f64(f64::NAN), fmt_f64(f64::NAN), fmt_f64(f64::NAN)),
        };
        writeln!(out, "{panel},{variant},{n},{},{g},{mean},{se}", cfg.sim.runs).unwrap();
    }
    Ok(out.into_bytes())
}

/// Per-horizon tuned stepsize used by the rate experiment:
/// `1 / (4 alpha tr(H) log2 N)`.
pub fn rate_tuned_gamma0(instance: &ProblemInstance, n: usize) -> f64 {
    1.0 / (4.0 * instance.alpha() * instance.spectrum().trace() * (n as f64).log2())
}

/// Exact risk at each horizon under the tuned tail-geometric schedule.
pub fn rate_points(instance: &ProblemInstance, n_list: &[usize]) -> Result<Vec<(usize, f64, f64)>> {
    let points: Vec<Result<(usize, f64, f64)>> = n_list
        .par_iter()
        .map(|&n| {
            let gamma0 = rate_tuned_gamma0(instance, n);
            let s = n / 2;
            let k = default_phase_length(n, s)?;
            let schedule = Schedule::tail_geometric(gamma0, n, s, k)?;
            let risk = exact_trajectory(instance, &schedule)?.final_risk();
            Ok((n, gamma0, risk))
        })
        .collect();
    points.into_iter().collect()
}

fn rates(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let instance = built_instance(cfg)?;
    let instance_id = cfg.instance_label();
    let points = rate_points(&instance, &cfg.n_list)?;
    let fit = fit_rate(
        &points
            .iter()
            .map(|&(n, _, risk)| (n, risk))
            .collect::<Vec<_>>(),
    )?;
    let mut out = String::from("case,N,gamma0,risk,slope,intercept,r_squared\n");
    for (n, gamma0, risk) in points {
        writeln!(
            out,
            "{instance_id},{n},{},{},{},{},{}",
            fmt_f64(gamma0),
            fmt_f64(risk),
            fmt_f64(fit.slope),
            fmt_f64(fit.intercept),
            fmt_f64(fit.r_squared)
        )
        .unwrap();
    }
    Ok(out.into_bytes())
}

fn compare(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let instance = built_instance(cfg)?;
    let mut cells = Vec::new();
    for &n in &cfg.n_list {
        for &gamma0 in &cfg.gamma0_grid {
            cells.push((n, gamma0));
        }
    }
    let reports: Vec<Result<bounds::ComparisonReport>> = cells
        .par_iter()
        .map(|&(n, gamma0)| Ok(bounds::comparison_ratio(&instance, gamma0, n)?))
        .collect();
    let mut out = String::from("gamma0,N,r_n,exp_risk,poly_risk\n");
    for ((n, gamma0), report) in cells.iter().zip(reports) {
        let report = report?;
        writeln!(
            out,
            "{},{n},{},{},{}",
            fmt_f64(*gamma0),
            fmt_f64(report.r_n),
            fmt_f64(report.exp_risk),
            fmt_f64(report.poly_risk)
        )
        .unwrap();
    }
    Ok(out.into_bytes())
}
