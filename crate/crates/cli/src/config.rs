//! JSON experiment configuration.

use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use sgdlab::problem::{InstanceSpec, SpectrumSpec, TargetKind};
use sgdlab::schedule::{default_phase_length, Schedule};

/// Default grid-search values for the initial stepsize.
pub const DEFAULT_GAMMA0_GRID: [f64; 18] = [
    1e-4, 2e-4, 5e-4, 7e-4, 1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.2, 0.3, 0.5,
    0.8, 1.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ScheduleTrace,
    ExactCurve,
    McSweep,
    BoundsTable,
    Fig2,
    Rates,
    Compare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ScheduleTrace => "schedule_trace",
            ExperimentKind::ExactCurve => "exact_curve",
            ExperimentKind::McSweep => "mc_sweep",
            ExperimentKind::BoundsTable => "bounds_table",
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Rates => "rates",
            ExperimentKind::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    Last,
    /// Tail averaging; the averaging start is the schedule policy's constant
    /// phase (`s`) resolved at each horizon.
    TailAverage,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_variant")]
    pub variant: VariantSpec,
}

fn default_runs() -> usize {
    20
}

fn default_variant() -> VariantSpec {
    VariantSpec::Last
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            runs: default_runs(),
            master_seed: 0,
            variant: VariantSpec::Last,
        }
    }
}

/// A schedule template. `gamma0` and `N` may be left open and supplied by
/// the sweep grid; the constant phase can be fixed (`s`) or tied to the
/// horizon (`s_frac`, default 1/2 for the tail variants).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePolicy {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_frac: Option<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SchedulePolicy {
    pub fn bare(variant: &str) -> Self {
        SchedulePolicy {
            variant: variant.to_owned(),
            s: None,
            s_frac: None,
            k: None,
            a: None,
            gamma0: None,
            n: None,
            label: None,
        }
    }

    /// Constant-phase length at horizon `n`.
    pub fn resolve_s(&self, n: usize) -> usize {
        if let Some(s) = self.s {
            s
        } else {
            let frac = self.s_frac.unwrap_or(0.5);
            (n as f64 * frac) as usize
        }
    }

    pub fn build(&self, gamma0: f64, n: usize) -> Result<Schedule> {
        let gamma0 = self.gamma0.unwrap_or(gamma0);
        let n = self.n.unwrap_or(n);
        match self.variant.as_str() {
            "constant" => Ok(Schedule::constant(gamma0, n)?),
            "tail_geometric" => {
                let s = self.resolve_s(n);
                let k = match self.k {
                    Some(k) => k,
                    None => default_phase_length(n, s)?,
                };
                Ok(Schedule::tail_geometric(gamma0, n, s, k)?)
            }
            "tail_polynomial" => {
                let s = self.resolve_s(n);
                let a = match self.a {
                    Some(a) => a,
                    None => bail!("schedules[].a: required for tail_polynomial"),
                };
                Ok(Schedule::tail_polynomial(gamma0, n, s, a)?)
            }
            other => bail!("schedules[].variant: unknown variant {other:?}"),
        }
    }

    /// Stable CSV identifier for the policy.
    pub fn display_label(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        match self.variant.as_str() {
            "constant" => "constant".to_owned(),
            variant => {
                let s_part = match (self.s, self.s_frac) {
                    (Some(s), _) => format!("s{s}"),
                    (None, Some(f)) => format!("sfrac{f}"),
                    (None, None) => "sfrac0.5".to_owned(),
                };
                let mut label = format!("{variant}_{s_part}");
                if let Some(k) = self.k {
                    label.push_str(&format!("_K{k}"));
                }
                if let Some(a) = self.a {
                    label.push_str(&format!("_a{a}"));
                }
                label
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional in the file; must agree with the subcommand when present.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub schedules: Option<Vec<SchedulePolicy>>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_gamma0_grid")]
    pub gamma0_grid: Vec<f64>,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_n_list() -> Vec<usize> {
    vec![512, 1024, 2048, 4096]
}

fn default_gamma0_grid() -> Vec<f64> {
    DEFAULT_GAMMA0_GRID.to_vec()
}

impl ExperimentConfig {
    /// Built-in configuration for the subcommands that can run without a
    /// config file; `None` when a file is mandatory.
    pub fn default_for(kind: ExperimentKind) -> Option<Self> {
        match kind {
            ExperimentKind::ScheduleTrace => Some(ExperimentConfig {
                experiment: Some(kind),
                instance: None,
                schedules: Some(fig1_policies()),
                n_list: vec![4096],
                gamma0_grid: vec![1.0],
                sim: SimSpec::default(),
                output_path: None,
            }),
            ExperimentKind::Fig2 => Some(ExperimentConfig {
                experiment: Some(kind),
                instance: None,
                schedules: None,
                n_list: default_n_list(),
                gamma0_grid: default_gamma0_grid(),
                sim: SimSpec::default(),
                output_path: None,
            }),
            ExperimentKind::Rates => Some(ExperimentConfig {
                experiment: Some(kind),
                instance: Some(InstanceSpec {
                    spectrum: SpectrumSpec::Poly {
                        d: 4096,
                        param: 1.0,
                    },
                    target: TargetKind::Ones,
                    w0: Default::default(),
                    sigma2: 1.0,
                    alpha: 3.0,
                    beta: 1.0,
                }),
                schedules: None,
                n_list: vec![1024, 2048, 4096, 8192, 16384],
                gamma0_grid: default_gamma0_grid(),
                sim: SimSpec::default(),
                output_path: None,
            }),
            _ => None,
        }
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.experiment {
            if k != kind {
                bail!(
                    "experiment: config is for {:?} but the {:?} subcommand was invoked",
                    k.name(),
                    kind.name()
                );
            }
        }
        if self.gamma0_grid.is_empty() {
            bail!("gamma0_grid: must be non-empty");
        }
        for (i, g) in self.gamma0_grid.iter().enumerate() {
            if !g.is_finite() || *g <= 0.0 {
                bail!("gamma0_grid[{i}]: must be > 0, got {g}");
            }
        }
        if self.n_list.is_empty() {
            bail!("n_list: must be non-empty");
        }
        for (i, n) in self.n_list.iter().enumerate() {
            if *n == 0 {
                bail!("n_list[{i}]: must be >= 1");
            }
        }
        if self.sim.runs == 0 {
            bail!("sim.runs: must be >= 1");
        }
        let needs_instance = matches!(
            kind,
            ExperimentKind::ExactCurve
                | ExperimentKind::McSweep
                | ExperimentKind::BoundsTable
                | ExperimentKind::Rates
                | ExperimentKind::Compare
        );
        if needs_instance && self.instance.is_none() {
            bail!("instance: required for {}", kind.name());
        }
        let needs_schedules = matches!(
            kind,
            ExperimentKind::ExactCurve | ExperimentKind::McSweep | ExperimentKind::BoundsTable
        );
        if needs_schedules && self.schedules.as_deref().is_none_or(|s| s.is_empty()) {
            bail!("schedules: at least one schedule required for {}", kind.name());
        }
        if matches!(kind, ExperimentKind::Rates) {
            if self.n_list.len() < 3 {
                bail!("n_list: rates needs at least 3 sample sizes");
            }
            for w in self.n_list.windows(2) {
                if w[1] <= w[0] {
                    bail!("n_list: rates needs strictly increasing sample sizes");
                }
            }
        }
        if matches!(kind, ExperimentKind::Rates | ExperimentKind::Compare) {
            for (i, n) in self.n_list.iter().enumerate() {
                if *n < 4 {
                    bail!("n_list[{i}]: {} needs N >= 4", kind.name());
                }
            }
        }
        Ok(())
    }

    /// Schedule policies, falling back to the four standard decay shapes for
    /// `schedule_trace`.
    pub fn schedules_or_default(&self, kind: ExperimentKind) -> Result<Vec<SchedulePolicy>> {
        match &self.schedules {
            Some(s) if !s.is_empty() => Ok(s.clone()),
            _ if kind == ExperimentKind::ScheduleTrace => Ok(fig1_policies()),
            _ => bail!("schedules: required for {}", kind.name()),
        }
    }

    /// Identifier used in the `instance_id` CSV column.
    pub fn instance_label(&self) -> String {
        match &self.instance {
            None => "none".to_owned(),
            Some(spec) => instance_label(spec),
        }
    }
}

pub fn instance_label(spec: &InstanceSpec) -> String {
    let spectrum = match &spec.spectrum {
        SpectrumSpec::Poly { d, param } => format!("poly_r{param}_d{d}"),
        SpectrumSpec::Polylog { d, param } => format!("polylog_r{param}_d{d}"),
        SpectrumSpec::Exp { d, .. } => format!("exp_d{d}"),
        SpectrumSpec::Explicit { values } => format!("explicit_d{}", values.len()),
    };
    let target = match spec.target {
        TargetKind::Ones => "ones",
        TargetKind::Inv => "inv",
        TargetKind::InvSq => "inv_sq",
    };
    format!("{spectrum}_{target}_sig{}", spec.sigma2)
}

/// The four standard decay shapes at `gamma0 = 1`, `N = 4096`.
pub fn fig1_policies() -> Vec<SchedulePolicy> {
    let mut exp_decay = SchedulePolicy::bare("tail_geometric");
    exp_decay.s = Some(0);
    exp_decay.label = Some("exp_decay".to_owned());

    let mut tail_exp = SchedulePolicy::bare("tail_geometric");
    tail_exp.s_frac = Some(0.5);
    tail_exp.label = Some("tail_exp_decay".to_owned());

    let mut tail_poly_sqrt = SchedulePolicy::bare("tail_polynomial");
    tail_poly_sqrt.s_frac = Some(0.5);
    tail_poly_sqrt.a = Some(0.5);
    tail_poly_sqrt.label = Some("tail_poly_sqrt".to_owned());

    let mut tail_poly_inv = SchedulePolicy::bare("tail_polynomial");
    tail_poly_inv.s_frac = Some(0.5);
    tail_poly_inv.a = Some(1.0);
    tail_poly_inv.label = Some("tail_poly_inv".to_owned());

    vec![exp_decay, tail_exp, tail_poly_sqrt, tail_poly_inv]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_gamma0_grid_is_rejected_with_field_path() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"experiment":"fig2","gamma0_grid":[]}"#,
        )
        .unwrap();
        let err = cfg.validate(ExperimentKind::Fig2).unwrap_err().to_string();
        assert!(err.contains("gamma0_grid"), "{err}");
    }

    #[test]
    fn missing_instance_is_rejected() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment":"mc_sweep"}"#).unwrap();
        let err = cfg.validate(ExperimentKind::McSweep).unwrap_err().to_string();
        assert!(err.contains("instance"), "{err}");
    }

    #[test]
    fn experiment_kind_mismatch_is_rejected() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment":"fig2"}"#).unwrap();
        assert!(cfg.validate(ExperimentKind::Rates).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected_at_parse_time() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"gama0_grid":[1.0]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("gama0_grid"), "{err}");
    }

    #[test]
    fn policy_builds_and_labels() {
        let p: SchedulePolicy =
            serde_json::from_str(r#"{"variant":"tail_geometric","s_frac":0.5}"#).unwrap();
        let sched = p.build(0.5, 4096).unwrap();
        assert_eq!(sched.constant_phase(), 2048);
        assert_eq!(p.display_label(), "tail_geometric_sfrac0.5");

        let p: SchedulePolicy =
            serde_json::from_str(r#"{"variant":"tail_polynomial","s":8,"a":1.0}"#).unwrap();
        assert_eq!(p.display_label(), "tail_polynomial_s8_a1");
        assert!(p.build(0.5, 16).is_ok());

        let p = SchedulePolicy::bare("tail_polynomial");
        assert!(p.build(0.5, 16).is_err(), "missing a must fail");
    }

    #[test]
    fn defaults_exist_for_configless_subcommands() {
        for kind in [
            ExperimentKind::ScheduleTrace,
            ExperimentKind::Fig2,
            ExperimentKind::Rates,
        ] {
            let cfg = ExperimentConfig::default_for(kind).unwrap();
            cfg.validate(kind).unwrap();
        }
        assert!(ExperimentConfig::default_for(ExperimentKind::McSweep).is_none());
    }
}
