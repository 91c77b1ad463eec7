//! Stepsize schedules for steps `t = 1..=N`.
//!
//! Step 0 is the initial condition only; schedules are queried for `t >= 1`.
//! All three variants are non-increasing in `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay law applied after the constant phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `gamma_t = gamma0` for every step.
    Constant,
    /// `gamma0` for `t <= s`, then halved every `phase_len` steps:
    /// `gamma_t = gamma0 / 2^floor((t - s) / phase_len)`.
    TailGeometric { s: usize, phase_len: usize },
    /// `gamma0` for `t <= s`, then `gamma_t = gamma0 / (t - s)^exponent`
    /// with `exponent` in `[0, 1]`.
    TailPolynomial { s: usize, exponent: f64 },
}

/// A stepsize schedule over a fixed horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct Schedule {
    gamma0: f64,
    horizon: usize,
    decay: Decay,
}

impl Schedule {
    pub fn constant(gamma0: f64, horizon: usize) -> Result<Self> {
        Self::validate_common(gamma0, horizon)?;
        Ok(Self {
            gamma0,
            horizon,
            decay: Decay::Constant,
        })
    }

    pub fn tail_geometric(gamma0: f64, horizon: usize, s: usize, phase_len: usize) -> Result<Self> {
        Self::validate_common(gamma0, horizon)?;
        if s >= horizon {
            return Err(Error::invalid(
                "s",
                format!("constant phase s = {s} must be shorter than the horizon N = {horizon}"),
            ));
        }
        if phase_len == 0 {
            return Err(Error::invalid("K", "decay-phase length must be at least 1"));
        }
        Ok(Self {
            gamma0,
            horizon,
            decay: Decay::TailGeometric { s, phase_len },
        })
    }

    pub fn tail_polynomial(gamma0: f64, horizon: usize, s: usize, exponent: f64) -> Result<Self> {
        Self::validate_common(gamma0, horizon)?;
        if s >= horizon {
            return Err(Error::invalid(
                "s",
                format!("constant phase s = {s} must be shorter than the horizon N = {horizon}"),
            ));
        }
        if !exponent.is_finite() || !(0.0..=1.0).contains(&exponent) {
            return Err(Error::invalid(
                "a",
                format!("decay exponent must lie in [0, 1], got {exponent}"),
            ));
        }
        Ok(Self {
            gamma0,
            horizon,
            decay: Decay::TailPolynomial { s, exponent },
        })
    }

    fn validate_common(gamma0: f64, horizon: usize) -> Result<()> {
        if !gamma0.is_finite() || gamma0 <= 0.0 {
            return Err(Error::invalid("gamma0", format!("must be > 0, got {gamma0}")));
        }
        if horizon == 0 {
            return Err(Error::invalid("N", "horizon must be at least 1"));
        }
        Ok(())
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Total number of steps N.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    pub fn variant_name(&self) -> &'static str {
        match self.decay {
            Decay::Constant => "constant",
            Decay::TailGeometric { .. } => "tail_geometric",
            Decay::TailPolynomial { .. } => "tail_polynomial",
        }
    }

    /// Length of the constant phase. The whole horizon for `Constant`.
    pub fn constant_phase(&self) -> usize {
        match self.decay {
            Decay::Constant => self.horizon,
            Decay::TailGeometric { s, .. } | Decay::TailPolynomial { s, .. } => s,
        }
    }

    /// Stepsize at step `t`, `1 <= t <= N`.
    pub fn stepsize_at(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.horizon {
            return Err(Error::StepOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.stepsize_unchecked(t))
    }

    fn stepsize_unchecked(&self, t: usize) -> f64 {
        match self.decay {
            Decay::Constant => self.gamma0,
            Decay::TailGeometric { s, phase_len } => {
                if t <= s {
                    self.gamma0
                } else {
                    let halvings = (t - s) / phase_len;
                    // Exact power-of-two scaling; gradual underflow past
                    // 2^-1074 is accepted.
                    self.gamma0 * (-(halvings as f64)).exp2()
                }
            }
            Decay::TailPolynomial { s, exponent } => {
                if t <= s {
                    self.gamma0
                } else {
                    self.gamma0 / ((t - s) as f64).powf(exponent)
                }
            }
        }
    }

    /// Stepsizes for `t = 1..=N` in order.
    pub fn stepsizes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.horizon).map(move |t| self.stepsize_unchecked(t))
    }

    /// Optimization trajectory length: the sum of all stepsizes.
    pub fn total_length(&self) -> f64 {
        self.stepsizes().sum()
    }

    /// Whether the constant phase dominates the decay tail,
    /// `s * gamma0 >= sum_{t>s} gamma_t`. Only defined for the
    /// tail-polynomial variant.
    ///
    /// The comparison factors out `gamma0`, so the `a = 0` boundary case
    /// `s = N/2` evaluates exactly.
    pub fn poly_precondition_holds(&self) -> Result<bool> {
        match self.decay {
            Decay::TailPolynomial { s, exponent } => {
                let tail: f64 = (1..=(self.horizon - s))
                    .map(|j| (j as f64).powf(-exponent))
                    .sum();
                Ok(s as f64 >= tail)
            }
            _ => Err(Error::ScheduleVariantMismatch {
                expected: "tail_polynomial",
                found: self.variant_name(),
            }),
        }
    }
}

/// Decay-phase length `K = ceil((N - s) / log2(N - s))` used by default for
/// tail-geometric schedules.
pub fn default_phase_length(n: usize, s: usize) -> Result<usize> {
    if n < s + 2 {
        return Err(Error::invalid(
            "N - s",
            format!(
                "needs N - s >= 2 so that log2(N - s) > 0, got N = {n}, s = {s}"
            ),
        ));
    }
    let tail = (n - s) as f64;
    Ok((tail / tail.log2()).ceil() as usize)
}

/// JSON form of a schedule:
/// `{"variant": "...", "gamma0": ..., "N": ..., "s": ..., "K": ..., "a": ...}`.
///
/// `K` may be omitted for `tail_geometric` (the default phase length is
/// used); `s` and `a` are required by the variants that consume them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub variant: String,
    pub gamma0: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl TryFrom<ScheduleSpec> for Schedule {
    type Error = Error;

    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        match spec.variant.as_str() {
            "constant" => Schedule::constant(spec.gamma0, spec.n),
            "tail_geometric" => {
                let s = spec
                    .s
                    .ok_or_else(|| Error::invalid("s", "required for tail_geometric"))?;
                let k = match spec.k {
                    Some(k) => k,
                    None => default_phase_length(spec.n, s)?,
                };
                Schedule::tail_geometric(spec.gamma0, spec.n, s, k)
            }
            "tail_polynomial" => {
                let s = spec
                    .s
                    .ok_or_else(|| Error::invalid("s", "required for tail_polynomial"))?;
                let a = spec
                    .a
                    .ok_or_else(|| Error::invalid("a", "required for tail_polynomial"))?;
                Schedule::tail_polynomial(spec.gamma0, spec.n, s, a)
            }
            other => Err(Error::invalid(
                "variant",
                format!("unknown schedule variant {other:?}"),
            )),
        }
    }
}

impl From<Schedule> for ScheduleSpec {
    fn from(sched: Schedule) -> Self {
        let (s, k, a) = match sched.decay {
            Decay::Constant => (None, None, None),
            Decay::TailGeometric { s, phase_len } => (Some(s), Some(phase_len), None),
            Decay::TailPolynomial { s, exponent } => (Some(s), None, Some(exponent)),
        };
        ScheduleSpec {
            variant: sched.variant_name().to_owned(),
            gamma0: sched.gamma0,
            n: sched.horizon,
            s,
            k,
            a,
        }
    }
}
