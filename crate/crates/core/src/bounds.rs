//! Closed-form bounds on the bias and variance errors of the last iterate,
//! effective dimensions, index thresholds, scalar envelopes, and the
//! geometric-vs-polynomial comparison ratio.
//!
//! Every bound is evaluated with its explicit constants so that reports are
//! concrete numbers; which constant set is in force is recorded on the
//! report. Precondition failures produce flagged reports with absent bounds
//! rather than errors, so parameter sweeps can tabulate validity.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::exact_trajectory;
use crate::problem::{ProblemInstance, Spectrum};
use crate::schedule::{default_phase_length, Decay, Schedule};

/// Named precondition flags. Only the flags relevant to the producing
/// theorem are set; the rest stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PreconditionFlags {
    /// `gamma0 < 1 / (3 alpha tr(H) log2(s + K))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stepsize_condition: Option<bool>,
    /// `K >= 10`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_at_least_10: Option<bool>,
    /// `gamma0 < 1 / lambda_1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0_below_inv_lambda1: Option<bool>,
    /// `gamma0 < 1 / (4 lambda_1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0_below_quarter_inv_lambda1: Option<bool>,
    /// `s * gamma0 >= sum_{t > s} gamma_t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_condition: Option<bool>,
}

impl PreconditionFlags {
    /// True when every flag that is set is true.
    pub fn all_true(&self) -> bool {
        [
            self.stepsize_condition,
            self.k_at_least_10,
            self.gamma0_below_inv_lambda1,
            self.gamma0_below_quarter_inv_lambda1,
            self.trajectory_condition,
        ]
        .into_iter()
        .flatten()
        .all(|b| b)
    }
}

/// Evaluated bound values for one (instance, schedule) pair. Bounds are
/// `None` when their preconditions fail; serialization keeps explicit nulls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub k_star: usize,
    pub k_dagger: usize,
    /// Effective dimension associated with the producing theorem; NaN when
    /// the index thresholds come out inverted (degenerate configuration).
    pub dim_eff: f64,
    pub bias_upper: Option<f64>,
    pub var_upper: Option<f64>,
    pub bias_lower: Option<f64>,
    pub var_lower: Option<f64>,
    pub preconditions: PreconditionFlags,
    /// Which explicit constant set produced the numbers.
    pub constant_set: &'static str,
}

/// Largest index whose eigenvalue reaches the head threshold `1/(gamma0 K)`.
pub fn k_star_geo(spectrum: &Spectrum, gamma0: f64, k: usize) -> usize {
    spectrum.count_at_least(1.0 / (gamma0 * k as f64))
}

/// Largest index whose eigenvalue reaches the middle threshold
/// `1/(gamma0 (s + K))`.
pub fn k_dagger_geo(spectrum: &Spectrum, gamma0: f64, s: usize, k: usize) -> usize {
    spectrum.count_at_least(1.0 / (gamma0 * (s + k) as f64))
}

/// Effective dimension of the geometric-decay bounds:
/// `k* + gamma0 K sum_{k* < i <= k+} lambda_i
///     + gamma0^2 K (s + K) sum_{i > k+} lambda_i^2`,
/// with empty ranges contributing 0.
pub fn effective_dim_geo(
    spectrum: &Spectrum,
    gamma0: f64,
    s: usize,
    k: usize,
    k_star: usize,
    k_dagger: usize,
) -> Result<f64> {
    if k_star > k_dagger || k_dagger > spectrum.dim() {
        return Err(Error::invalid(
            "k_star",
            format!(
                "need k_star <= k_dagger <= d, got k_star = {k_star}, k_dagger = {k_dagger}, d = {}",
                spectrum.dim()
            ),
        ));
    }
    let kf = k as f64;
    let skf = (s + k) as f64;
    Ok(k_star as f64
        + gamma0 * kf * spectrum.range_sum(k_star, k_dagger)
        + gamma0 * gamma0 * kf * skf * spectrum.tail_sum_sq(k_dagger))
}

fn tail_geometric_params(schedule: &Schedule) -> Result<(usize, usize)> {
    match schedule.decay() {
        Decay::TailGeometric { s, phase_len } => Ok((s, phase_len)),
        _ => Err(Error::ScheduleVariantMismatch {
            expected: "tail_geometric",
            found: schedule.variant_name(),
        }),
    }
}

/// Weighted squared distance `sum_{i > k} lambda_i (w0_i - w*_i)^2`.
fn tail_h_norm(instance: &ProblemInstance, k: usize) -> f64 {
    instance
        .spectrum()
        .eigenvalues()
        .iter()
        .zip(instance.w0().iter().zip(instance.w_star()))
        .skip(k)
        .map(|(l, (w0, ws))| {
            let d = w0 - ws;
            l * d * d
        })
        .sum()
}

/// Upper bounds for the tail-geometric schedule.
///
/// The variance bound `8 sigma^2 / (1 - gamma0 R^2) * D/K` (with
/// `R^2 = alpha tr(H)`) needs only `gamma0 R^2 < 1` and is reported whenever
/// that holds. The bias bound with constants `12e` and
/// `108 e alpha log2(s+K)` needs the full stepsize condition, which is also
/// the flag recorded on the report. Index overrides default to the
/// bound-minimizing thresholds.
pub fn upper_bound_geo(
    instance: &ProblemInstance,
    schedule: &Schedule,
    k_star: Option<usize>,
    k_dagger: Option<usize>,
) -> Result<BoundReport> {
    let (s, k) = tail_geometric_params(schedule)?;
    let gamma0 = schedule.gamma0();
    let spectrum = instance.spectrum();
    let lambda = spectrum.eigenvalues();

    let ks = k_star.unwrap_or_else(|| k_star_geo(spectrum, gamma0, k));
    let kd = k_dagger.unwrap_or_else(|| k_dagger_geo(spectrum, gamma0, s, k));
    let dim_eff = effective_dim_geo(spectrum, gamma0, s, k, ks, kd)?;

    let r2 = instance.alpha() * spectrum.trace();
    let crude_ok = gamma0 * r2 < 1.0;
    let sk = s + k;
    let stepsize_ok = sk >= 2 && gamma0 < 1.0 / (3.0 * r2 * (sk as f64).log2());

    let kf = k as f64;
    let var_upper = crude_ok
        .then(|| 8.0 * instance.sigma2() / (1.0 - gamma0 * r2) * dim_eff / kf);

    let bias_upper = stepsize_ok.then(|| {
        let skf = sk as f64;
        let head_weight = 1.0 / (gamma0 * kf);
        let mid_weight = 1.0 / (gamma0 * skf);
        let mut contracted = 0.0; // <diag weights, (I - g0 H)^(2(s+K)) B0>
        let mut plain = 0.0; // <diag weights at k_dagger, B0>
        for (i, &l) in lambda.iter().enumerate() {
            let delta = instance.w0()[i] - instance.w_star()[i];
            let d2 = delta * delta;
            let decay = (1.0 - gamma0 * l).powi(2 * sk as i32);
            contracted += if i < ks { head_weight } else { l } * decay * d2;
            plain += if i < kd { mid_weight } else { l } * d2;
        }
        12.0 * E * contracted + 108.0 * E * instance.alpha() * skf.log2() * plain * dim_eff / kf
    });

    Ok(BoundReport {
        k_star: ks,
        k_dagger: kd,
        dim_eff,
        bias_upper,
        var_upper,
        bias_lower: None,
        var_lower: None,
        preconditions: PreconditionFlags {
            stepsize_condition: Some(stepsize_ok),
            ..Default::default()
        },
        constant_set: "variance 8/(1-gamma0*R2)*D/K; bias 12e + 108e*alpha*log2(s+K)*D/K",
    })
}

/// Lower bounds for the tail-geometric schedule: variance at constant 1/400
/// and bias as the pure contraction term plus `beta/1200` times the tail
/// energy, all with the bound-selected thresholds. Valid when `K >= 10` and
/// `gamma0 < 1/lambda_1`.
pub fn lower_bound_geo(instance: &ProblemInstance, schedule: &Schedule) -> Result<BoundReport> {
    let (s, k) = tail_geometric_params(schedule)?;
    let gamma0 = schedule.gamma0();
    let spectrum = instance.spectrum();

    let ks = k_star_geo(spectrum, gamma0, k);
    let kd = k_dagger_geo(spectrum, gamma0, s, k);
    let dim_eff = effective_dim_geo(spectrum, gamma0, s, k, ks, kd)?;

    let k_ok = k >= 10;
    let gamma_ok = gamma0 < 1.0 / spectrum.lambda_max();
    let ok = k_ok && gamma_ok;
    let kf = k as f64;

    let var_lower = ok.then(|| instance.sigma2() / 400.0 * dim_eff / kf);
    let bias_lower = ok.then(|| {
        let exponent = 2 * (s + 2 * k) as i32;
        let contraction: f64 = spectrum
            .eigenvalues()
            .iter()
            .zip(instance.w0().iter().zip(instance.w_star()))
            .map(|(l, (w0, ws))| {
                let d = w0 - ws;
                l * (1.0 - gamma0 * l).powi(exponent) * d * d
            })
            .sum();
        contraction + instance.beta() / 1200.0 * tail_h_norm(instance, kd) * dim_eff / kf
    });

    Ok(BoundReport {
        k_star: ks,
        k_dagger: kd,
        dim_eff,
        bias_upper: None,
        var_upper: None,
        bias_lower,
        var_lower,
        preconditions: PreconditionFlags {
            k_at_least_10: Some(k_ok),
            gamma0_below_inv_lambda1: Some(gamma_ok),
            ..Default::default()
        },
        constant_set: "variance sigma2/400*D/K; bias contraction + beta/1200*D/K",
    })
}

/// Lower bounds for the tail-polynomial schedule, case-dispatched on the
/// decay exponent. Valid when `gamma0 < 1/(4 lambda_1)` and the constant
/// phase dominates the decay tail (`s gamma0 >= sum_{t>s} gamma_t`).
///
/// Fractional contraction powers `(1 - gamma0 lambda_i)^p` are evaluated
/// coordinate-wise with a real exponent; the quarter condition keeps the
/// base inside (3/4, 1).
pub fn lower_bound_poly(instance: &ProblemInstance, schedule: &Schedule) -> Result<BoundReport> {
    let (s, a) = match schedule.decay() {
        Decay::TailPolynomial { s, exponent } => (s, exponent),
        _ => {
            return Err(Error::ScheduleVariantMismatch {
                expected: "tail_polynomial",
                found: schedule.variant_name(),
            })
        }
    };
    let n = schedule.horizon();
    let gamma0 = schedule.gamma0();
    let spectrum = instance.spectrum();
    let lambda = spectrum.eigenvalues();
    let nf = n as f64;
    let tail_len = (n - s) as f64;

    let quarter_ok = gamma0 < 1.0 / (4.0 * spectrum.lambda_max());
    let traj_ok = schedule.poly_precondition_holds()?;

    let one_dim_case = a == 1.0;
    if one_dim_case && n - s < 2 {
        return Err(Error::invalid(
            "N - s",
            format!("the a = 1 head threshold needs N - s >= 2, got {}", n - s),
        ));
    }

    // Head threshold on gamma0 * lambda_k.
    let head_thr = if one_dim_case {
        1.0 / (2.0 + 2.0 * (tail_len - 1.0).log2())
    } else {
        (1.0 - a) / (2.0 * tail_len.powf(1.0 - a))
    };
    let ks = spectrum.count_at_least(head_thr / gamma0);
    let kd = spectrum.count_at_least(1.0 / (2.0 * s as f64 * gamma0));
    let nested = ks <= kd;

    let e2 = E * E;
    let dim_eff = if nested {
        let head: f64 = if one_dim_case {
            lambda[..ks]
                .iter()
                .map(|&l| {
                    let gl = gamma0 * l;
                    nf.powf(1.0 - 4.0 * gl) * gl * gl
                })
                .sum()
        } else {
            let log_floor = a * nf.log2() / (16.0 * E);
            lambda[..ks]
                .iter()
                .map(|&l| (nf.powf(1.0 - a) * gamma0 * l).max(log_floor))
                .sum()
        };
        let mid = nf * gamma0 / (4.0 * e2) * spectrum.range_sum(ks, kd);
        let tail = s as f64 * nf * gamma0 * gamma0 / (2.0 * e2) * spectrum.tail_sum_sq(kd);
        head + mid + tail
    } else {
        f64::NAN
    };

    let ok = quarter_ok && traj_ok && nested;
    let (var_scale, bias_scale, contraction_exp) = if one_dim_case {
        (1.0, instance.beta() / E.powi(4), 2.0 * (s as f64 + 2.0 * nf.log2()))
    } else {
        let sq = (1.0 - a) * (1.0 - a);
        (
            sq,
            sq * instance.beta() / E.powi(4),
            2.0 * (s as f64 + 2.0 * nf.powf(1.0 - a) / (1.0 - a)),
        )
    };

    let var_lower = ok.then(|| var_scale * instance.sigma2() * dim_eff / nf);
    let bias_lower = ok.then(|| {
        let contraction: f64 = lambda
            .iter()
            .zip(instance.w0().iter().zip(instance.w_star()))
            .map(|(l, (w0, ws))| {
                let d = w0 - ws;
                l * (1.0 - gamma0 * l).powf(contraction_exp) * d * d
            })
            .sum();
        contraction + bias_scale * tail_h_norm(instance, kd) * dim_eff / nf
    });

    Ok(BoundReport {
        k_star: ks,
        k_dagger: kd,
        dim_eff,
        bias_upper: None,
        var_upper: None,
        bias_lower,
        var_lower,
        preconditions: PreconditionFlags {
            gamma0_below_quarter_inv_lambda1: Some(quarter_ok),
            trajectory_condition: Some(traj_ok),
            ..Default::default()
        },
        constant_set: if one_dim_case {
            "variance D/N; bias contraction + beta/e^4*D/N"
        } else {
            "variance (1-a)^2*D/N; bias contraction + (1-a)^2*beta/e^4*D/N"
        },
    })
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 || x > 1.0 {
        return Err(Error::invalid("x", format!("must lie in (0, 1], got {x}")));
    }
    Ok(())
}

/// Scalar sum-product controlling the variance decay from above across `l`
/// geometric phases:
///
/// ```text
/// x (1-(1-x)^(s+K)) prod_{j=1}^{L-1} (1 - x/2^j)^K
///   + sum_{l=1}^{L-1} x/2^l (1-(1-x/2^l)^K) prod_{j=l+1}^{L-1} (1 - x/2^j)^K
/// ```
///
/// Bounded by [`upper_envelope_f`] for every `x` in (0, 1].
pub fn f_upper_form(x: f64, s: usize, k: usize, l: usize) -> Result<f64> {
    check_unit_interval(x)?;
    if k == 0 || l == 0 {
        return Err(Error::invalid("K", "needs K >= 1 and L >= 1"));
    }
    let ki = k as i32;
    // suffix[l] = prod_{j=l+1}^{L-1} (1 - x/2^j)^K
    let mut suffix = vec![1.0; l];
    for j in (1..l).rev() {
        let factor = (1.0 - x / (j as f64).exp2()).powi(ki);
        suffix[j - 1] = suffix[j] * factor;
    }
    let mut total = x * (1.0 - (1.0 - x).powi((s + k) as i32)) * suffix[0];
    for (ell, suffix_prod) in suffix.iter().enumerate().skip(1) {
        let xs = x / (ell as f64).exp2();
        total += xs * (1.0 - (1.0 - xs).powi(ki)) * suffix_prod;
    }
    Ok(total)
}

/// Closed-form envelope above [`f_upper_form`]:
/// `min(2 (s+K) x^2, 2x, 8/K)`.
pub fn upper_envelope_f(x: f64, s: usize, k: usize) -> Result<f64> {
    check_unit_interval(x)?;
    if k == 0 {
        return Err(Error::invalid("K", "needs K >= 1"));
    }
    let skf = (s + k) as f64;
    Ok((2.0 * skf * x * x).min(2.0 * x).min(8.0 / k as f64))
}

/// Scalar sum-product controlling the variance from below, with the sharper
/// `(1 - 2x)` contractions:
///
/// ```text
/// x/2 (1-(1-2x)^(s+K)) (1-2x)^K
///   + sum_{l=1}^{L-1} x/2^(l+1) (1-(1-x/2^(l-1))^K) (1-x/2^(l-1))^K
/// ```
///
/// Dominates [`lower_envelope_f`] for every `x` in (0, 1] when `K >= 10`.
pub fn f_lower_form(x: f64, s: usize, k: usize, l: usize) -> Result<f64> {
    check_unit_interval(x)?;
    if k == 0 || l == 0 {
        return Err(Error::invalid("K", "needs K >= 1 and L >= 1"));
    }
    let ki = k as i32;
    let first = x / 2.0 * (1.0 - (1.0 - 2.0 * x).powi((s + k) as i32)) * (1.0 - 2.0 * x).powi(ki);
    let mut total = first;
    for ell in 1..l {
        let base = 1.0 - x / ((ell - 1) as f64).exp2();
        let pow = base.powi(ki);
        total += x / ((ell + 1) as f64).exp2() * (1.0 - pow) * pow;
    }
    Ok(total)
}

/// Piecewise envelope below [`f_lower_form`]; requires `K >= 10`.
pub fn lower_envelope_f(x: f64, s: usize, k: usize) -> Result<f64> {
    check_unit_interval(x)?;
    if k < 10 {
        return Err(Error::invalid("K", format!("needs K >= 10, got {k}")));
    }
    let kf = k as f64;
    let skf = (s + k) as f64;
    Ok(if x < 1.0 / skf {
        skf * x * x / 40.0
    } else if x < 1.0 / kf {
        x / 40.0
    } else {
        1.0 / (400.0 * kf)
    })
}

/// Comparison quantity and the exact risks it orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `R(N) = (|w0 - w*|^2_(head)/(gamma0 N) + |w0 - w*|^2_(H tail)) / sigma2`
    /// at the threshold index `max{k: lambda_k >= 1/(gamma0 N)}`.
    pub r_n: f64,
    /// Exact oracle risk of the tail-geometric schedule (s = N/2, default K).
    pub exp_risk: f64,
    /// Exact oracle risk of the tail-polynomial schedule (s = N/2, a = 1).
    pub poly_risk: f64,
}

/// Evaluates the instance-wise comparison at `s = N/2`: the ratio `R(N)`
/// from the displayed formula with `w = w0`, plus the exact risks of the two
/// schedules at the same `gamma0`. No pass/fail is asserted because the
/// comparison constant is not quantified; callers inspect the ordering.
pub fn comparison_ratio(
    instance: &ProblemInstance,
    gamma0: f64,
    n: usize,
) -> Result<ComparisonReport> {
    if instance.sigma2() <= 0.0 {
        return Err(Error::invalid(
            "sigma2",
            "comparison ratio requires sigma2 > 0",
        ));
    }
    let s = n / 2;
    let spectrum = instance.spectrum();
    let kd = spectrum.count_at_least(1.0 / (gamma0 * n as f64));
    let head: f64 = instance.w0()[..kd]
        .iter()
        .zip(&instance.w_star()[..kd])
        .map(|(w0, ws)| {
            let d = w0 - ws;
            d * d
        })
        .sum();
    let r_n = (head / (gamma0 * n as f64) + tail_h_norm(instance, kd)) / instance.sigma2();

    let k = default_phase_length(n, s)?;
    let geo = Schedule::tail_geometric(gamma0, n, s, k)?;
    let poly = Schedule::tail_polynomial(gamma0, n, s, 1.0)?;
    let exp_risk = exact_trajectory(instance, &geo)?.final_risk();
    let poly_risk = exact_trajectory(instance, &poly)?.final_risk();
    Ok(ComparisonReport {
        r_n,
        exp_risk,
        poly_risk,
    })
}
