//! Problem instances: covariance spectra, target/initial parameters, noise.
//!
//! The covariance is kept purely as its eigenvalue list; parameters live in
//! the same eigenbasis. Every formula downstream depends only on these
//! coordinates, so nothing ever materializes a dense `d x d` matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tail-trace threshold above which spectrum truncation is reported.
const TRUNCATION_WARN_RATIO: f64 = 1e-6;

/// Finite, non-increasing list of positive eigenvalues of the data covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    trace: f64,
}

impl Spectrum {
    /// Validates positivity and non-increasing order. The offending position
    /// is reported on failure; input is never re-sorted.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid(
                "eigenvalues",
                "spectrum needs at least one eigenvalue",
            ));
        }
        for (i, &v) in eigenvalues.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPositiveEigenvalue { index: i, value: v });
            }
            if i > 0 && v > eigenvalues[i - 1] {
                return Err(Error::NonMonotoneEigenvalue {
                    index: i,
                    previous: eigenvalues[i - 1],
                    value: v,
                });
            }
        }
        let trace = eigenvalues.iter().sum();
        Ok(Self { eigenvalues, trace })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Cached sum of all eigenvalues.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Largest 1-based index `k` with `lambda_k >= threshold`, or 0 when no
    /// eigenvalue qualifies. Well-defined because the list is non-increasing.
    pub fn count_at_least(&self, threshold: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v >= threshold)
    }

    /// Sum of `lambda_i` over 1-based positions `lo < i <= hi`; empty or
    /// inverted ranges give 0.
    pub fn range_sum(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.dim());
        if lo >= hi {
            return 0.0;
        }
        self.eigenvalues[lo..hi].iter().sum()
    }

    /// Sum of `lambda_i` over `i > k` (1-based).
    pub fn tail_sum(&self, k: usize) -> f64 {
        if k >= self.dim() {
            0.0
        } else {
            self.eigenvalues[k..].iter().sum()
        }
    }

    /// Sum of `lambda_i^2` over `i > k` (1-based).
    pub fn tail_sum_sq(&self, k: usize) -> f64 {
        if k >= self.dim() {
            0.0
        } else {
            self.eigenvalues[k..].iter().map(|v| v * v).sum()
        }
    }
}

/// Built-in spectrum families plus explicit lists.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumKind {
    /// `lambda_k = k^-(1+r)`, requires `r > 0`.
    Poly { r: f64 },
    /// `lambda_k = k^-1 * log2(k+1)^-r`, requires `r > 1`.
    Polylog { r: f64 },
    /// `lambda_k = 2^-k`.
    Exp,
    /// Caller-supplied list; validated, never re-sorted. `d` is taken from
    /// the list length.
    Explicit(Vec<f64>),
}

/// Builds a spectrum of dimension `d` (ignored for `Explicit`).
///
/// For the generated infinite families the finite list is a truncation; when
/// the omitted tail trace (estimated by integral comparison) exceeds
/// `1e-6 * trace`, a warning is logged because truncation biases both the
/// exact oracle and the bounds.
pub fn make_spectrum(kind: SpectrumKind, d: usize) -> Result<Spectrum> {
    if !matches!(kind, SpectrumKind::Explicit(_)) && d == 0 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    let spectrum = match &kind {
        SpectrumKind::Poly { r } => {
            if !r.is_finite() || *r <= 0.0 {
                return Err(Error::invalid("r", format!("poly spectrum needs r > 0, got {r}")));
            }
            let vals = (1..=d).map(|k| (k as f64).powf(-(1.0 + r))).collect();
            Spectrum::new(vals)?
        }
        SpectrumKind::Polylog { r } => {
            if !r.is_finite() || *r <= 1.0 {
                return Err(Error::invalid(
                    "r",
                    format!("polylog spectrum needs r > 1, got {r}"),
                ));
            }
            let vals = (1..=d)
                .map(|k| ((k + 1) as f64).log2().powf(-r) / (k as f64))
                .collect();
            Spectrum::new(vals)?
        }
        SpectrumKind::Exp => {
            let vals = (1..=d).map(|k| (-(k as f64)).exp2()).collect();
            Spectrum::new(vals)?
        }
        SpectrumKind::Explicit(values) => Spectrum::new(values.clone())?,
    };
    if let Some(tail) = tail_trace_estimate(&kind, spectrum.dim()) {
        if tail > TRUNCATION_WARN_RATIO * spectrum.trace() {
            log::warn!(
                "spectrum truncated at d = {}: omitted tail trace ~ {:.3e} exceeds {:.0e} of trace {:.6e}",
                spectrum.dim(),
                tail,
                TRUNCATION_WARN_RATIO,
                spectrum.trace()
            );
        }
    }
    Ok(spectrum)
}

/// Integral-comparison estimate of the omitted tail trace `sum_{k>d} lambda_k`
/// for the generated families; `None` for explicit lists (nothing is omitted).
pub fn tail_trace_estimate(kind: &SpectrumKind, d: usize) -> Option<f64> {
    let d = d as f64;
    match kind {
        SpectrumKind::Poly { r } => Some(d.powf(-r) / r),
        SpectrumKind::Polylog { r } => {
            Some(std::f64::consts::LN_2 * d.log2().powf(1.0 - r) / (r - 1.0))
        }
        SpectrumKind::Exp => Some((-d).exp2()),
        SpectrumKind::Explicit(_) => None,
    }
}

/// Target-parameter families used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// All coordinates 1.
    Ones,
    /// Coordinate `i` equals `1/i`.
    Inv,
    /// Coordinate `i` equals `1/i^2`.
    InvSq,
}

/// Coordinates of the target in the eigenbasis.
pub fn make_target(kind: TargetKind, d: usize) -> Vec<f64> {
    (1..=d)
        .map(|i| {
            let i = i as f64;
            match kind {
                TargetKind::Ones => 1.0,
                TargetKind::Inv => 1.0 / i,
                TargetKind::InvSq => 1.0 / (i * i),
            }
        })
        .collect()
}

/// A full problem-algorithm target: spectrum, optimum, initial point, noise
/// level, and the fourth-moment constants of the feature distribution.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    spectrum: Spectrum,
    w_star: Vec<f64>,
    w0: Vec<f64>,
    sigma2: f64,
    alpha: f64,
    beta: f64,
}

impl ProblemInstance {
    pub fn new(
        spectrum: Spectrum,
        w_star: Vec<f64>,
        w0: Vec<f64>,
        sigma2: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let d = spectrum.dim();
        if w_star.len() != d {
            return Err(Error::invalid(
                "w_star",
                format!("expected {d} coordinates, got {}", w_star.len()),
            ));
        }
        if w0.len() != d {
            return Err(Error::invalid(
                "w0",
                format!("expected {d} coordinates, got {}", w0.len()),
            ));
        }
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::invalid("sigma2", format!("must be >= 0, got {sigma2}")));
        }
        if !alpha.is_finite() || alpha < 1.0 {
            return Err(Error::invalid("alpha", format!("must be >= 1, got {alpha}")));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
        }
        Ok(Self {
            spectrum,
            w_star,
            w0,
            sigma2,
            alpha,
            beta,
        })
    }

    /// Instance with the Gaussian fourth-moment constants `alpha = 3` and
    /// `beta = 1`, the only model the exact oracle supports.
    pub fn gaussian(spectrum: Spectrum, w_star: Vec<f64>, w0: Vec<f64>, sigma2: f64) -> Result<Self> {
        Self::new(spectrum, w_star, w0, sigma2, 3.0, 1.0)
    }

    pub fn is_gaussian(&self) -> bool {
        self.alpha == 3.0 && self.beta == 1.0
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn w0(&self) -> &[f64] {
        &self.w0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }
}

/// Largest admissible initial stepsize for a tail-geometric run with
/// constant-phase length `s` and decay-phase length `k`:
/// `1 / (3 * alpha * trace * log2(s + k))`. Callers compare strictly below it.
pub fn max_initial_stepsize(instance: &ProblemInstance, s: usize, k: usize) -> Result<f64> {
    let phase = s + k;
    if phase < 2 {
        return Err(Error::invalid(
            "s + K",
            format!("needs s + K >= 2 so that log2(s + K) > 0, got {phase}"),
        ));
    }
    Ok(1.0 / (3.0 * instance.alpha() * instance.spectrum().trace() * (phase as f64).log2()))
}

/// JSON form of a spectrum, mirroring [`SpectrumKind`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumSpec {
    Poly {
        d: usize,
        param: f64,
    },
    Polylog {
        d: usize,
        param: f64,
    },
    Exp {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<f64>,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl SpectrumSpec {
    pub fn dim(&self) -> usize {
        match self {
            SpectrumSpec::Poly { d, .. }
            | SpectrumSpec::Polylog { d, .. }
            | SpectrumSpec::Exp { d, .. } => *d,
            SpectrumSpec::Explicit { values } => values.len(),
        }
    }

    pub fn build(&self) -> Result<Spectrum> {
        match self {
            SpectrumSpec::Poly { d, param } => make_spectrum(SpectrumKind::Poly { r: *param }, *d),
            SpectrumSpec::Polylog { d, param } => {
                make_spectrum(SpectrumKind::Polylog { r: *param }, *d)
            }
            SpectrumSpec::Exp { d, .. } => make_spectrum(SpectrumKind::Exp, *d),
            SpectrumSpec::Explicit { values } => {
                make_spectrum(SpectrumKind::Explicit(values.clone()), values.len())
            }
        }
    }
}

/// Initial point: the keyword `"zeros"` or explicit coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Named(String),
    Coordinates(Vec<f64>),
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Named("zeros".to_owned())
    }
}

/// JSON-expressible problem instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub spectrum: SpectrumSpec,
    pub target: TargetKind,
    #[serde(default)]
    pub w0: InitSpec,
    pub sigma2: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_alpha() -> f64 {
    3.0
}

fn default_beta() -> f64 {
    1.0
}

impl InstanceSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        let spectrum = self.spectrum.build()?;
        let d = spectrum.dim();
        let w_star = make_target(self.target, d);
        let w0 = match &self.w0 {
            InitSpec::Named(name) if name == "zeros" => vec![0.0; d],
            InitSpec::Named(name) => {
                return Err(Error::invalid(
                    "w0",
                    format!("unknown keyword {name:?}, expected \"zeros\" or a coordinate list"),
                ))
            }
            InitSpec::Coordinates(values) => values.clone(),
        };
        ProblemInstance::new(spectrum, w_star, w0, self.sigma2, self.alpha, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_spectrum_matches_closed_form() {
        let s = make_spectrum(SpectrumKind::Poly { r: 1.0 }, 3).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 0.25, 1.0 / 9.0]);
    }

    #[test]
    fn exp_spectrum_matches_closed_form() {
        let s = make_spectrum(SpectrumKind::Exp, 3).unwrap();
        assert_eq!(s.eigenvalues(), &[0.5, 0.25, 0.125]);
    }

    #[test]
    fn explicit_flat_spectrum_is_valid() {
        let s = make_spectrum(SpectrumKind::Explicit(vec![1.0, 1.0]), 2).unwrap();
        assert_eq!(s.trace(), 2.0);
    }

    #[test]
    fn explicit_list_errors_name_the_offending_index() {
        let err = make_spectrum(SpectrumKind::Explicit(vec![1.0, 0.0]), 2).unwrap_err();
        assert_eq!(
            err,
            Error::NonPositiveEigenvalue {
                index: 1,
                value: 0.0
            }
        );
        let err = make_spectrum(SpectrumKind::Explicit(vec![1.0, 0.5, 0.7]), 3).unwrap_err();
        assert_eq!(
            err,
            Error::NonMonotoneEigenvalue {
                index: 2,
                previous: 0.5,
                value: 0.7
            }
        );
    }

    #[test]
    fn polylog_needs_r_above_one() {
        assert!(make_spectrum(SpectrumKind::Polylog { r: 1.0 }, 4).is_err());
        let s = make_spectrum(SpectrumKind::Polylog { r: 2.0 }, 4).unwrap();
        assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-15);
        for w in s.eigenvalues().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn targets_match_examples() {
        assert_eq!(make_target(TargetKind::Ones, 3), vec![1.0, 1.0, 1.0]);
        assert_eq!(make_target(TargetKind::Inv, 3), vec![1.0, 0.5, 1.0 / 3.0]);
        assert_eq!(make_target(TargetKind::InvSq, 2), vec![1.0, 0.25]);
    }

    #[test]
    fn max_stepsize_examples() {
        let inst = ProblemInstance::gaussian(
            Spectrum::new(vec![0.5, 0.25, 0.125, 0.0625, 0.03125, 0.03125]).unwrap(),
            vec![0.0; 6],
            vec![0.0; 6],
            0.0,
        )
        .unwrap();
        assert!((inst.spectrum().trace() - 1.0).abs() < 1e-15);
        // log2(256) = 8 and log2(2) = 1.
        let g = max_initial_stepsize(&inst, 128, 128).unwrap();
        assert!((g - 1.0 / 72.0).abs() < 1e-15);
        let g = max_initial_stepsize(&inst, 0, 2).unwrap();
        assert!((g - 1.0 / 9.0).abs() < 1e-15);
        assert!(max_initial_stepsize(&inst, 0, 1).is_err());
    }

    #[test]
    fn poly_trace_truncation_differences_shrink() {
        // trace(2^(m+1)) - trace(2^m) is positive and decreasing in m.
        let mut prev_diff = f64::INFINITY;
        for m in 1..=20u32 {
            let lo = make_spectrum(SpectrumKind::Poly { r: 1.0 }, 1 << m).unwrap();
            let hi = make_spectrum(SpectrumKind::Poly { r: 1.0 }, 1 << (m + 1)).unwrap();
            let diff = hi.trace() - lo.trace();
            assert!(diff > 0.0);
            assert!(diff <= prev_diff);
            prev_diff = diff;
        }
    }

    #[test]
    fn tail_estimates_cover_generated_kinds() {
        assert!(tail_trace_estimate(&SpectrumKind::Poly { r: 1.0 }, 100).unwrap() > 0.0);
        assert!(tail_trace_estimate(&SpectrumKind::Exp, 8).unwrap() > 0.0);
        assert!(tail_trace_estimate(&SpectrumKind::Explicit(vec![1.0]), 1).is_none());
    }

    #[test]
    fn count_at_least_and_partial_sums() {
        let s = Spectrum::new(vec![2.0, 1.0, 0.6, 0.4, 0.1]).unwrap();
        assert_eq!(s.count_at_least(1.0), 2);
        assert_eq!(s.count_at_least(0.5), 3);
        assert_eq!(s.count_at_least(3.0), 0);
        assert_eq!(s.count_at_least(0.05), 5);
        assert!((s.range_sum(2, 3) - 0.6).abs() < 1e-15);
        assert_eq!(s.range_sum(3, 3), 0.0);
        assert!((s.tail_sum(3) - 0.5).abs() < 1e-15);
        assert!((s.tail_sum_sq(3) - 0.17).abs() < 1e-15);
        assert_eq!(s.tail_sum(5), 0.0);
    }

    #[test]
    fn instance_spec_round_trip() {
        let json = r#"{
            "spectrum": {"kind": "poly", "d": 4, "param": 1.0},
            "target": "inv",
            "w0": "zeros",
            "sigma2": 1.0
        }"#;
        let spec: InstanceSpec = serde_json::from_str(json).unwrap();
        let inst = spec.build().unwrap();
        assert_eq!(inst.dim(), 4);
        assert_eq!(inst.alpha(), 3.0);
        assert_eq!(inst.beta(), 1.0);
        assert_eq!(inst.w0(), &[0.0; 4]);
        assert_eq!(inst.w_star()[1], 0.5);

        let json = r#"{
            "spectrum": {"kind": "explicit", "values": [1.0, 0.5]},
            "target": "ones",
            "w0": [0.5, 0.5],
            "sigma2": 0.0,
            "alpha": 3.0,
            "beta": 1.0
        }"#;
        let inst = serde_json::from_str::<InstanceSpec>(json).unwrap().build().unwrap();
        assert_eq!(inst.w0(), &[0.5, 0.5]);
    }

    #[test]
    fn instance_validation() {
        let sp = Spectrum::new(vec![1.0]).unwrap();
        assert!(ProblemInstance::new(sp.clone(), vec![0.0, 1.0], vec![0.0], 1.0, 3.0, 1.0).is_err());
        assert!(ProblemInstance::new(sp.clone(), vec![0.0], vec![0.0], -1.0, 3.0, 1.0).is_err());
        assert!(ProblemInstance::new(sp.clone(), vec![0.0], vec![0.0], 1.0, 0.5, 1.0).is_err());
        let inst = ProblemInstance::new(sp, vec![0.0], vec![0.0], 1.0, 2.0, 0.5).unwrap();
        assert!(!inst.is_gaussian());
    }
}
