//! Exact expected bias/variance error of last-iterate SGD with Gaussian
//! features.
//!
//! For `x = H^(1/2) z` with standard normal `z` and any symmetric `A`,
//! `E[x x' A x x'] = 2 H A H + tr(H A) H`. With diagonal `H` this closes the
//! matrix recursions for the bias and variance iterates on their diagonals:
//! the diagonal evolves autonomously, so the whole expectation is tracked in
//! `O(d)` per step. Restricted to `alpha = 3`, `beta = 1` instances; other
//! feature models go through Monte Carlo.

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::schedule::Schedule;

/// Threshold above which weighted sums switch to compensated accumulation;
/// eigenvalues can span hundreds of orders of magnitude.
const KAHAN_DIM: usize = 10_000;

/// Diagonal of the bias/variance iterates at a given step.
///
/// `b[i]` is the expected squared bias coordinate, `c[i]` the variance one;
/// both stay non-negative for every input because each is the expectation of
/// a square.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskState {
    b: Vec<f64>,
    c: Vec<f64>,
    t: usize,
}

impl RiskState {
    /// State at `t = 0`: `b_i = (w0_i - w*_i)^2`, `c = 0`.
    ///
    /// Only the diagonal of the initial bias matrix is kept; off-diagonal
    /// entries never influence the tracked quantities because the diagonal
    /// recursion is autonomous.
    pub fn initial(instance: &ProblemInstance) -> Self {
        let b = instance
            .w0()
            .iter()
            .zip(instance.w_star())
            .map(|(w0, ws)| {
                let d = w0 - ws;
                d * d
            })
            .collect();
        let c = vec![0.0; instance.dim()];
        Self { b, c, t: 0 }
    }

    /// State from explicit diagonals; entries must be non-negative.
    pub fn new(b: Vec<f64>, c: Vec<f64>, t: usize) -> Result<Self> {
        if b.len() != c.len() {
            return Err(Error::invalid(
                "c",
                format!("length {} does not match b length {}", c.len(), b.len()),
            ));
        }
        if let Some(v) = b.iter().chain(&c).find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "state",
                format!("entries must be non-negative and finite, got {v}"),
            ));
        }
        Ok(Self { b, c, t })
    }

    pub fn bias_coords(&self) -> &[f64] {
        &self.b
    }

    pub fn variance_coords(&self) -> &[f64] {
        &self.c
    }

    pub fn step_index(&self) -> usize {
        self.t
    }
}

/// One update of the diagonal recursions with stepsize `gamma`.
///
/// With `S_b = sum_j lambda_j b_j` and `S_c = sum_j lambda_j c_j` taken from
/// the input state (the update is simultaneous, not in place):
///
/// ```text
/// b_i' = (1 - 2 g l_i + 2 g^2 l_i^2) b_i + g^2 l_i S_b
/// c_i' = (1 - 2 g l_i + 2 g^2 l_i^2) c_i + g^2 l_i S_c + g^2 sigma^2 l_i
/// ```
///
/// Defined for every `gamma`; divergence is the caller's concern. Assumes a
/// Gaussian instance.
pub fn step(state: &RiskState, gamma: f64, instance: &ProblemInstance) -> RiskState {
    debug_assert!(instance.is_gaussian());
    debug_assert_eq!(state.b.len(), instance.dim());
    let mut b = state.b.clone();
    let mut c = state.c.clone();
    advance(&mut b, &mut c, gamma, instance);
    RiskState {
        b,
        c,
        t: state.t + 1,
    }
}

fn advance(b: &mut [f64], c: &mut [f64], gamma: f64, instance: &ProblemInstance) {
    let lambda = instance.spectrum().eigenvalues();
    let s_b = weighted_sum(lambda, b);
    let s_c = weighted_sum(lambda, c);
    let g2 = gamma * gamma;
    let noise = g2 * instance.sigma2();
    for i in 0..lambda.len() {
        let l = lambda[i];
        let contract = 1.0 - 2.0 * gamma * l + 2.0 * g2 * l * l;
        b[i] = contract * b[i] + g2 * l * s_b;
        c[i] = contract * c[i] + g2 * l * s_c + noise * l;
    }
}

/// Ascending-index weighted sum `sum_i lambda_i v_i`, compensated for large d.
pub(crate) fn weighted_sum(lambda: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(lambda.len(), v.len());
    if lambda.len() > KAHAN_DIM {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (l, x) in lambda.iter().zip(v) {
            let y = l * x - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    } else {
        lambda.iter().zip(v).map(|(l, x)| l * x).sum()
    }
}

/// Per-step exact bias error, variance error, and excess risk, indexed
/// `t = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTrajectory {
    /// `<H, B_t>` for each step.
    pub bias: Vec<f64>,
    /// `<H, C_t>` for each step.
    pub variance: Vec<f64>,
    /// `(bias + variance) / 2` at each step.
    pub excess_risk: Vec<f64>,
}

impl RiskTrajectory {
    pub fn len(&self) -> usize {
        self.excess_risk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excess_risk.is_empty()
    }

    pub fn final_bias(&self) -> f64 {
        *self.bias.last().unwrap()
    }

    pub fn final_variance(&self) -> f64 {
        *self.variance.last().unwrap()
    }

    pub fn final_risk(&self) -> f64 {
        *self.excess_risk.last().unwrap()
    }
}

/// Evolves the recursion over the whole schedule and records `<H, B_t>`,
/// `<H, C_t>`, and the excess risk at every step.
///
/// Errors with [`Error::UnsupportedModel`] unless the instance is Gaussian.
pub fn exact_trajectory(instance: &ProblemInstance, schedule: &Schedule) -> Result<RiskTrajectory> {
    if !instance.is_gaussian() {
        return Err(Error::UnsupportedModel {
            alpha: instance.alpha(),
            beta: instance.beta(),
        });
    }
    let lambda = instance.spectrum().eigenvalues();
    let n = schedule.horizon();
    let state = RiskState::initial(instance);
    let mut b = state.b;
    let mut c = state.c;

    let mut bias = Vec::with_capacity(n + 1);
    let mut variance = Vec::with_capacity(n + 1);
    let mut excess = Vec::with_capacity(n + 1);
    let record = |b: &[f64], c: &[f64], bias: &mut Vec<f64>, variance: &mut Vec<f64>| {
        let hb = weighted_sum(lambda, b);
        let hc = weighted_sum(lambda, c);
        bias.push(hb);
        variance.push(hc);
        (hb + hc) / 2.0
    };
    excess.push(record(&b, &c, &mut bias, &mut variance));
    for gamma in schedule.stepsizes() {
        advance(&mut b, &mut c, gamma, instance);
        excess.push(record(&b, &c, &mut bias, &mut variance));
    }
    Ok(RiskTrajectory {
        bias,
        variance,
        excess_risk: excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Spectrum;

    fn one_dim(sigma2: f64, w0: f64) -> ProblemInstance {
        ProblemInstance::gaussian(
            Spectrum::new(vec![1.0]).unwrap(),
            vec![0.0],
            vec![w0],
            sigma2,
        )
        .unwrap()
    }

    #[test]
    fn single_step_bias_hand_value() {
        // 1 - 0.2 + 0.02 + 0.01 = 0.83
        let inst = one_dim(0.0, 1.0);
        let s0 = RiskState::initial(&inst);
        let s1 = step(&s0, 0.1, &inst);
        assert!((s1.bias_coords()[0] - 0.83).abs() < 1e-15);
        assert_eq!(s1.variance_coords()[0], 0.0);
        assert_eq!(s1.step_index(), 1);
    }

    #[test]
    fn single_step_variance_hand_value() {
        let inst = one_dim(1.0, 0.0);
        let s0 = RiskState::initial(&inst);
        let s1 = step(&s0, 0.1, &inst);
        assert_eq!(s1.bias_coords()[0], 0.0);
        assert!((s1.variance_coords()[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_fixed_point_without_noise() {
        let inst = one_dim(0.0, 0.0);
        let s0 = RiskState::initial(&inst);
        let s1 = step(&s0, 0.3, &inst);
        assert_eq!(s1.bias_coords(), &[0.0]);
        assert_eq!(s1.variance_coords(), &[0.0]);
        assert_eq!(s1.step_index(), 1);
    }

    #[test]
    fn interpolating_instance_has_zero_risk() {
        let spectrum = Spectrum::new(vec![1.0, 0.5, 0.25]).unwrap();
        let w = vec![0.3, -0.2, 1.0];
        let inst = ProblemInstance::gaussian(spectrum, w.clone(), w, 0.0).unwrap();
        let sched = Schedule::constant(0.1, 32).unwrap();
        let traj = exact_trajectory(&inst, &sched).unwrap();
        assert!(traj.excess_risk.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn one_step_trajectory_hand_values() {
        let inst = one_dim(0.0, 1.0);
        let sched = Schedule::constant(0.1, 1).unwrap();
        let traj = exact_trajectory(&inst, &sched).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj.bias[0], 1.0);
        assert_eq!(traj.variance[0], 0.0);
        assert!((traj.final_risk() - 0.415).abs() < 1e-15);

        let spectrum = Spectrum::new(vec![1.0, 1.0]).unwrap();
        let inst =
            ProblemInstance::gaussian(spectrum, vec![0.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let traj = exact_trajectory(&inst, &sched).unwrap();
        assert!((traj.final_variance() - 0.02).abs() < 1e-16);
        assert!((traj.final_risk() - 0.01).abs() < 1e-16);
    }

    #[test]
    fn non_gaussian_instance_is_rejected() {
        let inst = ProblemInstance::new(
            Spectrum::new(vec![1.0]).unwrap(),
            vec![0.0],
            vec![1.0],
            1.0,
            2.0,
            0.5,
        )
        .unwrap();
        let sched = Schedule::constant(0.1, 4).unwrap();
        assert!(matches!(
            exact_trajectory(&inst, &sched),
            Err(Error::UnsupportedModel { .. })
        ));
    }

    #[test]
    fn decomposition_identity_holds_exactly() {
        let spectrum = Spectrum::new(vec![1.0, 0.5, 0.1]).unwrap();
        let inst =
            ProblemInstance::gaussian(spectrum, vec![1.0, 1.0, 1.0], vec![0.0; 3], 1.0).unwrap();
        let sched = Schedule::tail_geometric(0.05, 64, 16, 6).unwrap();
        let traj = exact_trajectory(&inst, &sched).unwrap();
        assert_eq!(traj.variance[0], 0.0);
        assert_eq!(traj.bias[0], 1.0 + 0.5 + 0.1);
        for t in 0..traj.len() {
            assert_eq!(traj.excess_risk[t], (traj.bias[t] + traj.variance[t]) / 2.0);
        }
    }

    #[test]
    fn variance_is_monotone_and_capped_at_constant_stepsize() {
        let spectrum = Spectrum::new(vec![1.0, 0.5, 0.25, 0.125]).unwrap();
        let trace = spectrum.trace();
        let inst = ProblemInstance::gaussian(spectrum, vec![0.0; 4], vec![0.0; 4], 1.0).unwrap();
        let gamma = 0.9 / (3.0 * trace);
        let sched = Schedule::constant(gamma, 512).unwrap();
        let traj = exact_trajectory(&inst, &sched).unwrap();
        let cap = gamma * trace / (1.0 - 3.0 * gamma * trace) + 1e-9;
        for t in 1..traj.len() {
            assert!(traj.variance[t] >= traj.variance[t - 1]);
            assert!(traj.variance[t] <= cap);
        }
    }

    #[test]
    fn risk_state_validation() {
        assert!(RiskState::new(vec![1.0], vec![0.0, 0.0], 0).is_err());
        assert!(RiskState::new(vec![-1.0], vec![0.0], 0).is_err());
        assert!(RiskState::new(vec![1.0], vec![0.0], 3).is_ok());
    }
}
