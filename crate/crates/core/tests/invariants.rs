//! Property tests for schedules, spectra, thresholds, and envelopes.

use proptest::prelude::*;

use sgdlab::bounds::{
    effective_dim_geo, f_lower_form, f_upper_form, k_dagger_geo, k_star_geo, lower_envelope_f,
    upper_envelope_f,
};
use sgdlab::problem::{make_spectrum, max_initial_stepsize, ProblemInstance, SpectrumKind};
use sgdlab::schedule::{default_phase_length, Schedule};

#[test]
fn halving_loop_equivalence_exhaustive_at_ten_thousand_steps() {
    let n = 10_000;
    for (s, k) in [(0usize, 1usize), (0, 3), (0, 342), (5000, 1), (5000, 3), (5000, 342)] {
        let sched = Schedule::tail_geometric(0.7, n, s, k).unwrap();
        let mut gamma = 0.7;
        for t in 1..=n {
            if t > s && (t - s).is_multiple_of(k) {
                gamma /= 2.0;
            }
            let direct = sched.stepsize_at(t).unwrap();
            if direct >= 1e-290 {
                assert_eq!(direct, gamma, "s={s} K={k} t={t}");
            } else {
                assert!((direct - gamma).abs() <= 2.0 * f64::MIN_POSITIVE);
            }
        }
    }
}

fn any_schedule() -> impl Strategy<Value = Schedule> {
    let gamma0 = 1e-4f64..2.0;
    let n = 2usize..600;
    (gamma0, n).prop_flat_map(|(g, n)| {
        prop_oneof![
            Just(Schedule::constant(g, n).unwrap()),
            (0..n - 1, 1usize..64).prop_map(move |(s, k)| {
                Schedule::tail_geometric(g, n, s, k).unwrap()
            }),
            (0..n - 1, 0.0f64..=1.0).prop_map(move |(s, a)| {
                Schedule::tail_polynomial(g, n, s, a).unwrap()
            }),
        ]
    })
}

proptest! {
    #[test]
    fn stepsizes_never_increase(sched in any_schedule()) {
        let mut prev = f64::INFINITY;
        for g in sched.stepsizes() {
            prop_assert!(g <= prev);
            prop_assert!(g >= 0.0);
            prev = g;
        }
    }

    #[test]
    fn halving_loop_reproduces_the_closed_form(
        gamma0 in 1e-4f64..2.0,
        n in 2usize..2000,
        s_frac in 0.0f64..1.0,
        k in 1usize..400,
    ) {
        let s = ((n - 1) as f64 * s_frac) as usize;
        let sched = Schedule::tail_geometric(gamma0, n, s, k).unwrap();
        let mut gamma = gamma0;
        for t in 1..=n {
            if t > s && (t - s).is_multiple_of(k) {
                gamma /= 2.0;
            }
            let direct = sched.stepsize_at(t).unwrap();
            if direct >= 1e-290 {
                prop_assert_eq!(direct, gamma);
            } else {
                // Deep in the subnormal range the two evaluation orders may
                // round differently; both have underflowed to nothing.
                prop_assert!((direct - gamma).abs() <= 2.0 * f64::MIN_POSITIVE);
            }
        }
    }

    #[test]
    fn geometric_phases_are_constant_blocks(
        gamma0 in 1e-3f64..1.0,
        s in 0usize..100,
        k in 2usize..40,
        ell in 0usize..8,
    ) {
        let n = s + k * 10;
        let sched = Schedule::tail_geometric(gamma0, n, s, k).unwrap();
        let expected = gamma0 * (-(ell as f64)).exp2();
        prop_assert_eq!(sched.stepsize_at(s + ell * k + 1).unwrap(), expected);
        // Constant within the block of steps sharing the same halving count.
        let first = s + ell * k;
        if ell >= 1 {
            for t in first..(first + k).min(n + 1) {
                prop_assert_eq!(sched.stepsize_at(t).unwrap(), expected);
            }
        }
    }

    #[test]
    fn tail_geometric_half_horizon_length_is_theta_n_gamma(
        gamma0 in 1e-4f64..2.0,
        half in 2usize..2048,
    ) {
        let n = 2 * half;
        let s = half;
        let k = default_phase_length(n, s).unwrap();
        let sched = Schedule::tail_geometric(gamma0, n, s, k).unwrap();
        let total = sched.total_length();
        let nf = n as f64;
        prop_assert!(total >= nf * gamma0 / 2.0 * (1.0 - 1e-12));
        prop_assert!(total <= nf * gamma0 * (1.0 + 1e-12));
    }

    #[test]
    fn max_stepsize_strictly_decreases_in_every_argument(
        trace_scale in 0.1f64..10.0,
        alpha in 1.0f64..6.0,
        phase in 2usize..4096,
    ) {
        let base = make_spectrum(SpectrumKind::Exp, 20).unwrap();
        let scaled: Vec<f64> = base.eigenvalues().iter().map(|l| l * trace_scale).collect();
        let spectrum = sgdlab::problem::Spectrum::new(scaled).unwrap();
        let d = spectrum.dim();
        let inst = ProblemInstance::new(
            spectrum.clone(), vec![0.0; d], vec![0.0; d], 0.0, alpha, 1.0,
        ).unwrap();
        let g = max_initial_stepsize(&inst, 0, phase).unwrap();
        prop_assert!(g > 0.0);
        let g_longer = max_initial_stepsize(&inst, 1, phase).unwrap();
        prop_assert!(g_longer < g);

        let inst_sharper = ProblemInstance::new(
            spectrum.clone(), vec![0.0; d], vec![0.0; d], 0.0, alpha + 0.5, 1.0,
        ).unwrap();
        prop_assert!(max_initial_stepsize(&inst_sharper, 0, phase).unwrap() < g);

        let bigger: Vec<f64> = spectrum.eigenvalues().iter().map(|l| l * 1.5).collect();
        let inst_bigger = ProblemInstance::new(
            sgdlab::problem::Spectrum::new(bigger).unwrap(),
            vec![0.0; d], vec![0.0; d], 0.0, alpha, 1.0,
        ).unwrap();
        prop_assert!(max_initial_stepsize(&inst_bigger, 0, phase).unwrap() < g);
    }

    #[test]
    fn generated_spectra_are_sorted_and_positive(
        d in 1usize..300,
        r in 0.1f64..3.0,
    ) {
        for kind in [
            SpectrumKind::Poly { r },
            SpectrumKind::Polylog { r: 1.0 + r },
            SpectrumKind::Exp,
        ] {
            let s = make_spectrum(kind, d).unwrap();
            prop_assert!(s.trace() > 0.0 && s.trace().is_finite());
            for w in s.eigenvalues().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!(*s.eigenvalues().last().unwrap() > 0.0);
        }
    }

    #[test]
    fn head_index_never_exceeds_middle_index(
        gamma0 in 1e-6f64..10.0,
        s in 0usize..5000,
        k in 1usize..5000,
        d in 1usize..64,
        r in 0.2f64..2.0,
    ) {
        let sp = make_spectrum(SpectrumKind::Poly { r }, d).unwrap();
        prop_assert!(k_star_geo(&sp, gamma0, k) <= k_dagger_geo(&sp, gamma0, s, k));
    }

    #[test]
    fn effective_dimension_grows_with_gamma0(
        lo in 1e-5f64..0.5,
        scale in 1.0f64..20.0,
        s in 0usize..2048,
        k in 1usize..512,
        d in 2usize..64,
    ) {
        let sp = make_spectrum(SpectrumKind::Poly { r: 1.0 }, d).unwrap();
        let hi = lo * scale;
        let dim_at = |g: f64| {
            let ks = k_star_geo(&sp, g, k);
            let kd = k_dagger_geo(&sp, g, s, k);
            effective_dim_geo(&sp, g, s, k, ks, kd).unwrap()
        };
        prop_assert!(dim_at(lo) <= dim_at(hi) * (1.0 + 1e-12));
    }

    #[test]
    fn scalar_forms_stay_inside_their_envelopes(
        x_exp in -10.0f64..0.0,
        s_idx in 0usize..3,
        k_idx in 0usize..3,
    ) {
        let x = 2.0f64.powf(x_exp).min(1.0);
        let s = [0usize, 128, 1024][s_idx];
        let k = [10usize, 100, 342][k_idx];
        let l = (k as f64).log2().ceil() as usize;
        prop_assert!(f_upper_form(x, s, k, l).unwrap() <= upper_envelope_f(x, s, k).unwrap());
        prop_assert!(f_lower_form(x, s, k, l).unwrap() >= lower_envelope_f(x, s, k).unwrap());
    }
}
