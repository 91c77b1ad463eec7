//! Entrywise Monte-Carlo validation of the Gaussian fourth-moment closed
//! form `E[x x' A x x'] = 2 H A H + tr(H A) H` that the exact oracle rests
//! on. Every entry (diagonal and off-diagonal) must sit within 5 standard
//! errors of the closed form.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sgdlab::problem::{make_spectrum, SpectrumKind};

#[test]
fn closed_form_matches_sample_moments_within_five_standard_errors() {
    let samples = 100_000usize;
    for (seed, d) in [(11u64, 2usize), (12, 3), (13, 4)] {
        let spectrum = make_spectrum(SpectrumKind::Poly { r: 1.0 }, d).unwrap();
        let lambda = spectrum.eigenvalues().to_vec();
        let sqrt_lambda: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();

        // Welford accumulation per matrix entry.
        let mut mean = vec![0.0; d * d];
        let mut m2 = vec![0.0; d * d];
        let mut x = vec![0.0; d];
        for n in 1..=samples {
            let mut quad = 0.0;
            for i in 0..d {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                x[i] = sqrt_lambda[i] * z;
                quad += a[i] * x[i] * x[i];
            }
            for i in 0..d {
                for j in 0..d {
                    let v = quad * x[i] * x[j];
                    let idx = i * d + j;
                    let delta = v - mean[idx];
                    mean[idx] += delta / n as f64;
                    m2[idx] += delta * (v - mean[idx]);
                }
            }
        }

        let tr_ha: f64 = lambda.iter().zip(&a).map(|(l, ai)| l * ai).sum();
        for i in 0..d {
            for j in 0..d {
                let idx = i * d + j;
                let exact = if i == j {
                    2.0 * lambda[i] * lambda[i] * a[i] + tr_ha * lambda[i]
                } else {
                    0.0
                };
                let se = (m2[idx] / (samples as f64 - 1.0) / samples as f64).sqrt();
                assert!(
                    (mean[idx] - exact).abs() <= 5.0 * se,
                    "d={d} entry ({i},{j}): sample {} vs exact {exact} (se {se})",
                    mean[idx]
                );
            }
        }
    }
}
