//! Least-squares slope estimation on log2-log2 axes.

use anyhow::{bail, Result};
use serde::Serialize;

/// Fitted line through `(log2 N, log2 risk)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits a line to `(log2 N, log2 risk)`. Needs at least 3 points with
/// strictly increasing `N` and positive risks.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        bail!("rate fit needs at least 3 points, got {}", points.len());
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            bail!(
                "sample sizes must be strictly increasing, got {} after {}",
                w[1].0,
                w[0].0
            );
        }
    }
    for &(n, risk) in points {
        if n == 0 {
            bail!("sample sizes must be positive");
        }
        if !risk.is_finite() || risk <= 0.0 {
            bail!("risk at N = {n} must be positive and finite, got {risk}");
        }
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.log2()).collect();
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}
