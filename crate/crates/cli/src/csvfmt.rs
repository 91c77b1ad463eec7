//! Canonical float formatting for CSV output.
//!
//! 17 significant digits round-trips every f64, so outputs are byte-stable
//! across runs and usable as golden files. Lines always end in a bare LF.

/// Formats with 17 significant digits in scientific notation; NaN prints as
/// `NaN` (used for divergent estimates).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_owned() } else { "-inf".to_owned() }
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for v in [0.0, 1.0, -0.3, 2.94, 1e-300, std::f64::consts::PI] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }
}
