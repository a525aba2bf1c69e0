//! Aitken extrapolation of deterministic sequences.

use crate::error::{invalid, Result};

/// Default relative threshold of the stagnation guard.
pub const DEFAULT_GUARD: f64 = 1e-13;

/// Aitken transform of `seq`.
///
/// Output element `j` is centred on input `i = j + 1` and uses
/// `ψ_{i−1}, ψ_i, ψ_{i+1}`:
///
/// ```text
/// g_i = ψ_{i+1} − ψ_i,   ψ_i − g_i·(ψ_i − ψ_{i−1}) / (g_i − g_{i−1})
/// ```
///
/// which is the secant root of the difference sequence. If
/// `|g_i − g_{i−1}| ≤ guard·|g_i|` or `|ψ_i − ψ_{i−1}| ≤ guard·|ψ_i|` the
/// element passes through as `ψ_{i+1}`. The output has `len − 2` elements.
pub fn aitken(seq: &[f64], guard: f64) -> Result<Vec<f64>> {
    if seq.len() < 3 {
        return invalid(format!("Aitken needs at least 3 values, got {}", seq.len()));
    }
    if !(guard > 0.0) {
        return invalid(format!("guard must be positive, got {guard}"));
    }
    Ok(seq
        .windows(3)
        .map(|w| {
            let (p0, p1, p2) = (w[0], w[1], w[2]);
            let g0 = p1 - p0;
            let g1 = p2 - p1;
            let dg = g1 - g0;
            if dg.abs() <= guard * g1.abs() || g0.abs() <= guard * p1.abs() {
                return p2;
            }
            let v = p1 - g1 * g0 / dg;
            if v.is_finite() {
                v
            } else {
                p2
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_recovered_in_one_step() {
        let s = [0.0, 0.5, 0.75];
        assert_eq!(aitken(&s, DEFAULT_GUARD).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_passes_through() {
        assert_eq!(aitken(&[2.5; 3], DEFAULT_GUARD).unwrap(), vec![2.5]);
    }

    #[test]
    fn two_rate_sequence() {
        let psi: Vec<f64> = (0..7)
            .map(|i| 1.0 + 0.5f64.powi(i) + 0.1 * 0.25f64.powi(i))
            .collect();
        let acc = aitken(&psi, DEFAULT_GUARD).unwrap();
        // Output index 3 is centred on i = 4.
        let acc_err = (acc[3] - 1.0).abs();
        let raw_err = (psi[5] - 1.0).abs();
        assert!(acc_err * 10.0 <= raw_err, "{acc_err} vs {raw_err}");
    }

    #[test]
    fn rejects_short_input() {
        assert!(aitken(&[1.0, 2.0], DEFAULT_GUARD).is_err());
        assert!(aitken(&[1.0, 2.0, 3.0], 0.0).is_err());
    }

    #[test]
    fn linear_sequence_guarded() {
        // Equal differences: the secant is parallel, so the guard fires.
        assert_eq!(aitken(&[1.0, 2.0, 3.0], DEFAULT_GUARD).unwrap(), vec![3.0]);
    }
}
