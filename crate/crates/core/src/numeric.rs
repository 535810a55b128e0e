//! Log-space numerics shared by the sampler and the oracles.

const SHIFT_THRESHOLD: f64 = 15.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Bernoulli-number coefficients B_{2k} / (2k (2k-1)) of the Stirling series.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Natural log of the Gamma function for `x > 0`.
///
/// Arguments below 15 are shifted up with `Γ(x) = Γ(x + n) / (x (x+1) ... (x+n-1))`
/// and the asymptotic Stirling series is evaluated at the shifted point.
/// Returns NaN for `x <= 0` or non-finite input.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < SHIFT_THRESHOLD {
        prod *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING {
        series += c * pow;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series - prod.ln()
}

/// `ln Γ(x + n) - ln Γ(x)` computed as a sum of logs of the rising factorial.
pub fn ln_rising(x: f64, n: u32) -> f64 {
    (0..n).map(|j| (x + j as f64).ln()).sum()
}

/// Normalizes log weights into probabilities by max-subtraction.
///
/// Entries equal to `-inf` get probability zero. Returns `None` when no
/// entry is finite or any entry is NaN / `+inf`.
pub fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return None;
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut p: Vec<f64> = log_w.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Some(p)
}

/// Inverse-CDF draw from unnormalized non-negative weights given `u ∈ [0, 1)`.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ln_gamma_reflect(x: f64) -> f64 {
        if x > 0.0 {
            ln_gamma(x)
        } else {
            (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x)
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn factorials() {
        let mut fact = 1.0f64;
        for n in 1..30u32 {
            // Γ(n+1) = n!
            fact *= n as f64;
            let (got, want) = (ln_gamma(n as f64 + 1.0), fact.ln());
            assert!((got - want).abs() <= 1e-14 * want.max(1.0), "n={n}");
        }
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn reference_values() {
        // Reference values from a 40-digit evaluation.
        let cases = [
            (0.5, 0.572_364_942_924_700_087_1),
            (1e-6, 13.815_509_980_749_431_67),
            (3.7, 1.428_072_326_665_387_922),
            (123.456, 469.605_547_129_929_468_7),
        ];
        for (x, want) in cases {
            assert!(
                rel(ln_gamma(x), want) < 1e-13,
                "x={x}: {} vs {want}",
                ln_gamma(x)
            );
        }
    }

    #[test]
    fn recurrence_holds() {
        for &x in &[1e-9, 1e-3, 0.1, 0.7, 2.5, 14.9, 15.0, 40.0, 1e4] {
            let lhs = ln_gamma(x + 1.0) - ln_gamma(x);
            assert!((lhs - x.ln()).abs() < 1e-12 * (1.0 + x.ln().abs()), "x={x}");
        }
    }

    #[test]
    fn reflection_at_negative_half() {
        // Γ(-1/2) = -2√π
        let want = (2.0 * PI.sqrt()).ln();
        assert!(rel(ln_gamma_reflect(-0.5), want) < 1e-13);
    }

    #[test]
    fn invalid_arguments() {
        assert!(ln_gamma(0.0).is_nan());
        assert!(ln_gamma(-1.0).is_nan());
        assert!(ln_gamma(f64::INFINITY).is_nan());
    }

    #[test]
    fn rising_matches_gamma_difference() {
        let x = 0.37;
        let n = 9;
        let via_gamma = ln_gamma(x + n as f64) - ln_gamma(x);
        assert!(rel(ln_rising(x, n), via_gamma) < 1e-13);
        assert_eq!(ln_rising(x, 0), 0.0);
    }

    #[test]
    fn normalize_handles_neg_inf() {
        let p = normalize_log_weights(&[0.0, f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
        assert!(normalize_log_weights(&[f64::NEG_INFINITY]).is_none());
        assert!(normalize_log_weights(&[f64::NAN, 0.0]).is_none());
    }

    #[test]
    fn normalize_extreme_offsets() {
        let p = normalize_log_weights(&[-1e5, -1e5 + 2f64.ln()]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_index_boundaries() {
        let w = [0.25, 0.0, 0.75];
        assert_eq!(sample_index(&w, 0.0), 0);
        assert_eq!(sample_index(&w, 0.2499), 0);
        assert_eq!(sample_index(&w, 0.25), 2);
        assert_eq!(sample_index(&w, 0.999_999), 2);
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.5), 1);
    }
}
