/// Two-sided 95% standard normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `n`, clamped to `[0, 1]` and
/// widened if rounding would leave the point estimate outside. `n = 0` gives
/// `[0, 1]`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = (center - half).clamp(0.0, 1.0).min(p);
    let hi = (center + half).clamp(0.0, 1.0).max(p);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_of_five_hundred() {
        let (lo, hi) = wilson_interval(250, 500);
        assert!((lo - 0.4563).abs() < 5e-4 && (hi - 0.5437).abs() < 5e-4, "{lo} {hi}");
    }

    #[test]
    fn extremes() {
        assert_eq!(wilson_interval(10, 10).1, 1.0);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }
}
