//! Shared statistical helpers.
//!
//! Empirical quantiles use one convention everywhere: the order statistic
//! at index ceil(gamma * n), 1-indexed. Interval endpoints, tabulated
//! quantiles and dispersion summaries all go through it, so values are
//! reproducible across call sites.

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty slice");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n-1 denominator) variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "variance needs at least two values");
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Copy of `xs` sorted ascending (NaNs ordered last via total order).
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Order statistic at index ceil(gamma * n), 1-indexed, clamped to the
/// sample. `xs` must already be sorted ascending.
pub fn quantile(xs: &[f64], gamma: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&gamma), "gamma out of [0,1]");
    let rank = (gamma * xs.len() as f64).ceil() as usize;
    xs[rank.clamp(1, xs.len()) - 1]
}

/// Upper-alpha quantile: the value exceeded with probability alpha.
pub fn upper_quantile(xs: &[f64], alpha: f64) -> f64 {
    quantile(xs, 1.0 - alpha)
}

/// Median of a sample in any order.
pub fn median(xs: &[f64]) -> f64 {
    quantile(&sorted(xs), 0.5)
}

/// Interquartile range of a sample in any order.
pub fn iqr(xs: &[f64]) -> f64 {
    let asc = sorted(xs);
    quantile(&asc, 0.75) - quantile(&asc, 0.25)
}

/// Binomial Monte Carlo standard error sqrt(p(1-p)/n).
pub fn mc_standard_error(p_hat: f64, n: usize) -> f64 {
    assert!(n > 0);
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Standard normal CDF via the Taylor expansion
/// Phi(x) = 1/2 + phi(x) (x + x^3/3 + x^5/(3*5) + ...).
/// Absolute error near machine precision; beyond |x| = 20 the tail mass
/// (< 1e-88) is clamped to 0 or 1.
pub fn normal_cdf(x: f64) -> f64 {
    if x <= -20.0 {
        return 0.0;
    }
    if x >= 20.0 {
        return 1.0;
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut i = 1.0;
    for _ in 0..3000 {
        i += 2.0;
        term *= x2 / i;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    let phi = (-0.5 * x2).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (0.5 + sum * phi).clamp(0.0, 1.0)
}

/// Least-squares slope of y on x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        // advance both samples past the current value so ties (common for
        // lattice-valued draws) are handled symmetrically
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    KsTest {
        statistic: d,
        p_value: ks_p_value(ne, d),
    }
}

/// One-sample Kolmogorov-Smirnov test against the standard normal.
pub fn ks_standard_normal(xs: &[f64]) -> KsTest {
    let xs = sorted(xs);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    KsTest {
        statistic: d,
        p_value: ks_p_value(n, d),
    }
}

fn ks_p_value(effective_n: f64, d: f64) -> f64 {
    // Stephens' small-sample correction to the Kolmogorov distribution.
    let sq = effective_n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 0.2 {
        // left of the distribution's support for practical purposes; the
        // alternating series needs huge j here and the answer is 1
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        p += 2.0 * sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_uses_ceil_rank() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(quantile(&xs, 0.025), 25.0);
        assert_eq!(quantile(&xs, 0.975), 975.0);
        assert_eq!(upper_quantile(&xs, 0.025), 975.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 1000.0);
    }

    #[test]
    fn normal_cdf_matches_known_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.959963985) - 0.975).abs() < 2e-7);
        assert!((normal_cdf(-1.0) - 0.15865525).abs() < 2e-7);
        assert!((normal_cdf(4.0) - 0.999968329).abs() < 2e-7);
    }

    #[test]
    fn ks_detects_shift_and_accepts_identity() {
        let a: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&a, &shifted).p_value < 0.001);
        assert!(ks_two_sample(&a, &a).p_value > 0.99);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert!((ols_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn iqr_of_uniform_ladder() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(iqr(&xs), 50.0);
    }
}
