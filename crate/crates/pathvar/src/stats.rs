//! Small statistical utilities shared by the estimators and experiments:
//! Kolmogorov-Smirnov distances, OLS slope, deterministic pairwise
//! summation, and standard-normal helpers.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Deterministic pairwise summation. The result depends only on the order
/// of `values`, never on thread count, and carries less rounding error than
/// a running sum.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Root mean square of `values`.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    (pairwise_sum(&sq) / values.len() as f64).sqrt()
}

/// One-sample KS distance sup_x |F_n(x) - F(x)| against a reference CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = xs.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        sup = sup
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    sup
}

/// Two-sample KS distance sup_x |F_n(x) - G_m(x)|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap_or(std::cmp::Ordering::Equal));
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap_or(std::cmp::Ordering::Equal));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    sup
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Standard normal quantile.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    if !(0.0 < q && q < 1.0) {
        return Err(Error::invalid(format!("quantile level {q} outside (0,1)")));
    }
    Ok(Normal::new(0.0, 1.0).unwrap().inverse_cdf(q))
}

/// Two-sided critical value for a confidence level, e.g. 0.95 -> 1.96.
pub fn two_sided_z(level: f64) -> Result<f64> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid(format!("CI level {level} outside (0,1)")));
    }
    std_normal_quantile(0.5 + level / 2.0)
}

/// OLS fit y = a + b x; returns (slope, slope standard error).
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("ols_slope needs >= 3 paired points"));
    }
    let n = x.len() as f64;
    let xbar = pairwise_sum(x) / n;
    let ybar = pairwise_sum(y) / n;
    let sxx: f64 = x.iter().map(|xi| (xi - xbar) * (xi - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("ols_slope: degenerate x values"));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (xi - xbar) * (yi - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let e = yi - intercept - slope * xi;
            e * e
        })
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok((slope, se))
}
