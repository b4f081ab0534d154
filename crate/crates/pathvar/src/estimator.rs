//! Statistics computed from a simulated path: the path-functional statistic
//! V(X,g)^n, the bipower variance estimator V^n, realized ranges R(X,p)^n,
//! the local-average quadratic-variation estimator, and feasible
//! studentization.

use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::model::{fmt_f64, segment_extract, FineGridPath};
use crate::stats::{pairwise_sum, two_sided_z};

/// Two-sided confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// A statistic value with grid metadata and optional uncertainty.
#[derive(Clone, Debug)]
pub struct EstimateResult {
    pub estimator: &'static str,
    pub value: f64,
    /// Horizon t used.
    pub t: f64,
    pub delta_n: f64,
    /// Number of summands actually used.
    pub n_used: usize,
    /// Asymptotic-variance estimate (the bipower value, floored at 0).
    pub avar: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
}

impl EstimateResult {
    fn new(estimator: &'static str, value: f64, path: &FineGridPath, n_used: usize) -> Self {
        EstimateResult {
            estimator,
            value,
            t: path.grid().horizon(),
            delta_n: path.grid().delta_n(),
            n_used,
            avar: None,
            ci: None,
        }
    }

    /// Attach the feasible CI `value +/- z * sqrt(delta_n * avar)` from a
    /// bipower variance estimate. A non-positive variance is floored at 0
    /// (degenerate CI of zero width); the flag is visible through
    /// [`EstimateResult::degenerate_variance`].
    pub fn with_ci(mut self, variance_stat: &EstimateResult, level: f64) -> Result<Self> {
        let z = two_sided_z(level)?;
        let avar = variance_stat.value.max(0.0);
        let half = z * (self.delta_n * avar).sqrt();
        self.avar = Some(avar);
        self.ci = Some(ConfidenceInterval {
            lo: self.value - half,
            hi: self.value + half,
            level,
        });
        Ok(self)
    }

    /// True when an attached variance was floored at zero.
    pub fn degenerate_variance(&self) -> bool {
        matches!(self.avar, Some(v) if v <= 0.0)
    }

    /// CSV header matching [`EstimateResult::csv_row`].
    pub fn csv_header() -> &'static str {
        "estimator,horizon,n_coarse,m_fine,value,avar,ci_lo,ci_hi,seed"
    }

    pub fn csv_row(&self, path: &FineGridPath, seed: u64) -> String {
        let (avar, lo, hi) = match (self.avar, self.ci) {
            (Some(a), Some(ci)) => (fmt_f64(a), fmt_f64(ci.lo), fmt_f64(ci.hi)),
            (Some(a), None) => (fmt_f64(a), String::new(), String::new()),
            _ => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.estimator,
            fmt_f64(self.t),
            path.grid().n_coarse(),
            path.grid().m_fine(),
            fmt_f64(self.value),
            avar,
            lo,
            hi,
            seed
        )
    }
}

/// V(X,g)^n_t = delta_n * sum_i g(delta_n^{-1/2} d_i(X)).
///
/// This is the continuous-case statistic; a path carrying jumps is refused
/// (use [`v_statistic_unchecked`] to override).
pub fn v_statistic(path: &FineGridPath, g: &FunctionalSpec) -> Result<EstimateResult> {
    if path.has_jumps() {
        return Err(Error::Misuse(
            "v_statistic on a path with jumps: the continuous-case law does not apply \
             (use v_statistic_unchecked to override)"
                .into(),
        ));
    }
    v_statistic_unchecked(path, g)
}

/// [`v_statistic`] without the jump guard.
pub fn v_statistic_unchecked(path: &FineGridPath, g: &FunctionalSpec) -> Result<EstimateResult> {
    let n = path.grid().n_coarse();
    let delta_n = path.grid().delta_n();
    let scale = 1.0 / delta_n.sqrt();
    let mut terms = Vec::with_capacity(n);
    for i in 1..=n {
        let seg = segment_extract(path, i, scale)?;
        terms.push(g.eval(&seg)?);
    }
    let value = delta_n * pairwise_sum(&terms);
    Ok(EstimateResult::new("v_statistic", value, path, n))
}

/// Bipower variance estimator
/// V^n_t = delta_n * sum_{i<n} { g^2(seg_i) - g(seg_i) g(seg_{i+1}) }.
///
/// Requires an even functional (the studentization formula is proved in the
/// even case) and at least two coarse intervals. Finite-sample negativity is
/// possible; the raw value is returned and flooring happens where the value
/// is used as a variance.
pub fn bipower_variance(path: &FineGridPath, g: &FunctionalSpec) -> Result<EstimateResult> {
    if !g.is_even() {
        return Err(Error::Misuse(
            "bipower_variance requires an even functional".into(),
        ));
    }
    let n = path.grid().n_coarse();
    if n < 2 {
        return Err(Error::invalid("bipower_variance needs >= 2 coarse intervals"));
    }
    let delta_n = path.grid().delta_n();
    let scale = 1.0 / delta_n.sqrt();
    let mut g_vals = Vec::with_capacity(n);
    for i in 1..=n {
        let seg = segment_extract(path, i, scale)?;
        g_vals.push(g.eval(&seg)?);
    }
    let terms: Vec<f64> = (0..n - 1)
        .map(|i| g_vals[i] * g_vals[i] - g_vals[i] * g_vals[i + 1])
        .collect();
    let value = delta_n * pairwise_sum(&terms);
    Ok(EstimateResult::new("bipower_variance", value, path, n - 1))
}

/// Studentized statistic delta_n^{-1/2} (value - target) / sqrt(V^n).
pub fn studentize(
    stat: &EstimateResult,
    target: f64,
    variance_stat: &EstimateResult,
) -> Result<f64> {
    if variance_stat.value <= 0.0 {
        return Err(Error::DegenerateVariance {
            value: variance_stat.value,
        });
    }
    Ok((stat.value - target) / (stat.delta_n.sqrt() * variance_stat.value.sqrt()))
}

/// Realized range R(X,p)^n_t = sum_i (max - min over block i)^p. Note there
/// is no delta_n prefactor, in contrast with [`v_statistic`].
pub fn realized_range(path: &FineGridPath, p: f64) -> Result<EstimateResult> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("exponent p must be > 0, got {p}")));
    }
    let n = path.grid().n_coarse();
    let mut terms = Vec::with_capacity(n);
    for i in 1..=n {
        let block = path.block(i);
        let mut lo = block[0];
        let mut hi = block[0];
        for &v in &block[1..] {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        terms.push((hi - lo).powf(p));
    }
    let value = pairwise_sum(&terms);
    Ok(EstimateResult::new("realized_range", value, path, n))
}

/// Local-average quadratic-variation estimator:
/// sum_{i>=2} (Xbar_i - Xbar_{i-1})^2 with Xbar_i the trapezoid average of
/// the block's fine samples. Converges to (2/3) * integrated variance.
pub fn local_average_qv(path: &FineGridPath) -> Result<EstimateResult> {
    let m = path.grid().m_fine();
    if m < 2 {
        return Err(Error::invalid(
            "local_average_qv needs m_fine >= 2 (averages need intra-block samples)",
        ));
    }
    if path.has_jumps() {
        return Err(Error::Misuse(
            "local_average_qv on a path with jumps: the continuous-case law does not apply"
                .into(),
        ));
    }
    let n = path.grid().n_coarse();
    let averages: Vec<f64> = (1..=n)
        .map(|i| {
            let block = path.block(i);
            let mut acc = 0.5 * (block[0] + block[m]);
            for v in &block[1..m] {
                acc += v;
            }
            acc / m as f64
        })
        .collect();
    let terms: Vec<f64> = averages
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .collect();
    let value = pairwise_sum(&terms);
    Ok(EstimateResult::new("local_average_qv", value, path, n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_path, Coef, JumpSpec, ModelSpec, SizeLaw, TimeGrid};
    use crate::rng::SeedStream;
    use approx::assert_relative_eq;

    fn flat_path(x0: f64, grid: TimeGrid) -> FineGridPath {
        FineGridPath::from_parts(
            grid,
            vec![x0; grid.n_fine_points()],
            vec![0.0; grid.n_fine_points()],
            vec![],
        )
        .unwrap()
    }

    fn linear_path(grid: TimeGrid) -> FineGridPath {
        let xs: Vec<f64> = (0..grid.n_fine_points())
            .map(|k| grid.fine_time(k))
            .collect();
        FineGridPath::from_parts(grid, xs, vec![0.0; grid.n_fine_points()], vec![]).unwrap()
    }

    #[test]
    fn zero_path_gives_zero_statistic() {
        let grid = TimeGrid::new(1.0, 16, 4).unwrap();
        let path = flat_path(7.5, grid);
        for g in [
            FunctionalSpec::terminal_power(2.0).unwrap(),
            FunctionalSpec::integral_power(1.5).unwrap(),
            FunctionalSpec::range_power(3.0).unwrap(),
        ] {
            assert_eq!(v_statistic(&path, &g).unwrap().value, 0.0);
            assert_eq!(bipower_variance(&path, &g).unwrap().value, 0.0);
        }
    }

    #[test]
    fn n_used_counts() {
        let grid = TimeGrid::new(1.0, 16, 4).unwrap();
        let path = flat_path(0.0, grid);
        let g = FunctionalSpec::terminal_power(2.0).unwrap();
        assert_eq!(v_statistic(&path, &g).unwrap().n_used, 16);
        assert_eq!(bipower_variance(&path, &g).unwrap().n_used, 15);
        assert_eq!(realized_range(&path, 2.0).unwrap().n_used, 16);
        assert_eq!(local_average_qv(&path).unwrap().n_used, 15);
    }

    #[test]
    fn jump_guard() {
        let jumps = JumpSpec::new(
            5.0,
            SizeLaw::TwoPoint {
                a: 1.0,
                b: -2.0,
                prob_a: 0.5,
            },
        )
        .unwrap();
        let model = ModelSpec::constant_vol(0.0, Coef::zero(), 0.0).with_jumps(jumps);
        let grid = TimeGrid::new(1.0, 32, 4).unwrap();
        // find a seed that actually jumps
        let path = (0..100)
            .map(|r| simulate_path(&model, &grid, &SeedStream::new(0xF00).child(r)).unwrap())
            .find(|p| p.has_jumps())
            .expect("no jump in 100 tries");
        let g = FunctionalSpec::terminal_power(2.0).unwrap();
        match v_statistic(&path, &g) {
            Err(Error::Misuse(_)) => {}
            other => panic!("expected Misuse, got {other:?}"),
        }
        assert!(v_statistic_unchecked(&path, &g).is_ok());
        match local_average_qv(&path) {
            Err(Error::Misuse(_)) => {}
            other => panic!("expected Misuse, got {other:?}"),
        }
    }

    #[test]
    fn bipower_requires_even() {
        let grid = TimeGrid::new(1.0, 8, 2).unwrap();
        let path = flat_path(0.0, grid);
        let odd = FunctionalSpec::custom(
            std::sync::Arc::new(|x: &crate::functional::Segment| x.terminal()),
            None,
            false,
        );
        match bipower_variance(&path, &odd) {
            Err(Error::Misuse(_)) => {}
            other => panic!("expected Misuse, got {other:?}"),
        }
    }

    #[test]
    fn studentize_arithmetic() {
        let grid = TimeGrid::new(1.0, 100, 2).unwrap();
        let path = flat_path(0.0, grid);
        let g = FunctionalSpec::terminal_power(2.0).unwrap();
        let mut stat = v_statistic(&path, &g).unwrap();
        let mut var = bipower_variance(&path, &g).unwrap();
        // stat - target = 0.02, delta_n = 0.01, V^n = 4 -> (0.02/0.1)/2 = 0.1
        stat.value = 0.02;
        var.value = 4.0;
        assert_relative_eq!(studentize(&stat, 0.0, &var).unwrap(), 0.1);
        // equal target gives 0
        assert_eq!(studentize(&stat, 0.02, &var).unwrap(), 0.0);
        var.value = 0.0;
        match studentize(&stat, 0.0, &var) {
            Err(Error::DegenerateVariance { .. }) => {}
            other => panic!("expected DegenerateVariance, got {other:?}"),
        }
    }

    #[test]
    fn realized_range_pure_jump_blocks() {
        // two jumps {1, -2} in distinct blocks, sigma = mu = 0, p = 3:
        // value = 1 + 8 = 9
        let grid = TimeGrid::new(1.0, 8, 4).unwrap();
        let mut xs = vec![0.0; grid.n_fine_points()];
        for x in xs.iter_mut().skip(6) {
            *x += 1.0; // jump +1 in block 2 (cell index 6)
        }
        for x in xs.iter_mut().skip(22) {
            *x += -2.0; // jump -2 in block 6
        }
        let path =
            FineGridPath::from_parts(grid, xs, vec![0.0; grid.n_fine_points()], vec![]).unwrap();
        assert_relative_eq!(realized_range(&path, 3.0).unwrap().value, 9.0);
    }

    #[test]
    fn realized_range_linear_path() {
        // deterministic x(t) = t: each block range is delta_n, p = 2 gives
        // n * delta_n^2 = t * delta_n
        let grid = TimeGrid::new(1.0, 50, 4).unwrap();
        let path = linear_path(grid);
        let r = realized_range(&path, 2.0).unwrap();
        assert_relative_eq!(r.value, grid.delta_n(), max_relative = 1e-10);
        assert!(realized_range(&path, 0.0).is_err());
        assert!(realized_range(&path, -1.0).is_err());
    }

    #[test]
    fn local_average_constant_and_linear() {
        let grid = TimeGrid::new(1.0, 20, 5).unwrap();
        assert_eq!(local_average_qv(&flat_path(3.0, grid)).unwrap().value, 0.0);
        // x(t) = t: consecutive averages differ by exactly delta_n
        let v = local_average_qv(&linear_path(grid)).unwrap().value;
        let expected = (grid.n_coarse() - 1) as f64 * grid.delta_n() * grid.delta_n() * 1.0;
        assert_relative_eq!(v, expected, max_relative = 1e-10);
        let coarse_only = TimeGrid::new(1.0, 20, 1).unwrap();
        assert!(local_average_qv(&flat_path(0.0, coarse_only)).is_err());
    }

    #[test]
    fn prefactor_identity_terminal_power() {
        // V(X,g)^n with terminal_power(p) equals
        // delta_n^{1-p/2} * sum |coarse increment|^p to 12 significant digits
        let model = ModelSpec::standard_brownian();
        let grid = TimeGrid::new(1.0, 64, 8).unwrap();
        let path = simulate_path(&model, &grid, &SeedStream::new(0x1D)).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let g = FunctionalSpec::terminal_power(p).unwrap();
            let v = v_statistic(&path, &g).unwrap().value;
            let dn = grid.delta_n();
            let direct: f64 = (1..=64)
                .map(|i| path.coarse_increment(i).abs().powf(p))
                .sum::<f64>()
                * dn.powf(1.0 - p / 2.0);
            assert_relative_eq!(v, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaling_homogeneity() {
        let model = ModelSpec::standard_brownian();
        let grid = TimeGrid::new(1.0, 32, 4).unwrap();
        let path = simulate_path(&model, &grid, &SeedStream::new(0x2E)).unwrap();
        let c = 2.5;
        let scaled = path.with_scaled_x(c);
        for (p, g) in [
            (2.0, FunctionalSpec::terminal_power(2.0).unwrap()),
            (1.5, FunctionalSpec::range_power(1.5).unwrap()),
            (3.0, FunctionalSpec::integral_power(3.0).unwrap()),
        ] {
            let v1 = v_statistic(&path, &g).unwrap().value;
            let v2 = v_statistic(&scaled, &g).unwrap().value;
            assert_relative_eq!(v2, c.powf(p) * v1, max_relative = 1e-12);
        }
        let r1 = realized_range(&path, 2.0).unwrap().value;
        let r2 = realized_range(&scaled, 2.0).unwrap().value;
        assert_relative_eq!(r2, c * c * r1, max_relative = 1e-12);
    }

    #[test]
    fn range_dominance_pathwise() {
        let model = ModelSpec::standard_brownian();
        let grid = TimeGrid::new(1.0, 32, 8).unwrap();
        for r in 0..50 {
            let path = simulate_path(&model, &grid, &SeedStream::new(0x3F).child(r)).unwrap();
            for p in [0.5, 1.0, 2.0, 4.0] {
                let range = realized_range(&path, p).unwrap().value;
                let power: f64 = (1..=32)
                    .map(|i| path.coarse_increment(i).abs().powf(p))
                    .sum();
                assert!(range >= power - 1e-12 * range.abs());
            }
        }
    }

    #[test]
    fn ci_attachment() {
        let grid = TimeGrid::new(1.0, 4, 2).unwrap();
        let path = flat_path(0.0, grid);
        let g = FunctionalSpec::terminal_power(2.0).unwrap();
        let stat = v_statistic(&path, &g).unwrap();
        let mut var = bipower_variance(&path, &g).unwrap();
        var.value = 4.0;
        let with = stat.clone().with_ci(&var, 0.95).unwrap();
        let half = 1.959964 * (grid.delta_n() * 4.0).sqrt();
        assert!((with.ci.unwrap().hi - with.value - half).abs() < 1e-4);
        assert!(!with.degenerate_variance());
        // negative variance floors to a degenerate zero-width CI
        var.value = -1.0;
        let degen = stat.with_ci(&var, 0.95).unwrap();
        assert!(degen.degenerate_variance());
        assert_eq!(degen.ci.unwrap().lo, degen.value);
    }
}
