//! Ito semimartingale simulation on a nested coarse/fine time grid.
//!
//! The observable process is
//!
//! dX = mu(t, X) dt + sigma dW + dZ,        Z compound Poisson,
//! dsigma = mu~(t, sigma) dt + sigma~(t, sigma) dW + v~(t, sigma) dV (+ vol jumps),
//!
//! discretized by Euler-Maruyama on the fine grid. The coarse grid carries
//! the observation step delta_n = horizon / n_coarse; each coarse interval
//! holds m_fine substeps so that block statistics (sups, averages) can be
//! approximated from intra-block samples.
//!
//! All randomness flows through counter-based [`SeedStream`]s keyed by
//! (interval, channel), so simulations are reproducible independent of
//! thread count and of which optional shocks a model actually uses.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::functional::Segment;
use crate::rng::{Channel, SeedStream};

/// Nested observation grid: `n_coarse` intervals of length `delta_n`, each
/// subdivided into `m_fine` cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_coarse: usize,
    m_fine: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_coarse: usize, m_fine: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
        }
        if n_coarse < 1 {
            return Err(Error::invalid("n_coarse must be >= 1"));
        }
        if m_fine < 1 {
            return Err(Error::invalid("m_fine must be >= 1"));
        }
        Ok(TimeGrid {
            horizon,
            n_coarse,
            m_fine,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn m_fine(&self) -> usize {
        self.m_fine
    }

    /// Coarse step delta_n.
    pub fn delta_n(&self) -> f64 {
        self.horizon / self.n_coarse as f64
    }

    /// Fine step delta_n / m_fine.
    pub fn fine_step(&self) -> f64 {
        self.delta_n() / self.m_fine as f64
    }

    /// Total number of fine grid points, n_coarse * m_fine + 1.
    pub fn n_fine_points(&self) -> usize {
        self.n_coarse * self.m_fine + 1
    }

    pub fn fine_time(&self, k: usize) -> f64 {
        k as f64 * self.fine_step()
    }

    /// Fine index of the left endpoint of coarse interval `i` (1-based).
    pub fn block_start(&self, i: usize) -> usize {
        (i - 1) * self.m_fine
    }
}

type CoefFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A coefficient function of (time, state). The serializable variants cover
/// the usual parametrizations (constants, affine/mean-reverting forms);
/// `Custom` admits arbitrary closures from code.
#[derive(Clone)]
pub enum Coef {
    Const(f64),
    /// intercept + slope * state
    Affine { intercept: f64, slope: f64 },
    Custom(Arc<CoefFn>),
}

impl Coef {
    pub fn constant(c: f64) -> Self {
        Coef::Const(c)
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        Coef::Affine { intercept, slope }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Coef::Custom(Arc::new(f))
    }

    pub fn zero() -> Self {
        Coef::Const(0.0)
    }

    #[inline]
    pub fn eval(&self, t: f64, state: f64) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::Affine { intercept, slope } => intercept + slope * state,
            Coef::Custom(f) => f(t, state),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coef::Const(c) if *c == 0.0)
    }
}

impl std::fmt::Debug for Coef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coef::Const(c) => write!(f, "Const({c})"),
            Coef::Affine { intercept, slope } => write!(f, "Affine({intercept} + {slope}*s)"),
            Coef::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Jump size distributions. Every law keeps |J| >= min_abs_size() so jump
/// sizes stay bounded away from zero.
#[derive(Clone, Debug, PartialEq)]
pub enum SizeLaw {
    /// J = a with probability prob_a, else b.
    TwoPoint { a: f64, b: f64, prob_a: f64 },
    /// Normal(mean, sd) resampled until |J| >= floor.
    GaussianTruncated { mean: f64, sd: f64, floor: f64 },
    /// |J| uniform on [lo, hi], sign +/- with equal probability.
    UniformSigned { lo: f64, hi: f64 },
}

impl SizeLaw {
    pub fn min_abs_size(&self) -> f64 {
        match self {
            SizeLaw::TwoPoint { a, b, .. } => a.abs().min(b.abs()),
            SizeLaw::GaussianTruncated { floor, .. } => *floor,
            SizeLaw::UniformSigned { lo, .. } => *lo,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SizeLaw::TwoPoint { a, b, prob_a } => {
                if *a == 0.0 || *b == 0.0 {
                    return Err(Error::invalid("two_point sizes must be non-zero"));
                }
                if !(0.0..=1.0).contains(prob_a) {
                    return Err(Error::invalid("two_point prob_a must be in [0,1]"));
                }
            }
            SizeLaw::GaussianTruncated { sd, floor, .. } => {
                if !(*sd > 0.0) {
                    return Err(Error::invalid("gaussian_truncated sd must be > 0"));
                }
                if !(*floor > 0.0) {
                    return Err(Error::invalid("gaussian_truncated floor must be > 0"));
                }
            }
            SizeLaw::UniformSigned { lo, hi } => {
                if !(*lo > 0.0) || hi < lo {
                    return Err(Error::invalid("uniform_signed needs 0 < lo <= hi"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut crate::rng::CounterRng) -> f64 {
        match self {
            SizeLaw::TwoPoint { a, b, prob_a } => {
                if rng.uniform01() < *prob_a {
                    *a
                } else {
                    *b
                }
            }
            SizeLaw::GaussianTruncated { mean, sd, floor } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let j = mean + sd * z;
                if j.abs() >= *floor {
                    return j;
                }
            },
            SizeLaw::UniformSigned { lo, hi } => {
                let mag = lo + (hi - lo) * rng.uniform01();
                if rng.uniform01() < 0.5 {
                    mag
                } else {
                    -mag
                }
            }
        }
    }
}

/// Compound Poisson jump component.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpSpec {
    pub intensity: f64,
    pub size_law: SizeLaw,
}

impl JumpSpec {
    pub fn new(intensity: f64, size_law: SizeLaw) -> Result<Self> {
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::invalid("jump intensity must be >= 0"));
        }
        size_law.validate()?;
        Ok(JumpSpec {
            intensity,
            size_law,
        })
    }

    pub fn min_abs_size(&self) -> f64 {
        self.size_law.min_abs_size()
    }
}

/// Stochastic volatility specification: dsigma = mu~ dt + sigma~ dW + v~ dV.
#[derive(Clone, Debug)]
pub struct VolSpec {
    pub sigma0: f64,
    pub mu_tilde: Coef,
    pub sigma_tilde: Coef,
    pub v_tilde: Coef,
    /// When present, sigma jumps simultaneously with each X jump (the jump
    /// counters are fully correlated); sizes are drawn from this law.
    pub vol_jumps: Option<JumpSpec>,
    /// The sigma path is clamped from below at this value.
    pub positivity_floor: f64,
}

impl VolSpec {
    /// Constant volatility sigma = sigma0.
    pub fn constant(sigma0: f64) -> Self {
        VolSpec {
            sigma0,
            mu_tilde: Coef::zero(),
            sigma_tilde: Coef::zero(),
            v_tilde: Coef::zero(),
            vol_jumps: None,
            positivity_floor: default_floor(sigma0),
        }
    }

    pub fn new(sigma0: f64, mu_tilde: Coef, sigma_tilde: Coef, v_tilde: Coef) -> Self {
        VolSpec {
            sigma0,
            mu_tilde,
            sigma_tilde,
            v_tilde,
            vol_jumps: None,
            positivity_floor: default_floor(sigma0),
        }
    }

    pub fn with_vol_jumps(mut self, jumps: JumpSpec) -> Self {
        self.vol_jumps = Some(jumps);
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.positivity_floor = floor;
        self
    }

    fn is_constant(&self) -> bool {
        self.mu_tilde.is_zero()
            && self.sigma_tilde.is_zero()
            && self.v_tilde.is_zero()
            && self.vol_jumps.is_none()
    }
}

fn default_floor(sigma0: f64) -> f64 {
    1e-6 * sigma0.abs().max(1e-12)
}

/// Full model: drift, stochastic volatility, optional jumps.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub x0: f64,
    pub drift: Coef,
    pub vol: VolSpec,
    pub jumps: Option<JumpSpec>,
    /// Correlation between the W and V Brownian drivers (0 in the CLT
    /// regime, where V must be independent of W).
    pub rho_wv: f64,
}

impl ModelSpec {
    /// Driftless unit-variance Brownian motion.
    pub fn standard_brownian() -> Self {
        ModelSpec {
            x0: 0.0,
            drift: Coef::zero(),
            vol: VolSpec::constant(1.0),
            jumps: None,
            rho_wv: 0.0,
        }
    }

    pub fn constant_vol(x0: f64, drift: Coef, sigma: f64) -> Self {
        ModelSpec {
            x0,
            drift,
            vol: VolSpec::constant(sigma),
            jumps: None,
            rho_wv: 0.0,
        }
    }

    pub fn with_jumps(mut self, jumps: JumpSpec) -> Self {
        self.jumps = Some(jumps);
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0 must be finite"));
        }
        if !(-1.0..=1.0).contains(&self.rho_wv) {
            return Err(Error::invalid(format!(
                "rho_wv must be in [-1,1], got {}",
                self.rho_wv
            )));
        }
        if !self.vol.sigma0.is_finite() {
            return Err(Error::invalid("sigma0 must be finite"));
        }
        Ok(())
    }
}

/// One jump event on a simulated path. `time` is the exact (pre-snap)
/// jump time; the jump itself is applied at the fine grid point at or after
/// it. `kappa` is the exact within-interval fraction in [0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
    /// 1-based coarse interval containing the jump.
    pub coarse_index: usize,
    pub kappa: f64,
    /// Volatility just before the jump cell.
    pub sigma_left: f64,
    /// Volatility at the snapped jump point (after any simultaneous
    /// volatility jump).
    pub sigma_right: f64,
}

/// A simulated trajectory on the nested grid.
#[derive(Clone, Debug)]
pub struct FineGridPath {
    grid: TimeGrid,
    x: Vec<f64>,
    sigma: Vec<f64>,
    jumps: Vec<JumpEvent>,
}

impl FineGridPath {
    pub fn from_parts(
        grid: TimeGrid,
        x: Vec<f64>,
        sigma: Vec<f64>,
        jumps: Vec<JumpEvent>,
    ) -> Result<Self> {
        let n = grid.n_fine_points();
        if x.len() != n || sigma.len() != n {
            return Err(Error::invalid(format!(
                "array length mismatch: expected {n}, got x={} sigma={}",
                x.len(),
                sigma.len()
            )));
        }
        if x.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("path contains non-finite values"));
        }
        Ok(FineGridPath {
            grid,
            x,
            sigma,
            jumps,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    pub fn has_jumps(&self) -> bool {
        !self.jumps.is_empty()
    }

    /// X_{i delta} - X_{(i-1) delta} for the 1-based coarse interval `i`.
    pub fn coarse_increment(&self, i: usize) -> f64 {
        let m = self.grid.m_fine;
        self.x[i * m] - self.x[(i - 1) * m]
    }

    /// Fine samples of coarse block `i` (1-based), m_fine + 1 values.
    pub fn block(&self, i: usize) -> &[f64] {
        let start = self.grid.block_start(i);
        &self.x[start..=start + self.grid.m_fine]
    }

    /// The path with its x array scaled by `c` (x0 included).
    pub fn with_scaled_x(&self, c: f64) -> FineGridPath {
        FineGridPath {
            grid: self.grid,
            x: self.x.iter().map(|v| c * v).collect(),
            sigma: self.sigma.clone(),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpEvent {
                    size: c * j.size,
                    ..*j
                })
                .collect(),
        }
    }
}

/// Euler-Maruyama simulation of `model` on `grid`.
///
/// Per fine step the volatility advances first (using W and V increments
/// with correlation rho_wv), then X advances with the left-endpoint
/// volatility. Jumps are drawn per coarse interval from a Poisson count,
/// placed uniformly at an exact time, and applied at the fine point at or
/// after that time. Identical (model, grid, seed) give identical output.
pub fn simulate_path(model: &ModelSpec, grid: &TimeGrid, seed: &SeedStream) -> Result<FineGridPath> {
    model.validate()?;
    let m = grid.m_fine;
    let delta = grid.fine_step();
    let sqrt_delta = delta.sqrt();
    let n_points = grid.n_fine_points();

    let vol_constant = model.vol.is_constant();
    let needs_v = !model.vol.v_tilde.is_zero();
    let rho = model.rho_wv;
    let rho_comp = (1.0 - rho * rho).sqrt();
    let floor = model.vol.positivity_floor;

    let mut x = Vec::with_capacity(n_points);
    let mut sigma = Vec::with_capacity(n_points);
    x.push(model.x0);
    sigma.push(if vol_constant {
        model.vol.sigma0
    } else {
        model.vol.sigma0.max(floor)
    });
    let mut jump_events: Vec<JumpEvent> = Vec::new();

    for interval in 1..=grid.n_coarse {
        // jumps of this interval: count, exact positions, sizes
        let mut interval_jumps: Vec<(usize, f64, f64, f64, Option<f64>)> = Vec::new();
        if let Some(jspec) = &model.jumps {
            if jspec.intensity > 0.0 {
                let mut count_rng = seed.channel(interval, Channel::JumpCount).rng();
                let lam = jspec.intensity * grid.delta_n();
                let count = Poisson::new(lam)
                    .map_err(|e| Error::invalid(format!("bad jump intensity: {e}")))?
                    .sample(&mut count_rng) as usize;
                if count > 0 {
                    let mut pos_rng = seed.channel(interval, Channel::JumpPosition).rng();
                    let mut size_rng = seed.channel(interval, Channel::JumpSize).rng();
                    let mut vol_size_rng = seed.channel(interval, Channel::VolJumpSize).rng();
                    for _ in 0..count {
                        let kappa = pos_rng.uniform01();
                        // snap to the fine point at or after the exact time;
                        // kappa = 0 still lands inside this interval's first cell
                        let cell = ((kappa * m as f64).ceil() as usize).clamp(1, m);
                        let size = jspec.size_law.sample(&mut size_rng);
                        let vol_jump = model
                            .vol
                            .vol_jumps
                            .as_ref()
                            .map(|vj| vj.size_law.sample(&mut vol_size_rng));
                        let time = (interval as f64 - 1.0 + kappa) * grid.delta_n();
                        interval_jumps.push((cell, time, kappa, size, vol_jump));
                    }
                    interval_jumps
                        .sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal));
                }
            }
        }

        let mut w_rng = seed.channel(interval, Channel::BrownianW).rng();
        let mut v_rng = if needs_v || rho != 0.0 {
            Some(seed.channel(interval, Channel::BrownianV).rng())
        } else {
            None
        };

        for cell in 1..=m {
            let k = (interval - 1) * m + cell; // global fine index being filled
            let t = grid.fine_time(k - 1);
            let x_prev = x[k - 1];
            let sigma_prev = sigma[k - 1];

            let dw = sqrt_delta * {
                let z: f64 = StandardNormal.sample(&mut w_rng);
                z
            };

            // volatility advances with its own SDE
            let mut sigma_next = if vol_constant {
                sigma_prev
            } else {
                let dv = match v_rng.as_mut() {
                    Some(rng) => {
                        let z: f64 = StandardNormal.sample(rng);
                        rho * dw + rho_comp * sqrt_delta * z
                    }
                    None => 0.0,
                };
                let s = sigma_prev
                    + model.vol.mu_tilde.eval(t, sigma_prev) * delta
                    + model.vol.sigma_tilde.eval(t, sigma_prev) * dw
                    + model.vol.v_tilde.eval(t, sigma_prev) * dv;
                s.max(floor)
            };

            // X advances with the left-endpoint volatility
            let mut x_next = x_prev + model.drift.eval(t, x_prev) * delta + sigma_prev * dw;

            for &(jcell, time, kappa, size, vol_jump) in &interval_jumps {
                if jcell == cell {
                    let sigma_left = sigma_prev;
                    if let Some(vj) = vol_jump {
                        sigma_next = (sigma_next + vj).max(floor);
                    }
                    x_next += size;
                    jump_events.push(JumpEvent {
                        time,
                        size,
                        coarse_index: interval,
                        kappa,
                        sigma_left,
                        sigma_right: sigma_next,
                    });
                }
            }

            if !x_next.is_finite() || !sigma_next.is_finite() {
                return Err(Error::IntegrationDiverged {
                    fine_index: k,
                    what: format!("x={x_next}, sigma={sigma_next}"),
                });
            }
            x.push(x_next);
            sigma.push(sigma_next);
        }
    }

    // events were pushed in cell order; re-sort by exact time so records of
    // jumps snapped to the same cell stay time-ordered
    jump_events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap_or(std::cmp::Ordering::Equal));

    Ok(FineGridPath {
        grid: *grid,
        x,
        sigma,
        jumps: jump_events,
    })
}

/// The rescaled incremental process of coarse interval `i` (1-based):
/// m_fine + 1 values scale * (X_{(i-1+s) delta_n} - X_{(i-1) delta_n}) at
/// s = k/m_fine. The first entry is exactly 0.
pub fn segment_extract(path: &FineGridPath, i: usize, scale: f64) -> Result<Segment> {
    let n = path.grid().n_coarse();
    if i < 1 || i > n {
        return Err(Error::invalid(format!(
            "coarse index {i} out of range 1..={n}"
        )));
    }
    let block = path.block(i);
    let base = block[0];
    let values: Vec<f64> = block.iter().map(|v| scale * (v - base)).collect();
    Segment::new(values)
}

// ---------------------------------------------------------------------------
// CSV fixtures
// ---------------------------------------------------------------------------

/// Write the path as `fine_path.csv` (header `fine_index,time,x,sigma`) and
/// `jumps.csv` (header `time,size,kappa,sigma_left,sigma_right`) in `dir`.
/// `comment` lines are prefixed with `# ` at the top of both files.
pub fn write_path_csv(path: &FineGridPath, dir: &Path, comment: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let grid = path.grid();
    let mut f = std::fs::File::create(dir.join("fine_path.csv"))?;
    if !comment.is_empty() {
        writeln!(f, "# {comment}")?;
    }
    writeln!(
        f,
        "# grid horizon={} n_coarse={} m_fine={}",
        fmt_f64(grid.horizon()),
        grid.n_coarse(),
        grid.m_fine()
    )?;
    writeln!(f, "fine_index,time,x,sigma")?;
    for (k, (xv, sv)) in path.x().iter().zip(path.sigma()).enumerate() {
        writeln!(
            f,
            "{k},{},{},{}",
            fmt_f64(grid.fine_time(k)),
            fmt_f64(*xv),
            fmt_f64(*sv)
        )?;
    }

    let mut jf = std::fs::File::create(dir.join("jumps.csv"))?;
    if !comment.is_empty() {
        writeln!(jf, "# {comment}")?;
    }
    writeln!(jf, "time,size,kappa,sigma_left,sigma_right")?;
    for j in path.jumps() {
        writeln!(
            jf,
            "{},{},{},{},{}",
            fmt_f64(j.time),
            fmt_f64(j.size),
            fmt_f64(j.kappa),
            fmt_f64(j.sigma_left),
            fmt_f64(j.sigma_right)
        )?;
    }
    Ok(())
}

/// Read a path written by [`write_path_csv`]. The grid is recovered from the
/// `# grid ...` comment line.
pub fn read_path_csv(dir: &Path) -> Result<FineGridPath> {
    let file = std::fs::File::open(dir.join("fine_path.csv"))?;
    let reader = BufReader::new(file);
    let mut grid: Option<TimeGrid> = None;
    let mut x = Vec::new();
    let mut sigma = Vec::new();
    let mut saw_header = false;
    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# grid ") {
            grid = Some(parse_grid_comment(rest)?);
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "fine_index,time,x,sigma" {
                return Err(Error::Parse(format!("unexpected path header: {line}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("bad path row: {line}")));
        }
        x.push(parse_f64(fields[2])?);
        sigma.push(parse_f64(fields[3])?);
    }
    let grid = grid.ok_or_else(|| Error::Parse("missing `# grid` comment line".into()))?;

    let mut jumps = Vec::new();
    let jpath = dir.join("jumps.csv");
    if jpath.exists() {
        let reader = BufReader::new(std::fs::File::open(jpath)?);
        let mut saw_header = false;
        for line in reader.lines() {
            let line = line?;
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            if !saw_header {
                if line != "time,size,kappa,sigma_left,sigma_right" {
                    return Err(Error::Parse(format!("unexpected jumps header: {line}")));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("bad jump row: {line}")));
            }
            let time = parse_f64(fields[0])?;
            let coarse_index = ((time / grid.delta_n()).floor() as usize + 1).min(grid.n_coarse());
            jumps.push(JumpEvent {
                time,
                size: parse_f64(fields[1])?,
                coarse_index,
                kappa: parse_f64(fields[2])?,
                sigma_left: parse_f64(fields[3])?,
                sigma_right: parse_f64(fields[4])?,
            });
        }
    }
    FineGridPath::from_parts(grid, x, sigma, jumps)
}

fn parse_grid_comment(rest: &str) -> Result<TimeGrid> {
    let mut horizon = None;
    let mut n_coarse = None;
    let mut m_fine = None;
    for part in rest.split_whitespace() {
        if let Some((k, v)) = part.split_once('=') {
            match k {
                "horizon" => horizon = Some(parse_f64(v)?),
                "n_coarse" => {
                    n_coarse = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                "m_fine" => {
                    m_fine = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                _ => {}
            }
        }
    }
    match (horizon, n_coarse, m_fine) {
        (Some(h), Some(n), Some(m)) => TimeGrid::new(h, n, m),
        _ => Err(Error::Parse("incomplete `# grid` comment".into())),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
}

/// 17 significant digits: round-trips exactly for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 0, 1).is_err());
        assert!(TimeGrid::new(0.0, 4, 1).is_err());
        assert!(TimeGrid::new(1.0, 4, 0).is_err());
        let g = TimeGrid::new(1.0, 4, 5).unwrap();
        assert_eq!(g.n_fine_points(), 21);
        assert_eq!(g.delta_n(), 0.25);
        assert_eq!(g.fine_step(), 0.05);
        assert_eq!(g.block_start(1), 0);
        assert_eq!(g.block_start(4), 15);
    }

    #[test]
    fn deterministic_ode_case() {
        // mu = 1, sigma = 0: x(t) = x0 + t exactly at every fine point
        let model = ModelSpec::constant_vol(0.5, Coef::constant(1.0), 0.0);
        let grid = TimeGrid::new(1.0, 8, 4).unwrap();
        let path = simulate_path(&model, &grid, &SeedStream::new(1)).unwrap();
        for (k, v) in path.x().iter().enumerate() {
            let t = grid.fine_time(k);
            assert!(
                (v - (0.5 + t)).abs() < 1e-12,
                "k={k}: x={v} expected {}",
                0.5 + t
            );
        }
    }

    #[test]
    fn seed_determinism() {
        let model = ModelSpec::standard_brownian();
        let grid = TimeGrid::new(1.0, 16, 8).unwrap();
        let a = simulate_path(&model, &grid, &SeedStream::new(9)).unwrap();
        let b = simulate_path(&model, &grid, &SeedStream::new(9)).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.sigma(), b.sigma());
        let c = simulate_path(&model, &grid, &SeedStream::new(10)).unwrap();
        assert_ne!(a.x(), c.x());
    }

    #[test]
    fn brownian_increment_moments() {
        // studentized coarse increments: |mean| < 4/sqrt(N), |var-1| < 4 sqrt(2/N)
        let model = ModelSpec::standard_brownian();
        let n = 64;
        let reps = 10_000usize;
        let grid = TimeGrid::new(1.0, n, 4).unwrap();
        let scale = 1.0 / grid.delta_n().sqrt();
        let root = SeedStream::new(0xB00);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in 0..reps {
            let path = simulate_path(&model, &grid, &root.child(r as u64)).unwrap();
            for i in 1..=n {
                let z = scale * path.coarse_increment(i);
                sum += z;
                sumsq += z * z;
            }
        }
        let total = (reps * n) as f64;
        let mean = sum / total;
        let var = sumsq / total - mean * mean;
        assert!(mean.abs() < 4.0 / total.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / total).sqrt(), "var {var}");
    }

    #[test]
    fn pure_jump_path_is_step_function() {
        let jumps = JumpSpec::new(
            2.0,
            SizeLaw::TwoPoint {
                a: 1.0,
                b: -2.0,
                prob_a: 0.5,
            },
        )
        .unwrap();
        let model = ModelSpec::constant_vol(0.0, Coef::zero(), 0.0).with_jumps(jumps);
        let grid = TimeGrid::new(1.0, 20, 5).unwrap();
        let root = SeedStream::new(0x3A9);
        for r in 0..200 {
            let path = simulate_path(&model, &grid, &root.child(r)).unwrap();
            // every move of x is one of the recorded jump sizes at its cell
            let mut moves = 0;
            for k in 1..path.x().len() {
                let d = path.x()[k] - path.x()[k - 1];
                if d != 0.0 {
                    moves += 1;
                    assert!(
                        path.jumps().iter().any(|j| {
                            let cell = ((j.kappa * grid.m_fine() as f64).ceil() as usize)
                                .clamp(1, grid.m_fine());
                            (j.coarse_index - 1) * grid.m_fine() + cell == k
                                && (d - j.size).abs() < 1e-12
                        }),
                        "unexplained move at {k}"
                    );
                }
            }
            // distinct cells only; collisions would merge two moves
            if path
                .jumps()
                .windows(2)
                .all(|w| (w[1].time - w[0].time).abs() > grid.fine_step())
            {
                assert_eq!(moves, path.jumps().len());
            }
        }
    }

    #[test]
    fn jump_count_follows_poisson_law() {
        // empirical jump-count frequencies vs the Poisson(2) pmf computed
        // directly (independent oracle)
        let jumps = JumpSpec::new(
            2.0,
            SizeLaw::TwoPoint {
                a: 1.0,
                b: -2.0,
                prob_a: 0.5,
            },
        )
        .unwrap();
        let model = ModelSpec::constant_vol(0.0, Coef::zero(), 0.0).with_jumps(jumps);
        let grid = TimeGrid::new(1.0, 8, 2).unwrap();
        let reps = 100_000usize;
        let root = SeedStream::new(0x9015);
        let mut counts = vec![0usize; 32];
        let mut size_ok = true;
        for r in 0..reps {
            let path = simulate_path(&model, &grid, &root.child(r as u64)).unwrap();
            let k = path.jumps().len().min(31);
            counts[k] += 1;
            size_ok &= path
                .jumps()
                .iter()
                .all(|j| (j.size - 1.0).abs() < 1e-12 || (j.size + 2.0).abs() < 1e-12);
        }
        assert!(size_ok, "jump size outside {{1, -2}}");
        let lam = 2.0f64;
        let mut pmf = Vec::new();
        let mut fact = 1.0;
        for k in 0..12 {
            if k > 0 {
                fact *= k as f64;
            }
            pmf.push((-lam).exp() * lam.powi(k as i32) / fact);
        }
        for (k, &p) in pmf.iter().enumerate() {
            let freq = counts[k] as f64 / reps as f64;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!(
                (freq - p).abs() < 5.0 * se + 1e-4,
                "k={k}: freq={freq} pmf={p}"
            );
        }
    }

    #[test]
    fn jump_floor_is_respected() {
        let laws = [
            SizeLaw::TwoPoint {
                a: 0.4,
                b: -1.5,
                prob_a: 0.3,
            },
            SizeLaw::GaussianTruncated {
                mean: 0.0,
                sd: 1.0,
                floor: 0.25,
            },
            SizeLaw::UniformSigned { lo: 0.5, hi: 2.0 },
        ];
        let grid = TimeGrid::new(1.0, 10, 4).unwrap();
        for (li, law) in laws.into_iter().enumerate() {
            let spec = JumpSpec::new(5.0, law).unwrap();
            let floor = spec.min_abs_size();
            let model = ModelSpec::constant_vol(0.0, Coef::zero(), 0.0).with_jumps(spec);
            for r in 0..100 {
                let path =
                    simulate_path(&model, &grid, &SeedStream::new(li as u64).child(r)).unwrap();
                for j in path.jumps() {
                    assert!(j.size.abs() >= floor - 1e-15);
                    assert!((0.0..1.0).contains(&j.kappa));
                }
            }
        }
    }

    #[test]
    fn sigma_positivity_floor() {
        // strongly mean-fleeing sigma dynamics that would go negative
        let vol = VolSpec::new(
            0.5,
            Coef::affine(-2.0, 0.0),
            Coef::constant(1.5),
            Coef::zero(),
        );
        let model = ModelSpec {
            x0: 0.0,
            drift: Coef::zero(),
            vol,
            jumps: None,
            rho_wv: 0.0,
        };
        let grid = TimeGrid::new(1.0, 32, 8).unwrap();
        let floor = model.vol.positivity_floor;
        for r in 0..50 {
            let path = simulate_path(&model, &grid, &SeedStream::new(0x51).child(r)).unwrap();
            let min = path.sigma().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= floor);
        }
    }

    #[test]
    fn nesting_consistency() {
        // subsampling every second fine point keeps all coarse values
        let model = ModelSpec::standard_brownian();
        let grid = TimeGrid::new(1.0, 10, 8).unwrap();
        let path = simulate_path(&model, &grid, &SeedStream::new(0xAB)).unwrap();
        let halved: Vec<f64> = path.x().iter().cloned().step_by(2).collect();
        let sub_grid = TimeGrid::new(1.0, 10, 4).unwrap();
        assert_eq!(halved.len(), sub_grid.n_fine_points());
        for i in 0..=10usize {
            assert_eq!(halved[i * 4], path.x()[i * 8]);
        }
        for i in 1..=10usize {
            let inc_full = path.coarse_increment(i);
            let inc_sub = halved[i * 4] - halved[(i - 1) * 4];
            assert_eq!(inc_full, inc_sub);
        }
    }

    #[test]
    fn segment_extract_constant_and_linear() {
        let grid = TimeGrid::new(1.0, 100, 5).unwrap();
        // constant path
        let flat = FineGridPath::from_parts(
            grid,
            vec![3.0; grid.n_fine_points()],
            vec![0.0; grid.n_fine_points()],
            vec![],
        )
        .unwrap();
        let s = segment_extract(&flat, 7, 123.0).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));

        // x(t) = t with delta_n = 0.01 and scale delta_n^{-1/2}:
        // segment s -> 0.1 * s
        let xs: Vec<f64> = (0..grid.n_fine_points())
            .map(|k| grid.fine_time(k))
            .collect();
        let lin =
            FineGridPath::from_parts(grid, xs, vec![0.0; grid.n_fine_points()], vec![]).unwrap();
        let scale = 1.0 / grid.delta_n().sqrt();
        let s = segment_extract(&lin, 42, scale).unwrap();
        for (k, &v) in s.values().iter().enumerate() {
            let expected = 0.1 * (k as f64 / 5.0);
            assert!((v - expected).abs() < 1e-12, "k={k} v={v} exp={expected}");
        }
        assert_eq!(s.values()[0], 0.0);
    }

    #[test]
    fn segment_extract_rejects_bad_index() {
        let grid = TimeGrid::new(1.0, 4, 2).unwrap();
        let path = FineGridPath::from_parts(
            grid,
            vec![0.0; grid.n_fine_points()],
            vec![1.0; grid.n_fine_points()],
            vec![],
        )
        .unwrap();
        assert!(segment_extract(&path, 0, 1.0).is_err());
        assert!(segment_extract(&path, 5, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let jumps = JumpSpec::new(3.0, SizeLaw::UniformSigned { lo: 0.5, hi: 1.5 }).unwrap();
        let model = ModelSpec {
            x0: 0.2,
            drift: Coef::constant(0.1),
            vol: VolSpec::new(1.0, Coef::zero(), Coef::constant(0.3), Coef::zero()),
            jumps: Some(jumps),
            rho_wv: 0.0,
        };
        let grid = TimeGrid::new(2.0, 6, 3).unwrap();
        let path = simulate_path(&model, &grid, &SeedStream::new(0xC5)).unwrap();
        let dir = std::env::temp_dir().join(format!("pathvar_csv_{}", std::process::id()));
        write_path_csv(&path, &dir, "round trip test").unwrap();
        let back = read_path_csv(&dir).unwrap();
        assert_eq!(path.x(), back.x());
        assert_eq!(path.sigma(), back.sigma());
        assert_eq!(path.jumps().len(), back.jumps().len());
        for (a, b) in path.jumps().iter().zip(back.jumps()) {
            assert_eq!(a.time, b.time);
            assert_eq!(a.size, b.size);
            assert_eq!(a.kappa, b.kappa);
            assert_eq!(a.coarse_index, b.coarse_index);
            assert_eq!(a.sigma_left, b.sigma_left);
            assert_eq!(a.sigma_right, b.sigma_right);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
