//! Simulators for the limit laws of the central limit theorems.
//!
//! The jump limit is a sum over jumps of p |J|^{p-1} times a two-sided
//! Brownian extremum around an independent uniform split point kappa; the
//! p = 2 case adds an independent centered Gaussian whose variance is the
//! conditional variance of the continuous range statistic. The continuous
//! limit is, for even functionals, a centered Gaussian with variance
//! integral of rho(g^2) - rho(g)^2; for general functionals it carries the
//! drift/vol-of-vol bias integrals built from rho^{(1,2,3)}.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};

use super::rho::{brownian_values, rho123_mc, rho_and_square_mc, RhoThreeVariant};
use super::{par_map_reps, LimitLawSample};
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::rng::SeedStream;
use crate::stats::pairwise_sum;

/// Conditioning data of one jump in the limit law: its size and the
/// volatility immediately before/after it.
#[derive(Clone, Copy, Debug)]
pub struct LimitJump {
    pub size: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
}

impl LimitJump {
    fn validate(&self) -> Result<()> {
        if !self.size.is_finite() || !self.sigma_left.is_finite() || !self.sigma_right.is_finite()
        {
            return Err(Error::invalid("non-finite jump conditioning data"));
        }
        Ok(())
    }
}

/// (lambda^{3,2}, lambda^{3,4}) evaluated at a common segment resolution;
/// feeds the conditional variance lambda^{3,4} - (lambda^{3,2})^2 of the
/// mixed limit.
#[derive(Clone, Copy, Debug)]
pub struct RangeLawMoments {
    pub lambda2: f64,
    pub lambda4: f64,
}

impl RangeLawMoments {
    pub fn new(lambda2: f64, lambda4: f64) -> Result<Self> {
        let m = RangeLawMoments { lambda2, lambda4 };
        if m.variance() < 0.0 {
            return Err(Error::InternalConstant(format!(
                "lambda^{{3,4}} - (lambda^{{3,2}})^2 = {} < 0: bad lambda oracle",
                m.variance()
            )));
        }
        Ok(m)
    }

    pub fn variance(&self) -> f64 {
        self.lambda4 - self.lambda2 * self.lambda2
    }
}

/// One per-jump draw: kappa ~ U(0,1) and a Brownian grid refined by the
/// exact kappa point (drawn as a Brownian bridge), then the two one-sided
/// extrema around kappa.
fn jump_term(jump: &LimitJump, p: f64, m: usize, seed: &SeedStream) -> f64 {
    let mut kappa_rng = seed.child(0).rng();
    let kappa = kappa_rng.uniform01();
    let w = brownian_values(m, &seed.child(1));

    // cell containing kappa and the exact Brownian value at kappa
    let mf = m as f64;
    let cell = ((kappa * mf).floor() as usize).min(m - 1); // kappa in [cell/m, (cell+1)/m)
    let s_lo = cell as f64 / mf;
    let s_hi = (cell + 1) as f64 / mf;
    let frac = (kappa - s_lo) / (s_hi - s_lo);
    let bridge_var = (kappa - s_lo) * (s_hi - kappa) / (s_hi - s_lo);
    let z: f64 = StandardNormal.sample(&mut seed.child(2).rng());
    let w_kappa = w[cell] + frac * (w[cell + 1] - w[cell]) + bridge_var.sqrt() * z;

    // extrema over [0, kappa] (grid points 0..=cell plus kappa) and over
    // [kappa, 1] (kappa plus grid points cell+1..=m)
    let mut left_min = w_kappa;
    let mut left_max = w_kappa;
    for &v in &w[..=cell] {
        if v < left_min {
            left_min = v;
        }
        if v > left_max {
            left_max = v;
        }
    }
    let mut right_min = w_kappa;
    let mut right_max = w_kappa;
    for &v in &w[cell + 1..=m] {
        if v < right_min {
            right_min = v;
        }
        if v > right_max {
            right_max = v;
        }
    }

    let (sl, sr) = (jump.sigma_left, jump.sigma_right);
    // sup_{s <= kappa <= u} of the two-sided increment; each side optimizes
    // independently, with the extremum choice following the sign of sigma
    let sup = if jump.size > 0.0 {
        let left = if sl >= 0.0 {
            sl * (w_kappa - left_min)
        } else {
            sl * (w_kappa - left_max)
        };
        let right = if sr >= 0.0 {
            sr * (right_max - w_kappa)
        } else {
            sr * (right_min - w_kappa)
        };
        left + right
    } else {
        let left = if sl >= 0.0 {
            sl * (left_max - w_kappa)
        } else {
            sl * (left_min - w_kappa)
        };
        let right = if sr >= 0.0 {
            sr * (w_kappa - right_min)
        } else {
            sr * (w_kappa - right_max)
        };
        left + right
    };
    p * jump.size.abs().powf(p - 1.0) * sup
}

/// Simulate the pure-jump limit law (the p > 3 regime, and the jump part of
/// the mixed p = 2 limit). Each replication draws an independent
/// (kappa_i, Brownian segment) per jump; the per-jump terms sum to the
/// sample value and the Gaussian part is zero.
pub fn simulate_limit_u_jump(
    jumps: &[LimitJump],
    p: f64,
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<Vec<LimitLawSample>> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("exponent p must be > 0, got {p}")));
    }
    if m < 2 {
        return Err(Error::invalid("limit simulation needs m >= 2"));
    }
    for j in jumps {
        j.validate()?;
    }
    par_map_reps(reps, seed, |_r, s| {
        let per_jump_terms: Vec<f64> = jumps
            .iter()
            .enumerate()
            .map(|(i, j)| jump_term(j, p, m, &s.child(i as u64)))
            .collect();
        let value = pairwise_sum(&per_jump_terms);
        Ok(LimitLawSample {
            value,
            per_jump_terms,
            mixed_gaussian_part: 0.0,
        })
    })
}

/// Simulate the mixed p = 2 limit: the jump part plus an independent
/// centered Gaussian with variance
/// (lambda^{3,4} - (lambda^{3,2})^2) * int sigma_s^4 ds.
///
/// `sigma_path` holds sigma at the left endpoints of `len` equal cells of
/// `[0, horizon]` (left-point Riemann discretization).
pub fn simulate_limit_mixed(
    jumps: &[LimitJump],
    sigma_path: &[f64],
    horizon: f64,
    moments: &RangeLawMoments,
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<Vec<LimitLawSample>> {
    if sigma_path.is_empty() {
        return Err(Error::invalid("empty sigma path"));
    }
    if sigma_path.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite sigma path"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be > 0"));
    }
    let var_coeff = moments.variance();
    if var_coeff < 0.0 {
        return Err(Error::InternalConstant(
            "negative lambda variance coefficient".into(),
        ));
    }
    let step = horizon / sigma_path.len() as f64;
    let quartics: Vec<f64> = sigma_path.iter().map(|s| s * s * s * s * step).collect();
    let gauss_var = var_coeff * pairwise_sum(&quartics);
    let gauss_sd = gauss_var.sqrt();
    for j in jumps {
        j.validate()?;
    }
    if m < 2 {
        return Err(Error::invalid("limit simulation needs m >= 2"));
    }

    par_map_reps(reps, seed, |_r, s| {
        let per_jump_terms: Vec<f64> = jumps
            .iter()
            .enumerate()
            .map(|(i, j)| jump_term(j, 2.0, m, &s.child(i as u64)))
            .collect();
        let z: f64 = StandardNormal.sample(&mut s.child(jumps.len() as u64).rng());
        let mixed_gaussian_part = gauss_sd * z;
        let value = pairwise_sum(&per_jump_terms) + mixed_gaussian_part;
        Ok(LimitLawSample {
            value,
            per_jump_terms,
            mixed_gaussian_part,
        })
    })
}

/// Coefficient paths feeding the continuous limit law, sampled at the left
/// endpoints of `sigma.len()` equal cells of `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct CoefficientPaths {
    pub sigma: Vec<f64>,
    pub drift: Vec<f64>,
    pub vol_of_vol: Vec<f64>,
    pub horizon: f64,
}

impl CoefficientPaths {
    pub fn constant(sigma: f64, drift: f64, vol_of_vol: f64, horizon: f64, cells: usize) -> Self {
        CoefficientPaths {
            sigma: vec![sigma; cells],
            drift: vec![drift; cells],
            vol_of_vol: vec![vol_of_vol; cells],
            horizon,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sigma.is_empty()
            || self.sigma.len() != self.drift.len()
            || self.sigma.len() != self.vol_of_vol.len()
        {
            return Err(Error::invalid(
                "coefficient paths must be non-empty and equal length",
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be > 0"));
        }
        if self
            .sigma
            .iter()
            .chain(&self.drift)
            .chain(&self.vol_of_vol)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("non-finite coefficient path"));
        }
        Ok(())
    }
}

/// Simulate the continuous limit law
/// U = int u1 ds + int u2 dW + int u3 dW' for deterministic coefficient
/// paths, with the u-coefficients built from Monte Carlo rho-constants at
/// segment resolution `m` (`rho_reps` draws per distinct sigma value).
///
/// For even g the drift and dW terms vanish and each sample is a centered
/// Gaussian with variance sum_k (rho_sigma(g^2) - rho_sigma(g)^2) * step.
pub fn simulate_limit_u_continuous(
    paths: &CoefficientPaths,
    g: &FunctionalSpec,
    m: usize,
    reps: usize,
    rho_reps: usize,
    seed: &SeedStream,
) -> Result<Vec<LimitLawSample>> {
    paths.validate()?;
    if m < 1 {
        return Err(Error::invalid("limit simulation needs m >= 1"));
    }
    if !g.is_even() && !g.has_derivative() {
        return Err(Error::UnsupportedDerivative(
            "non-even functional without directional derivative: the limit's bias terms \
             need rho^(2) and rho^(3)"
                .into(),
        ));
    }

    let cells = paths.sigma.len();
    let step = paths.horizon / cells as f64;
    let const_seed = seed.child(u64::MAX); // rho estimation stream, disjoint from draws

    // per distinct sigma value: (rho(g), rho(g^2), rho1, rho2, rho3)
    let mut cache: HashMap<u64, (f64, f64, f64, f64, f64)> = HashMap::new();
    for &s in &paths.sigma {
        let bits = s.to_bits();
        if cache.contains_key(&bits) {
            continue;
        }
        let (rho_g, rho_g2) =
            rho_and_square_mc(s, g, m, rho_reps, &const_seed.child(bits))?;
        let (r1, r2, r3) = if g.is_even() {
            (0.0, 0.0, 0.0)
        } else {
            let out = rho123_mc(
                s,
                g,
                rho_reps,
                m,
                &const_seed.child(bits ^ 1),
                RhoThreeVariant::AsStated,
            )?;
            let (d2, d3) = out.rho23?;
            (out.rho1.value, d2.value, d3.value)
        };
        cache.insert(bits, (rho_g.value, rho_g2.value, r1, r2, r3));
    }

    // cell coefficients
    let mut drift_integral = 0.0;
    let mut u2_sq_total = 0.0;
    let mut u3_sq_total = 0.0;
    for k in 0..cells {
        let (rho_g, rho_g2, r1, r2, r3) = cache[&paths.sigma[k].to_bits()];
        let u1 = paths.drift[k] * r2 + 0.5 * paths.vol_of_vol[k] * (r3 - r2);
        let u2 = r1;
        let u3_sq = (rho_g2 - rho_g * rho_g - r1 * r1).max(0.0);
        drift_integral += u1 * step;
        u2_sq_total += u2 * u2 * step;
        u3_sq_total += u3_sq * step;
    }
    let u2_sd = u2_sq_total.sqrt();
    let u3_sd = u3_sq_total.sqrt();

    par_map_reps(reps, seed, |_r, s| {
        let mut rng = s.rng();
        let zw: f64 = StandardNormal.sample(&mut rng);
        let zwp: f64 = StandardNormal.sample(&mut rng);
        let value = drift_integral + u2_sd * zw + u3_sd * zwp;
        Ok(LimitLawSample {
            value,
            per_jump_terms: Vec::new(),
            mixed_gaussian_part: value,
        })
    })
}
