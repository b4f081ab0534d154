//! The moment constants lambda^{i,p} of the three built-in families
//!
//!   lambda^{1,p} = E|W_1|^p            (terminal / power variation)
//!   lambda^{2,p} = E|int_0^1 W ds|^p   (integral / local averages)
//!   lambda^{3,p} = E[(sup W - inf W)^p] (range)
//!
//! and the efficiency ratios Lambda^{i,p} = (l^{i,2p} - (l^{i,p})^2) /
//! (l^{i,p})^2. Families 1 and 2 have closed forms (Gaussian absolute
//! moments; the time-average of a Brownian path is N(0, 1/3), giving
//! lambda^{1,p} = 3^{p/2} lambda^{2,p}). The range family is estimated by
//! Monte Carlo on an m-point grid; a high-resolution run (m = 2000, 10^6
//! replications) is checked in as `data/constants.csv` so acceptance
//! targets are stable.
//!
//! Grid caveat: a sup over m samples underestimates the continuous sup, so
//! lambda^{3,p} depends on m (e.g. lambda^{3,2} is about 2.295 at m = 50,
//! 2.688 at m = 2000, with continuum value 4 ln 2 = 2.7726 from the range
//! distribution). Wherever a Monte Carlo statistic is compared against a
//! range-family target, the target must be evaluated at the same m as the
//! statistic's fine grid.

use once_cell::sync::Lazy;
use statrs::function::gamma::gamma;

use super::limit::RangeLawMoments;
use super::rho::brownian_values;
use super::RhoEstimate;
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::stats::pairwise_sum;

/// Subdivision of the checked-in high-resolution table.
pub const FROZEN_M: usize = 2000;
/// Replication count of the checked-in high-resolution table.
pub const FROZEN_REPS: usize = 1_000_000;

/// The three built-in functional families, indexed 1..3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Terminal,
    Integral,
    Range,
}

impl Family {
    pub fn index(&self) -> u8 {
        match self {
            Family::Terminal => 1,
            Family::Integral => 2,
            Family::Range => 3,
        }
    }

    pub fn from_index(i: u8) -> Result<Family> {
        match i {
            1 => Ok(Family::Terminal),
            2 => Ok(Family::Integral),
            3 => Ok(Family::Range),
            _ => Err(Error::invalid(format!("family must be 1, 2 or 3, got {i}"))),
        }
    }

    /// The base statistic of the family on raw Brownian grid values.
    fn base(&self) -> impl Fn(&[f64]) -> f64 + Sync {
        let family = *self;
        move |w: &[f64]| match family {
            Family::Terminal => w.last().unwrap().abs(),
            Family::Integral => {
                let m = w.len() - 1;
                let mut acc = 0.5 * (w[0] + w[m]);
                for v in &w[1..m] {
                    acc += v;
                }
                (acc / m as f64).abs()
            }
            Family::Range => {
                let mut lo = w[0];
                let mut hi = w[0];
                for &v in &w[1..] {
                    if v < lo {
                        lo = v;
                    }
                    if v > hi {
                        hi = v;
                    }
                }
                hi - lo
            }
        }
    }
}

/// How to obtain a constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstMethod {
    ClosedForm,
    MonteCarlo { m: usize, reps: usize },
}

/// E|N(0,1)|^p. Exact double-factorial product for even integer p (so
/// lambda^{1,2} = 1 and lambda^{1,4} = 3 hold exactly), the Gamma formula
/// 2^{p/2} Gamma((p+1)/2) / sqrt(pi) otherwise.
pub fn abs_moment_normal(p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("moment order must be > 0, got {p}")));
    }
    if p.fract() == 0.0 && (p as u64) % 2 == 0 && p <= 300.0 {
        let mut acc = 1.0;
        let mut k = p as u64;
        while k > 1 {
            acc *= (k - 1) as f64;
            k -= 2;
        }
        return Ok(acc);
    }
    Ok(2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt())
}

/// lambda^{i,p}. Closed forms exist for families 1 and 2 only; the range
/// family needs Monte Carlo.
pub fn lambda_const(
    family: Family,
    p: f64,
    method: &ConstMethod,
    seed: &SeedStream,
) -> Result<RhoEstimate> {
    match method {
        ConstMethod::ClosedForm => match family {
            Family::Terminal => Ok(RhoEstimate::exact(abs_moment_normal(p)?)),
            Family::Integral => Ok(RhoEstimate::exact(
                abs_moment_normal(p)? / 3f64.powf(p / 2.0),
            )),
            Family::Range => Err(Error::Unsupported(
                "no closed form for the range family; use the Monte Carlo method".into(),
            )),
        },
        ConstMethod::MonteCarlo { m, reps } => {
            let rows = family_moment_table(family, &[p], *m, *reps, seed)?;
            Ok(rows[0].lambda)
        }
    }
}

/// Lambda^{i,p} = (lambda^{i,2p} - (lambda^{i,p})^2) / (lambda^{i,p})^2,
/// the asymptotic variance-to-squared-mean ratio measuring estimator
/// efficiency. Monte Carlo standard errors are propagated by the delta
/// method including the covariance of the jointly estimated moments.
pub fn efficiency_const(
    family: Family,
    p: f64,
    method: &ConstMethod,
    seed: &SeedStream,
) -> Result<RhoEstimate> {
    match method {
        ConstMethod::ClosedForm => match family {
            // Lambda^{2,p} = Lambda^{1,p} algebraically (the 3^{p/2} factors
            // cancel), so both use the Gaussian-moment expression
            Family::Terminal | Family::Integral => {
                let lp = abs_moment_normal(p)?;
                let l2p = abs_moment_normal(2.0 * p)?;
                Ok(RhoEstimate::exact((l2p - lp * lp) / (lp * lp)))
            }
            Family::Range => Err(Error::Unsupported(
                "no closed form for the range family; use the Monte Carlo method".into(),
            )),
        },
        ConstMethod::MonteCarlo { m, reps } => {
            let rows = family_moment_table(family, &[p], *m, *reps, seed)?;
            Ok(rows[0].efficiency)
        }
    }
}

/// One row of a Monte Carlo moment table.
#[derive(Clone, Copy, Debug)]
pub struct Lambda3Row {
    pub p: f64,
    /// lambda^{i,p}
    pub lambda: RhoEstimate,
    /// lambda^{i,2p}
    pub lambda_2p: RhoEstimate,
    /// Lambda^{i,p}
    pub efficiency: RhoEstimate,
}

/// Joint Monte Carlo moment table for the range family over an exponent
/// grid, all rows estimated from the same draws (common random numbers).
pub fn lambda3_table(
    ps: &[f64],
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<Vec<Lambda3Row>> {
    family_moment_table(Family::Range, ps, m, reps, seed)
}

/// Shared implementation: per replication draw one Brownian grid, evaluate
/// the family's base statistic r once, and accumulate r^{p}, r^{2p},
/// r^{3p}, r^{4p} for every requested exponent. Accumulation happens in
/// fixed-size chunks followed by a deterministic pairwise reduction, so the
/// result is identical for any worker count.
pub fn family_moment_table(
    family: Family,
    ps: &[f64],
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<Vec<Lambda3Row>> {
    use rayon::prelude::*;
    if reps < 2 {
        return Err(Error::invalid("moment table needs reps >= 2"));
    }
    if m < 1 {
        return Err(Error::invalid("moment table needs m >= 1"));
    }
    if ps.is_empty() {
        return Err(Error::invalid("empty exponent grid"));
    }
    for &p in ps {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid(format!("exponent p must be > 0, got {p}")));
        }
    }

    const CHUNK: usize = 4096;
    let n_chunks = reps.div_ceil(CHUNK);
    let base = family.base();
    let width = 4 * ps.len();

    let chunk_sums: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(reps);
            let mut acc = vec![0.0f64; width];
            for r in lo..hi {
                let w = brownian_values(m, &seed.child(r as u64));
                let v = base(&w);
                for (j, &p) in ps.iter().enumerate() {
                    let vp = v.powf(p);
                    let vp2 = vp * vp;
                    acc[4 * j] += vp;
                    acc[4 * j + 1] += vp2;
                    acc[4 * j + 2] += vp2 * vp;
                    acc[4 * j + 3] += vp2 * vp2;
                }
            }
            acc
        })
        .collect();

    let n = reps as f64;
    let mut rows = Vec::with_capacity(ps.len());
    for (j, &p) in ps.iter().enumerate() {
        let moment = |k: usize| -> f64 {
            let col: Vec<f64> = chunk_sums.iter().map(|cs| cs[4 * j + k]).collect();
            pairwise_sum(&col) / n
        };
        let a = moment(0); // E r^p
        let b = moment(1); // E r^2p
        let c = moment(2); // E r^3p
        let d = moment(3); // E r^4p

        let var_a = ((b - a * a) / n).max(0.0);
        let var_b = ((d - b * b) / n).max(0.0);
        let cov_ab = (c - a * b) / n;

        let lambda = RhoEstimate {
            value: a,
            std_error: var_a.sqrt(),
            reps,
            m_fine: m,
        };
        let lambda_2p = RhoEstimate {
            value: b,
            std_error: var_b.sqrt(),
            reps,
            m_fine: m,
        };
        // Lambda = b/a^2 - 1; delta method with dLambda/da = -2b/a^3,
        // dLambda/db = 1/a^2
        let (eff, eff_se) = if a > 0.0 {
            let ga = -2.0 * b / (a * a * a);
            let gb = 1.0 / (a * a);
            let var = (ga * ga * var_a + 2.0 * ga * gb * cov_ab + gb * gb * var_b).max(0.0);
            (b / (a * a) - 1.0, var.sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        let efficiency = RhoEstimate {
            value: eff,
            std_error: eff_se,
            reps,
            m_fine: m,
        };
        rows.push(Lambda3Row {
            p,
            lambda,
            lambda_2p,
            efficiency,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Checked-in high-resolution oracle table
// ---------------------------------------------------------------------------

const FROZEN_TABLE: &str = include_str!("../../data/constants.csv");

#[derive(Clone, Copy, Debug)]
struct FrozenRow {
    p: f64,
    value: f64,
    std_error: f64,
    m: usize,
    reps: usize,
}

static FROZEN: Lazy<Vec<FrozenRow>> = Lazy::new(|| {
    let mut rows = Vec::new();
    for line in FROZEN_TABLE.lines() {
        if line.starts_with('#') || line.starts_with("family") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 8 {
            continue;
        }
        if f[0] != "3" {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().ok();
        if let (Some(p), Some(value), Some(std_error)) = (parse(f[1]), parse(f[2]), parse(f[3])) {
            rows.push(FrozenRow {
                p,
                value,
                std_error,
                m: f[5].parse().unwrap_or(0),
                reps: f[6].parse().unwrap_or(0),
            });
        }
    }
    rows
});

/// The checked-in lambda^{3,p} oracle value (m = 2000, 10^6 replications),
/// if the exponent is tabulated.
pub fn frozen_lambda3(p: f64) -> Option<RhoEstimate> {
    FROZEN.iter().find(|r| (r.p - p).abs() < 1e-9).map(|r| RhoEstimate {
        value: r.value,
        std_error: r.std_error,
        reps: r.reps,
        m_fine: r.m,
    })
}

/// The checked-in (lambda^{3,2}, lambda^{3,4}) pair used by the mixed
/// jump limit at the reference resolution.
pub fn frozen_range_moments() -> Result<RangeLawMoments> {
    let l2 = frozen_lambda3(2.0)
        .ok_or_else(|| Error::InternalConstant("lambda^{3,2} missing from table".into()))?;
    let l4 = frozen_lambda3(4.0)
        .ok_or_else(|| Error::InternalConstant("lambda^{3,4} missing from table".into()))?;
    RangeLawMoments::new(l2.value, l4.value)
}
