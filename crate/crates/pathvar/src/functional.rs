//! Path functionals on normalized segments.
//!
//! A [`Segment`] is a discretized element of C([0,1]): m+1 samples at
//! s = k/m. A [`FunctionalSpec`] is a functional g acting on segments,
//! either one of the built-in families
//!
//! * terminal power  g(x) = |x(1)|^p,
//! * integral power  g(x) = |∫ x(s) ds|^p   (trapezoid rule),
//! * range power     g(x) = (sup x - inf x)^p,
//!
//! or a user-supplied evaluator. Built-ins carry exact directional
//! derivatives for p > 1; the range derivative uses the first-argmax rule
//! (ties have probability zero for Brownian-type segments, so any
//! deterministic tie-break gives the right law).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use rand_distr::{Distribution, StandardNormal};

/// Discretized element of C([0,1]): values at s = k/m, k = 0..m.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    values: Vec<f64>,
}

impl Segment {
    /// `values[k]` is the sample at s = k/m with m = values.len()-1.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("segment needs at least 2 samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("segment contains non-finite values"));
        }
        Ok(Segment { values })
    }

    /// Standard Brownian segment on m subintervals.
    pub fn brownian(m: usize, seed: &SeedStream) -> Self {
        let mut rng = seed.rng();
        let step = (1.0 / m as f64).sqrt();
        let mut values = Vec::with_capacity(m + 1);
        let mut w = 0.0;
        values.push(0.0);
        for _ in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            w += step * z;
            values.push(w);
        }
        Segment { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of subintervals m.
    pub fn subdivision(&self) -> usize {
        self.values.len() - 1
    }

    /// x(1), the last sample.
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Trapezoid approximation of ∫₀¹ x(s) ds.
    pub fn trapezoid_integral(&self) -> f64 {
        let m = self.subdivision();
        let mut acc = 0.5 * (self.values[0] + self.values[m]);
        for v in &self.values[1..m] {
            acc += v;
        }
        acc / m as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// sup - inf over the samples.
    pub fn range(&self) -> f64 {
        let mut lo = self.values[0];
        let mut hi = self.values[0];
        for &v in &self.values[1..] {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        hi - lo
    }

    /// Index of the first maximal sample.
    pub fn argmax_first(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }

    /// Index of the first minimal sample.
    pub fn argmin_first(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = k;
            }
        }
        best
    }

    /// Sup norm over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn negated(&self) -> Segment {
        Segment {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Segment {
        Segment {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// self + h * other, sample-wise.
    pub fn add_scaled(&self, other: &Segment, h: f64) -> Result<Segment> {
        if self.values.len() != other.values.len() {
            return Err(Error::invalid("segment lengths differ"));
        }
        Ok(Segment {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + h * b)
                .collect(),
        })
    }

    /// Restriction to every second sample (m must be even).
    pub fn every_second(&self) -> Result<Segment> {
        if self.subdivision() % 2 != 0 {
            return Err(Error::invalid("subdivision must be even"));
        }
        Ok(Segment {
            values: self.values.iter().cloned().step_by(2).collect(),
        })
    }
}

pub type EvalFn = dyn Fn(&Segment) -> f64 + Send + Sync;
pub type DerivFn = dyn Fn(&Segment, &Segment) -> f64 + Send + Sync;

/// The functional families.
#[derive(Clone)]
pub enum FunctionalKind {
    TerminalPower(f64),
    IntegralPower(f64),
    RangePower(f64),
    Custom {
        eval: Arc<EvalFn>,
        derivative: Option<Arc<DerivFn>>,
    },
}

impl fmt::Debug for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalKind::TerminalPower(p) => write!(f, "TerminalPower({p})"),
            FunctionalKind::IntegralPower(p) => write!(f, "IntegralPower({p})"),
            FunctionalKind::RangePower(p) => write!(f, "RangePower({p})"),
            FunctionalKind::Custom { derivative, .. } => {
                write!(f, "Custom {{ derivative: {} }}", derivative.is_some())
            }
        }
    }
}

/// A path functional together with its parity flag.
#[derive(Clone, Debug)]
pub struct FunctionalSpec {
    kind: FunctionalKind,
    is_even: bool,
}

impl FunctionalSpec {
    /// g(x) = |x(1)|^p, p > 0.
    pub fn terminal_power(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(FunctionalSpec {
            kind: FunctionalKind::TerminalPower(p),
            is_even: true,
        })
    }

    /// g(x) = |∫₀¹ x(s) ds|^p, p > 0.
    pub fn integral_power(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(FunctionalSpec {
            kind: FunctionalKind::IntegralPower(p),
            is_even: true,
        })
    }

    /// g(x) = (sup x - inf x)^p, p > 0.
    pub fn range_power(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(FunctionalSpec {
            kind: FunctionalKind::RangePower(p),
            is_even: true,
        })
    }

    /// User-supplied functional; `is_even` is the caller's parity claim and
    /// can be probed with [`FunctionalSpec::check_even`].
    pub fn custom(
        eval: Arc<EvalFn>,
        derivative: Option<Arc<DerivFn>>,
        is_even: bool,
    ) -> Self {
        FunctionalSpec {
            kind: FunctionalKind::Custom { eval, derivative },
            is_even,
        }
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    pub fn is_even(&self) -> bool {
        self.is_even
    }

    /// Whether [`FunctionalSpec::directional_derivative`] can succeed:
    /// built-ins need p > 1, custom functionals need an evaluator.
    pub fn has_derivative(&self) -> bool {
        match &self.kind {
            FunctionalKind::TerminalPower(p)
            | FunctionalKind::IntegralPower(p)
            | FunctionalKind::RangePower(p) => *p > 1.0,
            FunctionalKind::Custom { derivative, .. } => derivative.is_some(),
        }
    }

    /// The exponent p for built-in families.
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            FunctionalKind::TerminalPower(p)
            | FunctionalKind::IntegralPower(p)
            | FunctionalKind::RangePower(p) => Some(p),
            FunctionalKind::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FunctionalKind::TerminalPower(_) => "terminal_power",
            FunctionalKind::IntegralPower(_) => "integral_power",
            FunctionalKind::RangePower(_) => "range_power",
            FunctionalKind::Custom { .. } => "custom",
        }
    }

    /// The functional with its exponent doubled. For the built-ins this is
    /// exactly g², which the bipower estimator needs.
    pub fn squared(&self) -> Result<FunctionalSpec> {
        match self.kind {
            FunctionalKind::TerminalPower(p) => FunctionalSpec::terminal_power(2.0 * p),
            FunctionalKind::IntegralPower(p) => FunctionalSpec::integral_power(2.0 * p),
            FunctionalKind::RangePower(p) => FunctionalSpec::range_power(2.0 * p),
            FunctionalKind::Custom { .. } => Err(Error::Unsupported(
                "squared() is only defined for built-in functionals".into(),
            )),
        }
    }

    /// Evaluate g(x).
    pub fn eval(&self, x: &Segment) -> Result<f64> {
        let v = match &self.kind {
            FunctionalKind::TerminalPower(p) => x.terminal().abs().powf(*p),
            FunctionalKind::IntegralPower(p) => x.trapezoid_integral().abs().powf(*p),
            FunctionalKind::RangePower(p) => x.range().powf(*p),
            FunctionalKind::Custom { eval, .. } => eval(x),
        };
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "functional {} evaluated to non-finite value",
                self.name()
            )));
        }
        Ok(v)
    }

    /// Directional derivative g'_y(x) = lim (g(x+hy) - g(x))/h.
    ///
    /// Built-ins require p > 1 (|u|^p is not differentiable at 0 otherwise).
    /// The range family uses the argmax rule
    /// p (sup-inf)^{p-1} (y(t_max) - y(t_min)) with first-index tie-break.
    pub fn directional_derivative(&self, x: &Segment, y: &Segment) -> Result<f64> {
        if x.values.len() != y.values.len() {
            return Err(Error::invalid("x and y have different subdivisions"));
        }
        match &self.kind {
            FunctionalKind::TerminalPower(p) => {
                require_p_above_one(*p)?;
                let u = x.terminal();
                Ok(*p * u.abs().powf(*p - 1.0) * u.signum_or_zero() * y.terminal())
            }
            FunctionalKind::IntegralPower(p) => {
                require_p_above_one(*p)?;
                let u = x.trapezoid_integral();
                Ok(*p * u.abs().powf(*p - 1.0) * u.signum_or_zero() * y.trapezoid_integral())
            }
            FunctionalKind::RangePower(p) => {
                require_p_above_one(*p)?;
                let r = x.range();
                let kmax = x.argmax_first();
                let kmin = x.argmin_first();
                Ok(*p * r.powf(*p - 1.0) * (y.values[kmax] - y.values[kmin]))
            }
            FunctionalKind::Custom { derivative, .. } => match derivative {
                Some(d) => Ok(d(x, y)),
                None => Err(Error::UnsupportedDerivative(
                    "custom functional has no derivative evaluator".into(),
                )),
            },
        }
    }

    /// Empirical parity check: samples Brownian segments and compares g(x)
    /// with g(-x).
    pub fn check_even(&self, trials: usize, seed: &SeedStream) -> Result<EvennessReport> {
        if trials == 0 {
            return Err(Error::invalid("check_even needs at least one trial"));
        }
        let m = 32;
        let tol = 1e-9;
        let mut worst: f64 = 0.0;
        for t in 0..trials {
            let x = Segment::brownian(m, &seed.child(t as u64));
            // vary the amplitude so homogeneous functionals are probed at
            // several scales
            let c = [0.5, 1.0, 2.0][t % 3];
            let x = x.scaled(c);
            let g_plus = self.eval(&x)?;
            let g_minus = self.eval(&x.negated())?;
            let violation = (g_plus - g_minus).abs() / (1.0 + g_plus.abs());
            if violation > worst {
                worst = violation;
            }
        }
        Ok(EvennessReport {
            passed: worst <= tol,
            worst_violation: worst,
            trials,
        })
    }
}

/// Outcome of [`FunctionalSpec::check_even`].
#[derive(Clone, Copy, Debug)]
pub struct EvennessReport {
    pub passed: bool,
    pub worst_violation: f64,
    pub trials: usize,
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("exponent p must be > 0, got {p}")));
    }
    Ok(())
}

fn require_p_above_one(p: f64) -> Result<()> {
    if p <= 1.0 {
        return Err(Error::UnsupportedDerivative(format!(
            "derivative of |u|^p is singular at 0 for p = {p} <= 1"
        )));
    }
    Ok(())
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    /// signum with 0 at 0, so p|u|^{p-1} sgn(u) is continuous for p > 1.
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}
