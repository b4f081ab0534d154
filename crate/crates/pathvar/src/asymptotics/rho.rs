//! Monte Carlo estimation of rho_z(g) = E[g({z W_s})] and of the
//! first-order constants rho^{(1)}, rho^{(2)}, rho^{(3)} entering the
//! continuous central limit theorem.

use rand_distr::{Distribution, StandardNormal};

use super::{par_map_reps, RhoEstimate};
use crate::error::{Error, Result};
use crate::functional::{FunctionalSpec, Segment};
use crate::rng::SeedStream;
use crate::stats::{mean_and_se, pairwise_sum};

/// The direction used for rho^{(3)}: the theorem displays {W_s^2}, the
/// proof works with the compensated {W_s^2 - s}. The two differ by exactly
/// rho^{(2)} (linearity of the derivative in its direction), so both are
/// exposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoThreeVariant {
    AsStated,
    AsProof,
}

/// Raw Brownian grid values W_{k/m}, k = 0..m.
pub(crate) fn brownian_values(m: usize, seed: &SeedStream) -> Vec<f64> {
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
    values
}

/// MC estimate of rho_z(g) from `reps` Brownian segments on `m`
/// subintervals.
pub fn rho_mc(
    z: f64,
    g: &FunctionalSpec,
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<RhoEstimate> {
    if reps < 2 {
        return Err(Error::invalid("rho_mc needs reps >= 2"));
    }
    if m < 1 {
        return Err(Error::invalid("rho_mc needs m >= 1"));
    }
    let values = par_map_reps(reps, seed, |r, s| {
        let w = brownian_values(m, &s);
        let seg = Segment::new(w.iter().map(|v| z * v).collect())
            .expect("brownian segment is finite");
        g.eval(&seg)
            .map_err(|e| Error::invalid(format!("replication {r}: {e}")))
    })?;
    let (value, std_error) = mean_and_se(&values);
    Ok(RhoEstimate {
        value,
        std_error,
        reps,
        m_fine: m,
    })
}

/// Joint MC estimate of rho_z(g) and rho_z(g^2) under common random
/// numbers; used for the conditional-variance term rho(g^2) - rho(g)^2.
pub fn rho_and_square_mc(
    z: f64,
    g: &FunctionalSpec,
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<(RhoEstimate, RhoEstimate)> {
    if reps < 2 {
        return Err(Error::invalid("rho_and_square_mc needs reps >= 2"));
    }
    let pairs = par_map_reps(reps, seed, |r, s| {
        let w = brownian_values(m, &s);
        let seg = Segment::new(w.iter().map(|v| z * v).collect())
            .expect("brownian segment is finite");
        let v = g
            .eval(&seg)
            .map_err(|e| Error::invalid(format!("replication {r}: {e}")))?;
        Ok([v, v * v])
    })?;
    let firsts: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
    let seconds: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
    let (v1, se1) = mean_and_se(&firsts);
    let (v2, se2) = mean_and_se(&seconds);
    Ok((
        RhoEstimate {
            value: v1,
            std_error: se1,
            reps,
            m_fine: m,
        },
        RhoEstimate {
            value: v2,
            std_error: se2,
            reps,
            m_fine: m,
        },
    ))
}

/// The three first-order constants of the continuous CLT.
#[derive(Debug)]
pub struct Rho123 {
    /// rho^{(1)}_z(g) = E[g({z W_s}) W_1]; needs no derivative.
    pub rho1: RhoEstimate,
    /// (rho^{(2)}, rho^{(3)}): directional-derivative expectations with
    /// directions {s} and {W_s^2} (or {W_s^2 - s} for the proof variant).
    /// Unavailable when g has no usable derivative.
    pub rho23: Result<(RhoEstimate, RhoEstimate)>,
}

/// MC estimates of rho^{(1)}, rho^{(2)}, rho^{(3)}. When `g` has no
/// directional derivative the rho1 component is still estimated and the
/// derivative pair carries the unsupported-derivative error.
pub fn rho123_mc(
    z: f64,
    g: &FunctionalSpec,
    reps: usize,
    m: usize,
    seed: &SeedStream,
    variant: RhoThreeVariant,
) -> Result<Rho123> {
    if reps < 2 {
        return Err(Error::invalid("rho123_mc needs reps >= 2"));
    }
    if m < 1 {
        return Err(Error::invalid("rho123_mc needs m >= 1"));
    }
    let with_derivative = g.has_derivative();
    let time_direction =
        Segment::new((0..=m).map(|k| k as f64 / m as f64).collect()).expect("finite");

    let rows = par_map_reps(reps, seed, |r, s| {
        let w = brownian_values(m, &s);
        let x = Segment::new(w.iter().map(|v| z * v).collect()).expect("finite");
        let gx = g
            .eval(&x)
            .map_err(|e| Error::invalid(format!("replication {r}: {e}")))?;
        let w1 = w[m];
        let mut row = [gx * w1, 0.0, 0.0];
        if with_derivative {
            let d2 = g.directional_derivative(&x, &time_direction)?;
            let dir3 = Segment::new(
                w.iter()
                    .enumerate()
                    .map(|(k, v)| match variant {
                        RhoThreeVariant::AsStated => v * v,
                        RhoThreeVariant::AsProof => v * v - k as f64 / m as f64,
                    })
                    .collect(),
            )
            .expect("finite");
            let d3 = g.directional_derivative(&x, &dir3)?;
            row[1] = d2;
            row[2] = d3;
        }
        Ok(row)
    })?;

    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let (v1, se1) = mean_and_se(&col(0));
    let rho1 = RhoEstimate {
        value: v1,
        std_error: se1,
        reps,
        m_fine: m,
    };
    let rho23 = if with_derivative {
        let (v2, se2) = mean_and_se(&col(1));
        let (v3, se3) = mean_and_se(&col(2));
        Ok((
            RhoEstimate {
                value: v2,
                std_error: se2,
                reps,
                m_fine: m,
            },
            RhoEstimate {
                value: v3,
                std_error: se3,
                reps,
                m_fine: m,
            },
        ))
    } else {
        Err(Error::UnsupportedDerivative(format!(
            "functional {} has no directional derivative; rho^(2)/rho^(3) unavailable",
            g.name()
        )))
    };
    Ok(Rho123 { rho1, rho23 })
}

/// Joint estimate of E[r^p], E[r^{2p}], E[r^{3p}], E[r^{4p}] where r is the
/// base statistic of a built-in family (|terminal|, |integral| or range) on
/// an m-point Brownian segment. These four moments feed the delta method
/// for the efficiency ratio.
pub(crate) fn base_moments_mc(
    base: impl Fn(&[f64]) -> f64 + Sync,
    p: f64,
    m: usize,
    reps: usize,
    seed: &SeedStream,
) -> Result<[Vec<f64>; 4]> {
    let rows = par_map_reps(reps, seed, |_r, s| {
        let w = brownian_values(m, &s);
        let r = base(&w);
        let rp = r.powf(p);
        Ok([rp, rp * rp, rp * rp * rp, rp * rp * rp * rp])
    })?;
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    Ok([col(0), col(1), col(2), col(3)])
}

/// Mean of each of the four power columns.
pub(crate) fn moment_means(cols: &[Vec<f64>; 4]) -> [f64; 4] {
    let n = cols[0].len() as f64;
    [
        pairwise_sum(&cols[0]) / n,
        pairwise_sum(&cols[1]) / n,
        pairwise_sum(&cols[2]) / n,
        pairwise_sum(&cols[3]) / n,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::FunctionalSpec;
    use std::sync::Arc;

    #[test]
    fn rho_terminal_power_matches_gaussian_moments() {
        let seed = SeedStream::new(0xA1);
        let g = FunctionalSpec::terminal_power(2.0).unwrap();
        // z = 1: E W_1^2 = 1
        let e = rho_mc(1.0, &g, 16, 20_000, &seed).unwrap();
        assert!(
            (e.value - 1.0).abs() < 3.0 * e.std_error,
            "value {} se {}",
            e.value,
            e.std_error
        );
        // z = 2: z^2 scaling gives 4
        let e = rho_mc(2.0, &g, 16, 20_000, &seed).unwrap();
        assert!((e.value - 4.0).abs() < 3.0 * e.std_error);
    }

    #[test]
    fn rho_scaling_law_under_common_random_numbers() {
        let seed = SeedStream::new(0xA2);
        for (p, g) in [
            (2.0, FunctionalSpec::range_power(2.0).unwrap()),
            (1.5, FunctionalSpec::terminal_power(1.5).unwrap()),
            (3.0, FunctionalSpec::integral_power(3.0).unwrap()),
        ] {
            let base = rho_mc(1.0, &g, 32, 2_000, &seed).unwrap();
            for z in [0.5, 2.0] {
                let e = rho_mc(z, &g, 32, 2_000, &seed).unwrap();
                let expected = z.powf(p) * base.value;
                // same draws: equality up to powf rounding
                assert!(
                    (e.value - expected).abs() <= 1e-12 * expected.abs(),
                    "z={z}: {} vs {}",
                    e.value,
                    expected
                );
            }
        }
    }

    #[test]
    fn rho_validation() {
        let g = FunctionalSpec::terminal_power(2.0).unwrap();
        assert!(rho_mc(1.0, &g, 16, 1, &SeedStream::new(0)).is_err());
        assert!(rho_mc(1.0, &g, 0, 10, &SeedStream::new(0)).is_err());
    }

    #[test]
    fn rho123_even_functional_annihilates() {
        let seed = SeedStream::new(0xA3);
        let g = FunctionalSpec::range_power(2.0).unwrap();
        for z in [0.5, 1.0, 2.0] {
            let out = rho123_mc(z, &g, 20_000, 32, &seed, RhoThreeVariant::AsStated).unwrap();
            let (r2, r3) = out.rho23.as_ref().unwrap();
            for (name, e) in [("rho1", &out.rho1), ("rho2", r2), ("rho3", r3)] {
                assert!(
                    e.value.abs() < 3.0 * e.std_error.max(1e-4),
                    "{name} at z={z}: {} se {}",
                    e.value,
                    e.std_error
                );
            }
        }
    }

    #[test]
    fn rho1_gaussian_moments_for_odd_functionals() {
        let seed = SeedStream::new(0xA4);
        // g(x) = x(1)^3: rho1 = E[W^4] = 3
        let cubed = FunctionalSpec::custom(
            Arc::new(|x: &Segment| x.terminal().powi(3)),
            None,
            false,
        );
        let out = rho123_mc(1.0, &cubed, 50_000, 8, &seed, RhoThreeVariant::AsStated).unwrap();
        assert!(
            (out.rho1.value - 3.0).abs() < 3.0 * out.rho1.std_error,
            "rho1 {} se {}",
            out.rho1.value,
            out.rho1.std_error
        );
        assert!(out.rho23.is_err());

        // g(x) = x(1)^2: rho1 = E[W^3] = 0
        let squared = FunctionalSpec::custom(
            Arc::new(|x: &Segment| x.terminal().powi(2)),
            None,
            true,
        );
        let out = rho123_mc(1.0, &squared, 50_000, 8, &seed, RhoThreeVariant::AsStated).unwrap();
        assert!(out.rho1.value.abs() < 3.0 * out.rho1.std_error);
    }

    #[test]
    fn rho3_variants_differ_by_rho2() {
        // E[f(x; {W^2})] - E[f(x; {W^2 - s})] = E[f(x; {s})] = rho2,
        // exactly per draw under common random numbers
        let seed = SeedStream::new(0xA5);
        let g = FunctionalSpec::range_power(3.0).unwrap();
        let stated = rho123_mc(1.3, &g, 5_000, 24, &seed, RhoThreeVariant::AsStated).unwrap();
        let proof = rho123_mc(1.3, &g, 5_000, 24, &seed, RhoThreeVariant::AsProof).unwrap();
        let (r2s, r3s) = stated.rho23.unwrap();
        let (_r2p, r3p) = proof.rho23.unwrap();
        assert!(
            ((r3s.value - r3p.value) - r2s.value).abs() < 1e-10,
            "difference {} vs rho2 {}",
            r3s.value - r3p.value,
            r2s.value
        );
    }
}
