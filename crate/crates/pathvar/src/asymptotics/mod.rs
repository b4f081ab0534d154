//! Limit-theory ingredients: the Brownian functionals rho_z(g) and their
//! first-order companions, the moment constants lambda^{i,p} and efficiency
//! ratios Lambda^{i,p} of the three built-in families, and simulators for
//! the limit laws arising in the continuous and jump central limit theorems.

mod constants;
mod limit;
mod rho;

pub use constants::{
    abs_moment_normal, efficiency_const, frozen_lambda3, frozen_range_moments, lambda3_table,
    ConstMethod, Family, Lambda3Row, FROZEN_M, FROZEN_REPS,
};
pub use limit::{
    simulate_limit_mixed, simulate_limit_u_continuous, simulate_limit_u_jump, CoefficientPaths,
    LimitJump, RangeLawMoments,
};
pub use rho::{rho_and_square_mc, rho_mc, rho123_mc, Rho123, RhoThreeVariant};

use crate::rng::SeedStream;

/// A Monte Carlo estimate of a limit constant.
#[derive(Clone, Copy, Debug)]
pub struct RhoEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
    /// Segment subdivision used (0 for closed forms).
    pub m_fine: usize,
}

impl RhoEstimate {
    pub fn exact(value: f64) -> Self {
        RhoEstimate {
            value,
            std_error: 0.0,
            reps: 1,
            m_fine: 0,
        }
    }
}

/// One draw from a simulated limit law. The decomposition satisfies
/// `value = sum(per_jump_terms) + mixed_gaussian_part` exactly.
#[derive(Clone, Debug)]
pub struct LimitLawSample {
    pub value: f64,
    pub per_jump_terms: Vec<f64>,
    pub mixed_gaussian_part: f64,
}

/// Parallel map over replication indices with per-replication child
/// streams. Output order is by replication index, so downstream pairwise
/// reductions are reproducible for any worker count.
pub(crate) fn par_map_reps<T: Send>(
    reps: usize,
    seed: &SeedStream,
    f: impl Fn(u64, SeedStream) -> crate::Result<T> + Sync,
) -> crate::Result<Vec<T>> {
    use rayon::prelude::*;
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(r, seed.child(r)))
        .collect()
}
