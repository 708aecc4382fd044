//! Monte Carlo estimation of stopping-time moments, rate constants and
//! related quantities.
//!
//! Replicate `i` always draws from stream `i` of the configured seed, and
//! results are collected in replicate order before any reduction, so reports
//! do not depend on the number of workers.

mod moments;
mod rates;
mod stats;
mod tau;

pub use moments::{
    estimate_eta_kappa, negative_moment_study, small_deviation_study, EtaKappa, NegMomentRow, Sampler,
    SmallDevRow, SmallDeviationStudy,
};
pub use rates::{
    avg_knot_rate_study, b_constant, gamma_trajectories, rate_study, AvgKnotRow, AvgKnotStudy, RateRow,
    RateStudy,
};
pub use stats::{interquartile_range, EstimateWithError, RateFit};
pub use tau::{estimate_tau, xi_structure_check, TauEstimate, XiReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Grid steps per unit time.
    pub grid_n: usize,
    /// Initial simulation horizon for stopping-time searches.
    pub horizon_t: f64,
    /// Largest horizon a stopping-time search may grow to.
    pub horizon_cap: f64,
    /// Worker threads; `0` lets the pool pick.
    pub workers: usize,
    /// Relative tolerance of the `gamma_k` bisection.
    pub tol_rel: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 1,
            grid_n: 1 << 12,
            horizon_t: 4.0,
            horizon_cap: 64.0,
            workers: 0,
            tol_rel: crate::knots::DEFAULT_TOL_REL,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("need replicates >= 1"));
        }
        if self.grid_n < 16 {
            return Err(Error::invalid(format!("need grid_n >= 16, got {}", self.grid_n)));
        }
        if !(self.horizon_t > 0.0) || !(self.horizon_cap >= self.horizon_t) {
            return Err(Error::invalid(format!(
                "need 0 < horizon_t <= horizon_cap, got {} and {}",
                self.horizon_t, self.horizon_cap
            )));
        }
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return Err(Error::invalid(format!("tol_rel must lie in (0, 1), got {}", self.tol_rel)));
        }
        Ok(())
    }

    pub fn with_replicates(&self, replicates: usize) -> Self {
        Self { replicates, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_grid_n(&self, grid_n: usize) -> Self {
        Self { grid_n, ..self.clone() }
    }
}

/// Runs `f` once per replicate on the configured pool; results come back in
/// replicate order. `lane` separates independent families of streams.
pub fn run_replicates<T, F>(cfg: &McConfig, lane: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::for_lane(cfg.seed, lane, i as u64);
                f(i, &mut rng)
            })
            .collect()
    })
}
