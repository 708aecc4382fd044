use serde::{Deserialize, Serialize};

use super::{run_replicates, EstimateWithError, McConfig};
use crate::error::{Error, Result};
use crate::fit::Fitter;
use crate::knots::beta;
use crate::norm::Norm;
use crate::rng::RngStream;
use crate::sim::simulate_integrated_wiener;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub epsilon: f64,
    pub beta: f64,
    /// Mean first stopping time at threshold `epsilon`.
    pub tau: EstimateWithError,
    /// `(E tau)^(-beta)`, meaningful at `epsilon = 1`.
    pub c: EstimateWithError,
    pub grid_step: f64,
    pub capped: usize,
    /// More than 1% of the replicates hit the horizon cap.
    pub unreliable: bool,
}

/// First `count` stopping times of a fresh `W^(s)` path, growing the horizon
/// by doubling up to `cap_n` steps. Returns stop indices (with `tau_0 = 0`)
/// and whether the cap was hit first.
#[allow(clippy::too_many_arguments)]
fn stops_with_extension(
    fitter: &mut Fitter,
    s: usize,
    eps: f64,
    step: f64,
    n0: usize,
    cap_n: usize,
    count: usize,
    rng: &mut RngStream,
) -> Result<(Vec<usize>, bool)> {
    let mut paths = simulate_integrated_wiener(s, n0, n0 as f64 * step, rng)?;
    let mut stops = vec![0usize];
    let mut hint = 1usize;
    loop {
        let path = paths.top();
        let end = path.n_steps();
        while stops.len() <= count {
            let cur = *stops.last().unwrap();
            match fitter.first_exceedance(path.values(), step, cur, end, eps, hint.max(1))? {
                Some(i) => {
                    hint = ((i - cur) / 2).max(1);
                    stops.push(i);
                }
                None => {
                    hint = end - cur;
                    break;
                }
            }
        }
        if stops.len() > count {
            return Ok((stops, false));
        }
        if end >= cap_n {
            return Ok((stops, true));
        }
        let extra = end.min(cap_n - end);
        paths.extend(extra, rng)?;
    }
}

fn lane_for(tag: u64, eps: f64, s: usize, r: usize, p: Norm) -> u64 {
    tag ^ eps.to_bits().rotate_left(17) ^ ((s as u64) << 48) ^ ((r as u64) << 40) ^ p.value().to_bits()
}

/// Resolution and horizons in the natural time scale `epsilon^(1/beta)`.
fn scaled_grid(cfg: &McConfig, eps: f64, b: f64) -> (f64, usize, usize) {
    let rho = eps.powf(1.0 / b);
    let step = rho / cfg.grid_n as f64;
    let n0 = ((cfg.horizon_t * cfg.grid_n as f64).round() as usize).max(1);
    let cap_n = ((cfg.horizon_cap * cfg.grid_n as f64).round() as usize).max(n0);
    (step, n0, cap_n)
}

/// Monte Carlo estimate of `E tau_{1, epsilon}` for `W^(s)` with degree-`r`
/// pieces in `L_p`.
///
/// The grid, the initial horizon and the cap are expressed in units of
/// `epsilon^(1/beta)`, the time scale on which the stopping time lives, so
/// `cfg.grid_n` is the number of grid points per natural time unit.
pub fn estimate_tau(r: usize, s: usize, p: Norm, epsilon: f64, cfg: &McConfig) -> Result<TauEstimate> {
    cfg.validate()?;
    check_orders(r, s)?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {epsilon}")));
    }
    let b = beta(s, p);
    let (step, n0, cap_n) = scaled_grid(cfg, epsilon, b);
    let lane = lane_for(0x7a0, epsilon, s, r, p);
    let out = run_replicates(cfg, lane, |_, rng| {
        let mut fitter = Fitter::new(r, p)?;
        let (stops, capped) = stops_with_extension(&mut fitter, s, epsilon, step, n0, cap_n, 1, rng)?;
        let tau = if capped { cap_n as f64 * step } else { stops[1] as f64 * step };
        Ok((tau, capped))
    })?;
    let taus: Vec<f64> = out.iter().map(|o| o.0).collect();
    let capped = out.iter().filter(|o| o.1).count();
    let tau = EstimateWithError::from_samples(&taus);
    Ok(TauEstimate {
        epsilon,
        beta: b,
        tau,
        c: tau.powf(-b),
        grid_step: step,
        capped,
        unreliable: capped * 100 > cfg.replicates,
    })
}

fn check_orders(r: usize, s: usize) -> Result<()> {
    if r < s {
        return Err(Error::invalid(format!("degree r = {r} must be at least the integration order s = {s}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiReport {
    pub epsilon: f64,
    pub j_max: usize,
    pub spacings_used: usize,
    /// Pooled lag-1 sample correlation of consecutive spacings; absent for `j_max = 1`.
    pub lag1_correlation: Option<f64>,
    /// `3 / sqrt(spacings_used)`.
    pub lag1_bound: f64,
    /// Mean of the `j`-th spacing, `j = 1..=j_max`.
    pub per_j: Vec<EstimateWithError>,
    /// Largest |z| between two per-`j` means; absent for `j_max = 1`.
    pub max_pairwise_z: Option<f64>,
    /// Replicates that hit the cap before `j_max` stopping times.
    pub capped: usize,
    pub unreliable: bool,
}

/// Spacings `xi_j = tau_j - tau_{j-1}`, `j <= j_max`, across replicates.
pub fn xi_structure_check(
    r: usize,
    s: usize,
    p: Norm,
    epsilon: f64,
    j_max: usize,
    cfg: &McConfig,
) -> Result<XiReport> {
    cfg.validate()?;
    check_orders(r, s)?;
    if j_max == 0 || !(epsilon > 0.0) {
        return Err(Error::invalid("need j_max >= 1 and a positive threshold"));
    }
    let b = beta(s, p);
    let (step, n0, cap_n) = scaled_grid(cfg, epsilon, b);
    let n0 = n0.max((cfg.horizon_t * j_max as f64 * cfg.grid_n as f64) as usize).min(cap_n);
    let lane = lane_for(0x51, epsilon, s, r, p);
    let out = run_replicates(cfg, lane, |_, rng| {
        let mut fitter = Fitter::new(r, p)?;
        let (stops, capped) = stops_with_extension(&mut fitter, s, epsilon, step, n0, cap_n, j_max, rng)?;
        let xi: Vec<f64> = stops.windows(2).map(|w| (w[1] - w[0]) as f64 * step).collect();
        Ok((xi, capped))
    })?;
    let capped = out.iter().filter(|o| o.1).count();
    let rows: Vec<&Vec<f64>> = out.iter().filter(|o| !o.1).map(|o| &o.0).collect();
    let per_j: Vec<EstimateWithError> = (0..j_max)
        .map(|j| EstimateWithError::from_samples(&rows.iter().map(|x| x[j]).collect::<Vec<_>>()))
        .collect();
    let n = rows.len() * j_max;
    let (lag1, maxz) = if j_max >= 2 && rows.len() > 1 {
        let all: Vec<f64> = rows.iter().flat_map(|x| x.iter().copied()).collect();
        let m = all.iter().sum::<f64>() / n as f64;
        let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        let (mut acc, mut pairs) = (0.0, 0usize);
        for x in &rows {
            for w in x.windows(2) {
                acc += (w[0] - m) * (w[1] - m);
                pairs += 1;
            }
        }
        let corr = acc / pairs as f64 / var;
        let mut z = 0.0f64;
        for a in 0..j_max {
            for bj in a + 1..j_max {
                z = z.max(per_j[a].z_diff(&per_j[bj]).abs());
            }
        }
        (Some(corr), Some(z))
    } else {
        (None, None)
    };
    Ok(XiReport {
        epsilon,
        j_max,
        spacings_used: n,
        lag1_correlation: lag1,
        lag1_bound: 3.0 / (n as f64).sqrt(),
        per_j,
        max_pairwise_z: maxz,
        capped,
        unreliable: capped * 100 > cfg.replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_is_reproducible() {
        let cfg = McConfig { replicates: 40, grid_n: 256, ..McConfig::default() };
        let a = estimate_tau(0, 0, Norm::INF, 1.0, &cfg).unwrap();
        let b = estimate_tau(0, 0, Norm::INF, 1.0, &McConfig { workers: 2, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert!(a.tau.mean > 1.0 && a.tau.mean < 3.5, "{}", a.tau.mean);
        assert_eq!(a.capped, 0);
    }

    #[test]
    fn capped_replicates_are_flagged() {
        let cfg = McConfig { replicates: 20, grid_n: 64, horizon_t: 0.25, horizon_cap: 0.5, ..McConfig::default() };
        let est = estimate_tau(0, 0, Norm::INF, 1.0, &cfg).unwrap();
        assert!(est.capped > 0);
        assert!(est.unreliable);
    }

    #[test]
    fn single_spacing_has_no_correlation() {
        let cfg = McConfig { replicates: 30, grid_n: 128, ..McConfig::default() };
        let rep = xi_structure_check(0, 0, Norm::INF, 1.0, 1, &cfg).unwrap();
        assert!(rep.lag1_correlation.is_none());
        assert!(rep.max_pairwise_z.is_none());
        assert_eq!(rep.per_j.len(), 1);
    }

    #[test]
    fn rejects_low_degree() {
        assert!(estimate_tau(0, 1, Norm::INF, 1.0, &McConfig::default()).is_err());
    }
}
