use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_replicates, EstimateWithError, McConfig, RateFit};
use crate::error::{Error, Result};
use crate::fit::{delta, lp_norm};
use crate::norm::Norm;
use crate::rng::RngStream;
use crate::sim::{simulate_brownian_bridge, simulate_diffusion, simulate_integrated_wiener, Scheme, SdeCoefficients};

/// Distribution of the summands in [`negative_moment_study`].
#[derive(Clone)]
pub enum Sampler {
    Exp1,
    Constant(f64),
    Custom(Arc<dyn Fn(&mut RngStream) -> f64 + Send + Sync>),
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Exp1 => write!(f, "Exp1"),
            Sampler::Constant(c) => write!(f, "Constant({c})"),
            Sampler::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Sampler {
    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            Sampler::Exp1 => rng.exp1(),
            Sampler::Constant(c) => *c,
            Sampler::Custom(f) => f(rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegMomentRow {
    pub k: usize,
    /// Estimate of `E S_k^(-alpha)` with `S_k` the mean of `k` draws.
    pub estimate: EstimateWithError,
}

/// `E (mean of k draws)^(-alpha)` for each `k`. Every replicate draws
/// `max(k_list)` values and uses their prefix means.
pub fn negative_moment_study(
    sampler: &Sampler,
    alpha: f64,
    k_list: &[usize],
    cfg: &McConfig,
) -> Result<Vec<NegMomentRow>> {
    if cfg.replicates == 0 {
        return Err(Error::invalid("need replicates >= 1"));
    }
    if !(alpha > 0.0) || k_list.is_empty() || k_list.contains(&0) {
        return Err(Error::invalid("need alpha > 0 and positive sample sizes"));
    }
    let kmax = *k_list.iter().max().unwrap();
    let per_rep = run_replicates(cfg, 0x4e6, |_, rng| {
        let mut sum = 0.0;
        let mut out = Vec::with_capacity(k_list.len());
        let mut sums = Vec::with_capacity(kmax);
        for _ in 0..kmax {
            let x = sampler.draw(rng);
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::InvalidInput(format!("sampler produced a non-positive value {x}")));
            }
            sum += x;
            sums.push(sum);
        }
        for &k in k_list {
            out.push((sums[k - 1] / k as f64).powf(-alpha));
        }
        Ok(out)
    })?;
    Ok(k_list
        .iter()
        .enumerate()
        .map(|(j, &k)| NegMomentRow {
            k,
            estimate: EstimateWithError::from_samples(&per_rep.iter().map(|r| r[j]).collect::<Vec<_>>()),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallDevRow {
    pub epsilon: f64,
    /// Replicates with `d(W^(s), Pi_r) <= epsilon`.
    pub hits: usize,
    pub probability: f64,
    pub std_error: f64,
    /// Replicates with `||W^(s)||_p <= epsilon` (no polynomial allowed).
    pub hits_no_poly: usize,
    pub probability_no_poly: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallDeviationStudy {
    pub r: usize,
    pub s: usize,
    pub p: Norm,
    pub rows: Vec<SmallDevRow>,
    /// `log(-log P)` against `log(1/epsilon)` over the usable thresholds.
    pub fit: Option<RateFit>,
    /// `1 / (s + 1/2)`.
    pub expected_slope: f64,
    pub warnings: Vec<String>,
}

/// Empirical `P(d(W^(s), Pi_r) <= eps)` on `[0, 1]` and its log-log exponent.
pub fn small_deviation_study(
    r: usize,
    s: usize,
    p: Norm,
    epsilon_list: &[f64],
    cfg: &McConfig,
) -> Result<SmallDeviationStudy> {
    cfg.validate()?;
    if epsilon_list.iter().any(|e| !(*e > 0.0)) || epsilon_list.is_empty() {
        return Err(Error::invalid("thresholds must be positive"));
    }
    let lane = 0x5d ^ ((s as u64) << 32) ^ ((r as u64) << 40);
    let dists = run_replicates(cfg, lane, |_, rng| {
        let paths = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)?;
        let f = paths.top();
        Ok((delta(f, 0.0, 1.0, r, p)?, lp_norm(f, 0.0, 1.0, p)?))
    })?;
    let n = dists.len() as f64;
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(epsilon_list.len());
    let mut points = Vec::new();
    for &eps in epsilon_list {
        let hits = dists.iter().filter(|d| d.0 <= eps).count();
        let hits_no_poly = dists.iter().filter(|d| d.1 <= eps).count();
        let prob = hits as f64 / n;
        rows.push(SmallDevRow {
            epsilon: eps,
            hits,
            probability: prob,
            std_error: (prob * (1.0 - prob) / n).sqrt(),
            hits_no_poly,
            probability_no_poly: hits_no_poly as f64 / n,
        });
        if hits == 0 {
            warnings.push(format!("no hits at epsilon = {eps}, point dropped"));
        } else if hits == dists.len() {
            warnings.push(format!("every replicate hit at epsilon = {eps}, point dropped"));
        } else {
            if hits < 10 {
                warnings.push(format!("only {hits} hits at epsilon = {eps}"));
            }
            points.push(((1.0 / eps).ln(), (-prob.ln()).ln()));
        }
    }
    let fit = if points.len() >= 3 {
        Some(RateFit::ols(points)?)
    } else {
        warnings.push(format!("{} usable thresholds, no exponent fit", points.len()));
        None
    };
    Ok(SmallDeviationStudy { r, s, p, rows, fit, expected_slope: 1.0 / (s as f64 + 0.5), warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaKappa {
    /// `(E ||B||_p^p)^(1/p)` over Brownian bridges.
    pub eta: EstimateWithError,
    /// `(E ||b(X)||_{p1}^{p2})^(1/p2)` over diffusion paths.
    pub kappa: EstimateWithError,
}

pub fn estimate_eta_kappa(p: f64, p1: f64, p2: f64, coeff: &SdeCoefficients, cfg: &McConfig) -> Result<EtaKappa> {
    cfg.validate()?;
    let (np, np1) = (Norm::new(p)?, Norm::new(p1)?);
    if !(p.is_finite() && p1.is_finite() && p2.is_finite() && p2 >= 1.0) {
        return Err(Error::invalid("eta and kappa need finite exponents p >= 1"));
    }
    let eta_samples = run_replicates(cfg, 0xe7a, |_, rng| {
        let b = simulate_brownian_bridge(cfg.grid_n, rng)?;
        Ok(lp_norm(&b, 0.0, 1.0, np)?.powf(p))
    })?;
    let kappa_samples = run_replicates(cfg, 0x6a99a, |_, rng| {
        let d = simulate_diffusion(coeff, cfg.grid_n, 1.0, rng, Scheme::Euler)?;
        let bx = d.x.map(crate::path::PathKind::Synthetic, |x| coeff.diffusion(x))?;
        Ok(lp_norm(&bx, 0.0, 1.0, np1)?.powf(p2))
    })?;
    Ok(EtaKappa {
        eta: EstimateWithError::from_samples(&eta_samples).powf(1.0 / p),
        kappa: EstimateWithError::from_samples(&kappa_samples).powf(1.0 / p2),
    })
}
