use serde::{Deserialize, Serialize};

use super::{run_replicates, EstimateWithError, McConfig, RateFit};
use crate::error::{Error, Result};
use crate::knots::{beta, build_spline, build_spline_eps};
use crate::norm::Norm;
use crate::sim::simulate_integrated_wiener;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: usize,
    /// `(E ||W^(s) - phi*_k||_p^q)^(1/q)`.
    pub mean_error: f64,
    pub std_error: f64,
    /// `E gamma_k`.
    pub mean_gamma: f64,
    pub gamma_std_error: f64,
    pub k_pow_beta_times_error: f64,
    /// `k^(s+1/2)` times the mean error.
    pub k_pow_rate_times_error: f64,
    /// `k^beta E gamma_k`.
    pub k_pow_beta_times_gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub r: usize,
    pub s: usize,
    pub p: Norm,
    pub q: f64,
    pub beta: f64,
    pub rows: Vec<RateRow>,
    /// Log mean error against log k.
    pub fit: RateFit,
}

fn check(r: usize, s: usize, q: f64) -> Result<()> {
    if r < s {
        return Err(Error::invalid(format!("degree r = {r} must be at least the integration order s = {s}")));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("averaging exponent must satisfy q >= 1, got {q}")));
    }
    Ok(())
}

/// Error of the free-knot spline `phi*_k` on `W^(s)` over `[0, 1]` for each `k`.
pub fn rate_study(r: usize, s: usize, p: Norm, q: f64, k_list: &[usize], cfg: &McConfig) -> Result<RateStudy> {
    cfg.validate()?;
    check(r, s, q)?;
    if k_list.len() < 3 || k_list.contains(&0) {
        return Err(Error::invalid("a rate study needs at least 3 positive piece counts"));
    }
    let lane = 0x4a7e ^ ((s as u64) << 32) ^ ((r as u64) << 40);
    let per_rep = run_replicates(cfg, lane, |_, rng| {
        let paths = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)?;
        let f = paths.top();
        k_list
            .iter()
            .map(|&k| {
                let fk = build_spline(f, k, r, p, cfg.tol_rel)?;
                Ok((fk.error(), fk.gamma))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let b = beta(s, p);
    let errors: Vec<Vec<f64>> = (0..k_list.len()).map(|j| per_rep.iter().map(|r| r[j].0).collect()).collect();
    let mut rows = Vec::with_capacity(k_list.len());
    for (j, &k) in k_list.iter().enumerate() {
        let err = EstimateWithError::moment_root(&errors[j], q);
        let gam = EstimateWithError::from_samples(&per_rep.iter().map(|r| r[j].1).collect::<Vec<_>>());
        let kf = k as f64;
        rows.push(RateRow {
            k,
            mean_error: err.mean,
            std_error: err.std_error,
            mean_gamma: gam.mean,
            gamma_std_error: gam.std_error,
            k_pow_beta_times_error: kf.powf(b) * err.mean,
            k_pow_rate_times_error: kf.powf(s as f64 + 0.5) * err.mean,
            k_pow_beta_times_gamma: kf.powf(b) * gam.mean,
        });
    }
    let xs: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
    let fit = RateFit::from_replicates(&xs, &errors, q, cfg.seed)?;
    Ok(RateStudy { r, s, p, q, beta: b, rows, fit })
}

/// Per-path `k^beta gamma_k` for every `k`; `out[j][i]` belongs to `k_list[j]`
/// and replicate `i`.
pub fn gamma_trajectories(r: usize, s: usize, p: Norm, k_list: &[usize], cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check(r, s, 1.0)?;
    let b = beta(s, p);
    let lane = 0x9a ^ ((s as u64) << 32) ^ ((r as u64) << 40);
    let per_rep = run_replicates(cfg, lane, |_, rng| {
        let paths = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)?;
        k_list
            .iter()
            .map(|&k| Ok((k as f64).powf(b) * crate::knots::gamma_k(paths.top(), k, r, p, cfg.tol_rel)?))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((0..k_list.len()).map(|j| per_rep.iter().map(|r| r[j]).collect()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgKnotRow {
    pub epsilon: f64,
    pub mean_pieces: f64,
    pub pieces_std_error: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgKnotStudy {
    pub r: usize,
    pub s: usize,
    pub p: Norm,
    pub q: f64,
    pub beta: f64,
    pub rows: Vec<AvgKnotRow>,
    /// Log mean error against log mean piece count.
    pub fit: RateFit,
    /// Observed piece-count ratio between consecutive thresholds divided by
    /// the predicted `(eps_i / eps_{i+1})^(1/beta)`.
    pub piece_ratio_vs_scaling: Vec<f64>,
}

/// Variable-knot splines at each threshold: mean piece count against mean error.
pub fn avg_knot_rate_study(
    r: usize,
    s: usize,
    p: Norm,
    q: f64,
    epsilon_list: &[f64],
    cfg: &McConfig,
) -> Result<AvgKnotStudy> {
    cfg.validate()?;
    check(r, s, q)?;
    if epsilon_list.len() < 3 {
        return Err(Error::invalid(format!(
            "a rate fit needs >= 3 thresholds, got {}",
            epsilon_list.len()
        )));
    }
    if epsilon_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("thresholds must be positive"));
    }
    let lane = 0xa7 ^ ((s as u64) << 32) ^ ((r as u64) << 40);
    let per_rep = run_replicates(cfg, lane, |_, rng| {
        let paths = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)?;
        epsilon_list
            .iter()
            .map(|&eps| {
                let fk = build_spline_eps(paths.top(), eps, r, p)?;
                Ok((fk.n_pieces() as f64, fk.error()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let b = beta(s, p);
    let pieces: Vec<Vec<f64>> = (0..epsilon_list.len()).map(|j| per_rep.iter().map(|r| r[j].0).collect()).collect();
    let errors: Vec<Vec<f64>> = (0..epsilon_list.len()).map(|j| per_rep.iter().map(|r| r[j].1).collect()).collect();
    let rows: Vec<AvgKnotRow> = epsilon_list
        .iter()
        .enumerate()
        .map(|(j, &epsilon)| {
            let k = EstimateWithError::from_samples(&pieces[j]);
            let e = EstimateWithError::moment_root(&errors[j], q);
            AvgKnotRow {
                epsilon,
                mean_pieces: k.mean,
                pieces_std_error: k.std_error,
                mean_error: e.mean,
                std_error: e.std_error,
            }
        })
        .collect();
    let xs: Vec<f64> = (0..epsilon_list.len()).map(|j| j as f64).collect();
    let fit = RateFit::from_replicates_with(&xs, &errors, q, cfg.seed, |x, idx| {
        let col = &pieces[x as usize];
        idx.iter().map(|&i| col[i]).sum::<f64>() / idx.len() as f64
    })?;
    let piece_ratio_vs_scaling = rows
        .windows(2)
        .map(|w| (w[1].mean_pieces / w[0].mean_pieces) / (w[0].epsilon / w[1].epsilon).powf(1.0 / b))
        .collect();
    Ok(AvgKnotStudy { r, s, p, q, beta: b, rows, fit, piece_ratio_vs_scaling })
}

/// `b_{s,p} = (s + 1/2)^(s + 1/2) p^(-1/p) beta^(-beta)`, with `b_{s,inf} = 1`.
pub fn b_constant(s: usize, p: Norm) -> f64 {
    if p.is_inf() {
        return 1.0;
    }
    let a = s as f64 + 0.5;
    let pv = p.value();
    let b = beta(s, p);
    a.powf(a) * pv.powf(-1.0 / pv) * b.powf(-b)
}
