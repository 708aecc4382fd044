//! Piecewise approximation of scalar diffusions `dX = a(X) dt + b(X) dW`.
//!
//! Besides fitting free-knot splines directly to `X`, this module builds the
//! composite approximation `Y^ + M^`: the drift part `Y(t) = x0 + int_0^t a(X)`
//! is sampled at the equidistant knots `j/k`, and the martingale part
//! `M = X - Y` is approximated by `R^ + V^` where `R^` samples the Ito integral
//! `R(t) = int_0^t b(X) dW` at `j/k` and `V^` rescales a free-knot piecewise
//! constant fit `W^` of the driving Wiener path on each block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::{build_spline, FreeKnotSpline};
use crate::mc::{run_replicates, EstimateWithError, McConfig, RateFit};
use crate::norm::Norm;
use crate::path::{PathKind, SampledPath};
use crate::sim::{simulate_diffusion, Scheme, SdeCoefficients};
use crate::spline::{spline_error, Spline};

/// `Y(t_i) = x0 + h sum_{l < i} a(X(t_l))`.
pub fn drift_part(path_x: &SampledPath, coeff: &SdeCoefficients) -> Result<SampledPath> {
    let h = path_x.step();
    let mut acc = coeff.x0();
    let mut out = Vec::with_capacity(path_x.values().len());
    for &x in path_x.values() {
        out.push(acc);
        acc += coeff.drift(x) * h;
    }
    SampledPath::new(path_x.t0(), h, out, PathKind::Diffusion)
}

/// `R(t_i) = sum_{l < i} b(X(t_l)) (W(t_{l+1}) - W(t_l))`.
pub fn ito_part(path_x: &SampledPath, path_w: &SampledPath, coeff: &SdeCoefficients) -> Result<SampledPath> {
    check_joint(path_x, path_w)?;
    let xs = path_x.values();
    let ws = path_w.values();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(xs.len());
    out.push(0.0);
    for i in 0..xs.len() - 1 {
        acc += coeff.diffusion(xs[i]) * (ws[i + 1] - ws[i]);
        out.push(acc);
    }
    SampledPath::new(path_x.t0(), path_x.step(), out, PathKind::Diffusion)
}

fn check_joint(path_x: &SampledPath, path_w: &SampledPath) -> Result<()> {
    if path_x.values().len() != path_w.values().len() || path_x.step() != path_w.step() || path_x.t0() != path_w.t0() {
        return Err(Error::invalid("X and W must live on the same grid"));
    }
    Ok(())
}

/// Grid indices of `j/k`, `j = 0..=k`; `[0, 1]` must be covered and `k` must
/// divide the number of steps in `[0, 1]`.
fn block_indices(path: &SampledPath, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("need k >= 1"));
    }
    if path.t0() != 0.0 || path.end() < 1.0 - 0.5 * path.step() {
        return Err(Error::invalid("path must cover [0, 1]"));
    }
    let n1 = path.index_of(1.0)?;
    if n1 % k != 0 {
        return Err(Error::invalid(format!("k = {k} must divide the {n1} grid steps of [0, 1]")));
    }
    Ok((0..=k).map(|j| j * n1 / k).collect())
}

/// Piecewise constant `Y^ = Y((j-1)/k)` on `](j-1)/k, j/k]`.
pub fn build_drift_spline(path_x: &SampledPath, coeff: &SdeCoefficients, k: usize) -> Result<Spline> {
    let idx = block_indices(path_x, k)?;
    let y = drift_part(path_x, coeff)?;
    let values: Vec<f64> = idx[..k].iter().map(|&i| y.values()[i]).collect();
    Spline::piecewise_constant(idx.iter().map(|&i| path_x.time(i)).collect(), &values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpline {
    /// `M^ = R^ + V^` on the merged knots.
    pub spline: Spline,
    /// Free-knot piecewise constant fit of the driving Wiener path.
    pub wiener: FreeKnotSpline,
}

/// `M^ = R^ + V^` with `V^ = b(X((j-1)/k)) (W^ - W((j-1)/k))` on block `j`.
pub fn build_martingale_spline(
    path_x: &SampledPath,
    path_w: &SampledPath,
    coeff: &SdeCoefficients,
    k: usize,
    tol_rel: f64,
) -> Result<MartingaleSpline> {
    check_joint(path_x, path_w)?;
    let idx = block_indices(path_x, k)?;
    let r = ito_part(path_x, path_w, coeff)?;
    let wiener = build_spline(path_w, k, 0, Norm::INF, tol_rel)?;
    let what = &wiener.spline;
    let block_knots: Vec<f64> = idx.iter().map(|&i| path_x.time(i)).collect();
    let mut knots: Vec<f64> = block_knots.iter().chain(what.knots()).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let blocks = Spline::piecewise_constant(block_knots, &vec![0.0; k])?;
    let values = knots
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let j = blocks.piece_index(mid)?;
            let i = idx[j];
            let b = coeff.diffusion(path_x.values()[i]);
            Ok(r.values()[i] + b * (what.eval(mid)? - path_w.values()[i]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MartingaleSpline { spline: Spline::piecewise_constant(knots, &values)?, wiener })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentErrors {
    /// `||Y - Y^||_p`.
    pub drift: f64,
    /// `||M - M^||_p` with `M = X - Y`.
    pub martingale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionApproxResult {
    /// `X^ = Y^ + M^`.
    pub spline: Spline,
    pub pieces_used: usize,
    pub error_p: f64,
    pub components: ComponentErrors,
}

/// The composite approximation `Y^ + M^` of `X` with `k` blocks.
pub fn approximate_diffusion(
    path_x: &SampledPath,
    path_w: &SampledPath,
    coeff: &SdeCoefficients,
    k: usize,
    p: Norm,
    tol_rel: f64,
) -> Result<DiffusionApproxResult> {
    let y = drift_part(path_x, coeff)?;
    let yhat = build_drift_spline(path_x, coeff, k)?;
    let mhat = build_martingale_spline(path_x, path_w, coeff, k, tol_rel)?;
    let m = SampledPath::new(
        path_x.t0(),
        path_x.step(),
        path_x.values().iter().zip(y.values()).map(|(x, y)| x - y).collect(),
        PathKind::Diffusion,
    )?;
    let spline = yhat.add(&mhat.spline)?;
    Ok(DiffusionApproxResult {
        pieces_used: spline.n_pieces(),
        error_p: spline_error(path_x, &spline, p)?,
        components: ComponentErrors {
            drift: spline_error(&y, &yhat, p)?,
            martingale: spline_error(&m, &mhat.spline, p)?,
        },
        spline,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRow {
    pub k: usize,
    pub direct_pieces: f64,
    pub direct_error: EstimateWithError,
    pub composite_pieces: f64,
    pub composite_error: EstimateWithError,
    pub drift_error: EstimateWithError,
    pub martingale_error: EstimateWithError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRateStudy {
    pub p: Norm,
    pub q: f64,
    pub rows: Vec<DiffusionRow>,
    /// Direct free-knot spline on `X`: log error against log pieces.
    pub direct_fit: RateFit,
    /// Composite `Y^ + M^`: log error against log mean pieces.
    pub composite_fit: RateFit,
}

/// Compares the direct free-knot fit of `X` (`k` pieces, degree 0) with the
/// composite `Y^ + M^` (`k` blocks) on the same paths.
pub fn diffusion_rate_study(
    coeff: &SdeCoefficients,
    k_list: &[usize],
    p: Norm,
    q: f64,
    cfg: &McConfig,
) -> Result<DiffusionRateStudy> {
    cfg.validate()?;
    if k_list.len() < 3 {
        return Err(Error::invalid("a rate study needs at least 3 piece counts"));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("averaging exponent must satisfy q >= 1, got {q}")));
    }
    if let Some(k) = k_list.iter().find(|&&k| k == 0 || cfg.grid_n % k != 0) {
        return Err(Error::invalid(format!("k = {k} must be positive and divide grid_n = {}", cfg.grid_n)));
    }
    let per_rep = run_replicates(cfg, 0xd1f, |_, rng| {
        let paths = simulate_diffusion(coeff, cfg.grid_n, 1.0, rng, Scheme::Euler)?;
        k_list
            .iter()
            .map(|&k| {
                let direct = build_spline(&paths.x, k, 0, p, cfg.tol_rel)?;
                let comp = approximate_diffusion(&paths.x, &paths.w, coeff, k, p, cfg.tol_rel)?;
                Ok([
                    direct.n_pieces() as f64,
                    direct.error(),
                    comp.pieces_used as f64,
                    comp.error_p,
                    comp.components.drift,
                    comp.components.martingale,
                ])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let col = |j: usize, c: usize| -> Vec<f64> { per_rep.iter().map(|r| r[j][c]).collect() };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rows = k_list
        .iter()
        .enumerate()
        .map(|(j, &k)| DiffusionRow {
            k,
            direct_pieces: mean(&col(j, 0)),
            direct_error: EstimateWithError::moment_root(&col(j, 1), q),
            composite_pieces: mean(&col(j, 2)),
            composite_error: EstimateWithError::moment_root(&col(j, 3), q),
            drift_error: EstimateWithError::moment_root(&col(j, 4), q),
            martingale_error: EstimateWithError::moment_root(&col(j, 5), q),
        })
        .collect();
    let xs: Vec<f64> = (0..k_list.len()).map(|j| j as f64).collect();
    let fit_for = |pieces_col: usize, err_col: usize| {
        let errs: Vec<Vec<f64>> = (0..k_list.len()).map(|j| col(j, err_col)).collect();
        let pieces: Vec<Vec<f64>> = (0..k_list.len()).map(|j| col(j, pieces_col)).collect();
        RateFit::from_replicates_with(&xs, &errs, q, cfg.seed, |x, idx| {
            let c = &pieces[x as usize];
            idx.iter().map(|&i| c[i]).sum::<f64>() / idx.len() as f64
        })
    };
    Ok(DiffusionRateStudy { p, q, rows, direct_fit: fit_for(0, 1)?, composite_fit: fit_for(2, 3)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductBoundRow {
    pub k: usize,
    /// `(E ||X - phi*_k(X)||_p^p)^(1/p)` with degree-1 pieces.
    pub mean_error: EstimateWithError,
    /// `eta(p) kappa(2p/(p+2), p) k^(-1/2)`.
    pub bound: f64,
}

/// Mean `L_p` error of the degree-1 free-knot spline on `X` next to the
/// asymptotic bound `eta(p) kappa(2p/(p+2), p) k^(-1/2)`.
pub fn product_bound_study(
    coeff: &SdeCoefficients,
    p: f64,
    k_list: &[usize],
    cfg: &McConfig,
) -> Result<Vec<ProductBoundRow>> {
    let np = Norm::new(p)?;
    if np.is_inf() {
        return Err(Error::invalid("the product bound needs a finite p"));
    }
    let ek = crate::mc::estimate_eta_kappa(p, 2.0 * p / (p + 2.0), p, coeff, cfg)?;
    let per_rep = run_replicates(cfg, 0xb0d, |_, rng| {
        let paths = simulate_diffusion(coeff, cfg.grid_n, 1.0, rng, Scheme::Euler)?;
        k_list
            .iter()
            .map(|&k| Ok(build_spline(&paths.x, k, 1, np, cfg.tol_rel)?.error()))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(k_list
        .iter()
        .enumerate()
        .map(|(j, &k)| ProductBoundRow {
            k,
            mean_error: EstimateWithError::moment_root(&per_rep.iter().map(|r| r[j]).collect::<Vec<_>>(), p),
            bound: ek.eta.mean * ek.kappa.mean / (k as f64).sqrt(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn zero_drift_is_constant() {
        let c = SdeCoefficients::new(|_| 0.0, |_| 1.0, 0.7).unwrap();
        let d = simulate_diffusion(&c, 256, 1.0, &mut RngStream::new(1, 0), Scheme::Euler).unwrap();
        let y = drift_part(&d.x, &c).unwrap();
        let s = build_drift_spline(&d.x, &c, 8).unwrap();
        assert_eq!(spline_error(&y, &s, Norm::INF).unwrap(), 0.0);
        assert!(s.pieces().iter().all(|p| p.coeffs()[0] == 0.7));
    }

    #[test]
    fn unit_drift_error_is_one_over_k() {
        let c = SdeCoefficients::new(|_| 1.0, |_| 1.0, 0.0).unwrap();
        let d = simulate_diffusion(&c, 1024, 1.0, &mut RngStream::new(1, 0), Scheme::Euler).unwrap();
        let y = drift_part(&d.x, &c).unwrap();
        for k in [4, 16, 64] {
            let s = build_drift_spline(&d.x, &c, k).unwrap();
            let e = spline_error(&y, &s, Norm::INF).unwrap();
            assert!((e - 1.0 / k as f64).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn euler_splits_into_drift_and_ito() {
        let c = crate::sim::SdePreset::OuSine.coefficients();
        let d = simulate_diffusion(&c, 512, 1.0, &mut RngStream::new(4, 2), Scheme::Euler).unwrap();
        let y = drift_part(&d.x, &c).unwrap();
        let r = ito_part(&d.x, &d.w, &c).unwrap();
        for i in 0..=512 {
            assert!((d.x.values()[i] - y.values()[i] - r.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_diffusion_gives_zero_martingale() {
        let c = SdeCoefficients::unchecked(|x| -x, |_| 0.0, 1.0);
        let d = simulate_diffusion(&c, 256, 1.0, &mut RngStream::new(2, 0), Scheme::Euler).unwrap();
        let m = build_martingale_spline(&d.x, &d.w, &c, 8, 1e-4).unwrap();
        assert!(m.spline.pieces().iter().all(|p| p.coeffs()[0] == 0.0));
    }

    #[test]
    fn wiener_case_reduces_to_wiener_fit() {
        let c = crate::sim::SdePreset::Wiener.coefficients();
        let d = simulate_diffusion(&c, 1024, 1.0, &mut RngStream::new(3, 1), Scheme::Euler).unwrap();
        let m = build_martingale_spline(&d.x, &d.w, &c, 16, 1e-4).unwrap();
        assert!(m.spline.n_pieces() <= 32);
        for &t in m.wiener.spline.knots() {
            assert!(m.spline.knots().contains(&t));
        }
        for j in 0..=16 {
            assert!(m.spline.knots().contains(&(j as f64 / 16.0)));
        }
        for i in 0..=1024 {
            let t = d.w.time(i);
            assert!((m.spline.eval(t).unwrap() - m.wiener.spline.eval(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn k_must_divide_the_grid() {
        let c = crate::sim::SdePreset::Wiener.coefficients();
        let d = simulate_diffusion(&c, 100, 1.0, &mut RngStream::new(3, 1), Scheme::Euler).unwrap();
        assert!(build_drift_spline(&d.x, &c, 3).is_err());
    }
}
