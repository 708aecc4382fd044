//! Best `L_p` approximation of sampled data by polynomials of degree `<= r`.
//!
//! The continuous norm is discretized on the sample grid: composite trapezoid
//! quadrature of `|f|^p` for finite `p`, the maximum over grid points for
//! `p = inf`. Minimizers are computed per norm:
//!
//! * `p = 2`: weighted least squares in the Legendre basis;
//! * `p = inf`: discrete Remez exchange on the grid points;
//! * `p = 1`: vertex descent for the equivalent linear program;
//! * other `p`: iteratively reweighted least squares started from `p = 2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::Norm;
use crate::path::SampledPath;
use crate::poly::{legendre_series, legendre_values, Polynomial};

pub const MAX_DEGREE: usize = 10;

const REMEZ_MAX_ITER: usize = 100;
const IRLS_MAX_ITER: usize = 2000;
const L1_MAX_ITER: usize = 10_000;
const IRLS_WEIGHT_FLOOR: f64 = 1e-12;
const IRLS_SMOOTHING: f64 = 1e-8;
const IRLS_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub poly: Polynomial,
    /// Achieved discrete `L_p` error of the residual.
    pub delta: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Discrete `L_p[u, v]` norm of the path; `u` and `v` are snapped to the grid.
pub fn lp_norm(path: &SampledPath, u: f64, v: f64, p: Norm) -> Result<f64> {
    let (i0, i1) = path.index_range(u, v)?;
    Ok(slice_norm(&path.values()[i0..=i1], path.step(), p))
}

/// Best polynomial of degree `<= r` on `[u, v]` in the discrete `L_p` norm.
pub fn best_poly(path: &SampledPath, u: f64, v: f64, r: usize, p: Norm) -> Result<FitResult> {
    let (i0, i1) = path.index_range(u, v)?;
    let lo = path.time(i0);
    let hi = path.time(i1);
    let mut fitter = Fitter::new(r, p)?;
    let out = fitter.fit(&path.values()[i0..=i1], path.step());
    let into_result = |f: LocalFit| -> Result<FitResult> {
        Ok(FitResult {
            poly: Polynomial::new(lo, hi, f.coeffs)?,
            delta: f.delta,
            iterations: f.iterations,
            converged: f.converged,
        })
    };
    match out {
        Ok(f) => into_result(f),
        Err(FitError::NotConverged(f)) => Err(Error::NotConverged { best: Box::new(into_result(f)?) }),
        Err(FitError::Other(e)) => Err(e),
    }
}

/// `inf` over polynomials of degree `<= r` of `||f - pi||_{L_p[u, v]}`.
pub fn delta(path: &SampledPath, u: f64, v: f64, r: usize, p: Norm) -> Result<f64> {
    let (i0, i1) = path.index_range(u, v)?;
    Fitter::new(r, p)?.delta(&path.values()[i0..=i1], path.step())
}

/// Discrete norm of a run of samples spaced `step` apart.
pub fn slice_norm(ys: &[f64], step: f64, p: Norm) -> f64 {
    if p.is_inf() {
        return ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    }
    trapezoid_lp(ys.iter().copied(), ys.len(), step, p.value())
}

/// `(int |g|^p)^(1/p)` by the composite trapezoid rule over `n` samples.
pub(crate) fn trapezoid_lp(values: impl Iterator<Item = f64>, n: usize, step: f64, p: f64) -> f64 {
    trapezoid_pow_sum(values, n, step, p).powf(1.0 / p)
}

/// `int |g|^p` by the composite trapezoid rule.
pub(crate) fn trapezoid_pow_sum(values: impl Iterator<Item = f64>, n: usize, step: f64, p: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, v) in values.enumerate() {
        let a = v.abs();
        let term = if p == 2.0 { a * a } else if p == 1.0 { a } else { a.powf(p) };
        acc += if i == 0 || i == n - 1 { 0.5 * term } else { term };
    }
    acc * step
}

/// Fit on a run of samples, coefficients in the Legendre basis of the run's
/// own interval.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFit {
    pub coeffs: Vec<f64>,
    pub delta: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug)]
pub enum FitError {
    NotConverged(LocalFit),
    Other(Error),
}

impl From<FitError> for Error {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NotConverged(f) => Error::NumericFailure(format!(
                "best approximation did not converge after {} iterations (delta {})",
                f.iterations, f.delta
            )),
            FitError::Other(e) => e,
        }
    }
}

/// Reusable solver for a fixed degree and norm.
#[derive(Clone, Debug)]
pub struct Fitter {
    r: usize,
    p: Norm,
    basis: Vec<f64>,
    res: Vec<f64>,
    weights: Vec<f64>,
}

impl Fitter {
    pub fn new(r: usize, p: Norm) -> Result<Self> {
        if r > MAX_DEGREE {
            return Err(Error::invalid(format!("degree {r} exceeds the supported maximum {MAX_DEGREE}")));
        }
        Ok(Self { r, p, basis: vec![0.0; r + 2], res: Vec::new(), weights: Vec::new() })
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn norm(&self) -> Norm {
        self.p
    }

    /// Best approximation error of `ys`.
    pub fn delta(&mut self, ys: &[f64], step: f64) -> Result<f64> {
        if ys.len() <= self.r + 1 {
            return Ok(0.0);
        }
        if self.r == 0 {
            if self.p.is_inf() {
                let (lo, hi) = min_max(ys);
                return Ok(0.5 * (hi - lo));
            }
            if self.p.value() == 2.0 {
                let w = trapezoid_weights(ys.len());
                let wsum: f64 = (ys.len() - 1) as f64;
                let mean = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / wsum;
                return Ok(trapezoid_lp(ys.iter().map(|y| y - mean), ys.len(), step, 2.0));
            }
        }
        match self.fit(ys, step) {
            Ok(f) => Ok(f.delta),
            Err(e) => Err(e.into()),
        }
    }

    pub fn fit(&mut self, ys: &[f64], step: f64) -> std::result::Result<LocalFit, FitError> {
        let n = ys.len();
        if n == 0 {
            return Err(FitError::Other(Error::invalid("cannot fit an empty interval")));
        }
        if n <= self.r + 1 {
            let coeffs = self.interpolate(ys).map_err(FitError::Other)?;
            return Ok(LocalFit { coeffs, delta: 0.0, iterations: 0, converged: true });
        }
        if self.p.is_inf() {
            self.remez(ys)
        } else if self.p.value() == 2.0 {
            let w = trapezoid_weights(n).collect::<Vec<_>>();
            let coeffs = self.weighted_ls(ys, &w).map_err(FitError::Other)?;
            let delta = self.residual_norm(ys, &coeffs, step);
            Ok(LocalFit { coeffs, delta, iterations: 1, converged: true })
        } else if self.p.value() == 1.0 {
            self.l1_simplex(ys, step)
        } else {
            self.irls(ys, step)
        }
    }

    /// Smallest `i` in `start + 1 ..= end` whose run `ys[start..=i]` has error
    /// above `eps`, or `None` when the whole run `ys[start..=end]` stays within.
    ///
    /// Errors are nondecreasing in `i`, so the search gallops outward from
    /// `start + hint` and then bisects.
    pub fn first_exceedance(
        &mut self,
        ys: &[f64],
        step: f64,
        start: usize,
        end: usize,
        eps: f64,
        hint: usize,
    ) -> Result<Option<usize>> {
        debug_assert!(end < ys.len());
        if end <= start + self.r {
            return Ok(None);
        }
        if self.r == 0 && self.p.is_inf() {
            let (mut lo, mut hi) = (ys[start], ys[start]);
            for (i, &y) in ys.iter().enumerate().take(end + 1).skip(start + 1) {
                lo = lo.min(y);
                hi = hi.max(y);
                // same arithmetic as `delta`
                if 0.5 * (hi - lo) > eps {
                    return Ok(Some(i));
                }
            }
            return Ok(None);
        }
        let mut good = start + self.r;
        let mut gap = hint.max(1);
        let bad = loop {
            let i = (good + gap).min(end);
            if self.delta(&ys[start..=i], step)? > eps {
                break i;
            }
            if i == end {
                return Ok(None);
            }
            good = i;
            gap *= 2;
        };
        let mut bad = bad;
        while bad - good > 1 {
            let mid = good + (bad - good) / 2;
            if self.delta(&ys[start..=mid], step)? > eps {
                bad = mid;
            } else {
                good = mid;
            }
        }
        Ok(Some(bad))
    }

    fn interpolate(&mut self, ys: &[f64]) -> Result<Vec<f64>> {
        let n = ys.len();
        let mut coeffs = vec![0.0; self.r + 1];
        if n == 1 {
            coeffs[0] = ys[0];
            return Ok(coeffs);
        }
        let m = (n - 1) as f64;
        let mut a = DMatrix::zeros(n, n);
        let mut row = vec![0.0; n];
        for (i, _) in ys.iter().enumerate() {
            legendre_values(-1.0 + 2.0 * i as f64 / m, &mut row);
            for j in 0..n {
                a[(i, j)] = row[j];
            }
        }
        let sol = a
            .lu()
            .solve(&DVector::from_column_slice(ys))
            .ok_or_else(|| Error::NumericFailure("singular interpolation system".into()))?;
        coeffs[..n].copy_from_slice(sol.as_slice());
        Ok(coeffs)
    }

    /// Minimizes `sum_i w_i (y_i - p(x_i))^2`.
    fn weighted_ls(&mut self, ys: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let k = self.r + 1;
        let m = (ys.len() - 1) as f64;
        if k == 1 {
            let (num, den) = ys.iter().zip(w).fold((0.0, 0.0), |(a, b), (y, w)| (a + w * y, b + w));
            return if den > 0.0 {
                Ok(vec![num / den])
            } else {
                Err(Error::NumericFailure("all least-squares weights vanished".into()))
            };
        }
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let basis = &mut self.basis[..k];
        for (i, (&y, &wi)) in ys.iter().zip(w).enumerate() {
            legendre_values(-1.0 + 2.0 * i as f64 / m, basis);
            for a in 0..k {
                let wa = wi * basis[a];
                rhs[a] += wa * y;
                for b in 0..=a {
                    gram[(a, b)] += wa * basis[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericFailure("least-squares Gram matrix is singular".into()))?;
        let mut c = chol.solve(&rhs);
        // one step of iterative refinement
        let corr = chol.solve(&(&rhs - &gram * &c));
        c += corr;
        Ok(c.as_slice().to_vec())
    }

    fn fill_residuals(&mut self, ys: &[f64], coeffs: &[f64]) {
        let m = (ys.len() - 1) as f64;
        self.res.clear();
        self.res.extend(
            ys.iter()
                .enumerate()
                .map(|(i, y)| y - legendre_series(coeffs, -1.0 + 2.0 * i as f64 / m)),
        );
    }

    fn residual_norm(&mut self, ys: &[f64], coeffs: &[f64], step: f64) -> f64 {
        self.fill_residuals(ys, coeffs);
        slice_norm(&self.res, step, self.p)
    }

    /// Discrete weighted `L_1` approximation by edge-following descent over
    /// interpolating vertices, started from the least-squares fit.
    fn l1_simplex(&mut self, ys: &[f64], step: f64) -> std::result::Result<LocalFit, FitError> {
        let n = ys.len();
        let k = self.r + 1;
        let m = (n - 1) as f64;
        let w: Vec<f64> = trapezoid_weights(n).collect();
        let start = self.weighted_ls(ys, &w).map_err(FitError::Other)?;
        self.fill_residuals(ys, &start);
        let mut phi = DMatrix::<f64>::zeros(n, k);
        let mut row = vec![0.0; k];
        for i in 0..n {
            legendre_values(-1.0 + 2.0 * i as f64 / m, &mut row);
            for j in 0..k {
                phi[(i, j)] = row[j];
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.res[a].abs().total_cmp(&self.res[b].abs()));
        let mut basis: Vec<usize> = order[..k].to_vec();
        let scale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs())).max(f64::MIN_POSITIVE);
        let zero = 1e-13 * scale;
        let wsum: f64 = w.iter().sum();
        let mut in_basis = vec![false; n];
        let mut breaks: Vec<(f64, usize)> = Vec::new();
        let mut best: Option<LocalFit> = None;
        for iter in 1..=L1_MAX_ITER {
            let v = DMatrix::from_fn(k, k, |a, b| phi[(basis[a], b)]);
            let vinv = v
                .try_inverse()
                .ok_or_else(|| FitError::Other(Error::NumericFailure("singular interpolation basis".into())))?;
            let yb = DVector::from_iterator(k, basis.iter().map(|&i| ys[i]));
            let coeffs = (&vinv * yb).as_slice().to_vec();
            self.fill_residuals(ys, &coeffs);
            in_basis.iter_mut().for_each(|b| *b = false);
            for &i in &basis {
                self.res[i] = 0.0;
                in_basis[i] = true;
            }
            let delta = trapezoid_lp(self.res.iter().copied(), n, step, 1.0);
            if best.as_ref().is_none_or(|b| delta < b.delta) {
                best = Some(LocalFit { coeffs, delta, iterations: iter, converged: false });
            }
            let g = &phi * &vinv;
            // Releasing basis point `j` in direction `s` moves residual `i` by
            // `-s g[i, j]` per unit step.
            let mut edge = (0usize, 0.0f64, 0.0f64);
            for j in 0..k {
                for s in [1.0, -1.0] {
                    let mut slope = w[basis[j]];
                    for i in (0..n).filter(|&i| !in_basis[i]) {
                        let d = -s * g[(i, j)];
                        let r = self.res[i];
                        slope += if r.abs() > zero { w[i] * d * r.signum() } else { w[i] * d.abs() };
                    }
                    if slope < edge.2 {
                        edge = (j, s, slope);
                    }
                }
            }
            let (j, s, mut slope) = edge;
            if slope >= -1e-12 * wsum {
                let mut fit = best.expect("at least one vertex");
                fit.iterations = iter;
                fit.converged = true;
                return Ok(fit);
            }
            breaks.clear();
            for i in (0..n).filter(|&i| !in_basis[i]) {
                let d = -s * g[(i, j)];
                let r = self.res[i];
                if r.abs() > zero && r * d < 0.0 {
                    breaks.push((-r / d, i));
                }
            }
            breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut enter = None;
            for &(_, i) in &breaks {
                slope += 2.0 * w[i] * g[(i, j)].abs();
                if slope >= 0.0 {
                    enter = Some(i);
                    break;
                }
            }
            match enter.or(breaks.last().map(|b| b.1)) {
                Some(i) => basis[j] = i,
                None => break,
            }
        }
        let mut fit = best.expect("at least one vertex");
        fit.iterations = L1_MAX_ITER;
        Err(FitError::NotConverged(fit))
    }

    /// Discrete minimax approximation by multiple-exchange Remez iteration.
    fn remez(&mut self, ys: &[f64]) -> std::result::Result<LocalFit, FitError> {
        let n = ys.len();
        let k = self.r + 1;
        let refs_len = k + 1;
        let m = (n - 1) as f64;
        let scale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs())).max(f64::MIN_POSITIVE);
        let abs_tol = 64.0 * f64::EPSILON * scale;

        // Chebyshev-like initial reference.
        let mut refs: Vec<usize> = (0..refs_len)
            .map(|j| {
                let x = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (refs_len - 1) as f64).cos());
                (x * m).round() as usize
            })
            .collect();
        for j in 1..refs_len {
            if refs[j] <= refs[j - 1] {
                refs[j] = refs[j - 1] + 1;
            }
        }
        for j in (0..refs_len - 1).rev() {
            if refs[j + 1] > n - 1 - (refs_len - 1 - (j + 1)) {
                refs[j + 1] = n - 1 - (refs_len - 1 - (j + 1));
            }
            if refs[j] >= refs[j + 1] {
                refs[j] = refs[j + 1] - 1;
            }
        }

        let mut best: Option<LocalFit> = None;
        let mut row = vec![0.0; k];
        for iter in 1..=REMEZ_MAX_ITER {
            // Solve p(x_j) + (-1)^j h = y_j on the reference.
            let mut a = DMatrix::<f64>::zeros(refs_len, refs_len);
            let mut b = DVector::<f64>::zeros(refs_len);
            for (j, &ix) in refs.iter().enumerate() {
                legendre_values(-1.0 + 2.0 * ix as f64 / m, &mut row);
                for c in 0..k {
                    a[(j, c)] = row[c];
                }
                a[(j, k)] = if j % 2 == 0 { 1.0 } else { -1.0 };
                b[j] = ys[ix];
            }
            let sol = match a.lu().solve(&b) {
                Some(s) => s,
                None => {
                    return Err(FitError::Other(Error::NumericFailure(
                        "singular Remez reference system".into(),
                    )))
                }
            };
            let coeffs = sol.as_slice()[..k].to_vec();
            let level = sol[k].abs();
            self.fill_residuals(ys, &coeffs);
            let (gmax_i, gmax) = self
                .res
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, r)| if r.abs() > bv { (i, r.abs()) } else { (bi, bv) });
            let fit = LocalFit { coeffs, delta: gmax, iterations: iter, converged: false };
            if best.as_ref().map_or(true, |b| fit.delta < b.delta) {
                best = Some(fit.clone());
            }
            if gmax <= level * (1.0 + 1e-12) + abs_tol {
                return Ok(LocalFit { converged: true, ..fit });
            }
            match exchange(&self.res, level, gmax_i, refs_len) {
                Some(new_refs) if new_refs != refs => refs = new_refs,
                _ => {
                    let old = refs.clone();
                    single_exchange(&mut refs, &self.res, gmax_i);
                    if refs == old {
                        break;
                    }
                }
            }
        }
        Err(FitError::NotConverged(best.expect("at least one iteration")))
    }

    fn irls(&mut self, ys: &[f64], step: f64) -> std::result::Result<LocalFit, FitError> {
        let p = self.p.value();
        let n = ys.len();
        let w0: Vec<f64> = trapezoid_weights(n).collect();
        let mut coeffs = self.weighted_ls(ys, &w0).map_err(FitError::Other)?;
        self.fill_residuals(ys, &coeffs);
        let scale = self.res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        let yscale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs()));
        if scale <= 64.0 * f64::EPSILON * yscale {
            let delta = trapezoid_lp(self.res.iter().copied(), n, step, p);
            return Ok(LocalFit { coeffs, delta, iterations: 0, converged: true });
        }
        // For p < 2 the smoothing starts coarse and shrinks each time the
        // iteration settles, down to the final level.
        let final_smooth = IRLS_SMOOTHING * scale;
        let mut smooth = if p < 2.0 { 1e-2 * scale } else { final_smooth };
        let floor = IRLS_WEIGHT_FLOOR * scale;
        let objective = |res: &[f64]| trapezoid_pow_sum(res.iter().copied(), n, step, p);
        let mut obj = objective(&self.res);
        let mut best = (coeffs.clone(), obj);
        for iter in 1..=IRLS_MAX_ITER {
            self.weights.clear();
            self.weights.extend(self.res.iter().zip(&w0).map(|(r, w)| {
                let g = if p < 2.0 {
                    (r * r + smooth * smooth).powf(0.5 * (p - 2.0))
                } else {
                    r.abs().max(floor).powf(p - 2.0)
                };
                w * g
            }));
            let weights = std::mem::take(&mut self.weights);
            let target = self.weighted_ls(ys, &weights).map_err(FitError::Other)?;
            self.weights = weights;
            if p > 2.0 {
                let damp = 1.0 / (p - 1.0);
                for (c, t) in coeffs.iter_mut().zip(&target) {
                    *c += damp * (t - *c);
                }
            } else {
                coeffs = target;
            }
            self.fill_residuals(ys, &coeffs);
            let next = objective(&self.res);
            if next < best.1 {
                best = (coeffs.clone(), next);
            }
            if next == 0.0 {
                return Ok(LocalFit { coeffs: best.0, delta: 0.0, iterations: iter, converged: true });
            }
            if (obj - next).abs() <= IRLS_REL_TOL * obj && smooth > final_smooth {
                smooth = (0.1 * smooth).max(final_smooth);
            } else if (obj - next).abs() <= IRLS_REL_TOL * obj {
                return Ok(LocalFit {
                    coeffs: best.0,
                    delta: best.1.powf(1.0 / p),
                    iterations: iter,
                    converged: true,
                });
            }
            obj = next;
        }
        Err(FitError::NotConverged(LocalFit {
            coeffs: best.0,
            delta: best.1.powf(1.0 / p),
            iterations: IRLS_MAX_ITER,
            converged: false,
        }))
    }
}

/// Trapezoid weights in units of the grid step.
fn trapezoid_weights(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i == 0 || i + 1 == n { 0.5 } else { 1.0 })
}

fn min_max(ys: &[f64]) -> (f64, f64) {
    ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)))
}

/// Multiple exchange: keep the extreme point of every sign run whose error
/// reaches the current level, then cut an alternating window of `len` points
/// around the global maximum.
fn exchange(res: &[f64], level: f64, gmax_i: usize, len: usize) -> Option<Vec<usize>> {
    let cutoff = level * (1.0 - 1e-12);
    let mut picks: Vec<usize> = Vec::new();
    let mut run_best: Option<usize> = None;
    let mut run_sign = 0.0;
    let flush = |best: Option<usize>, picks: &mut Vec<usize>| {
        if let Some(b) = best {
            if res[b].abs() >= cutoff {
                match picks.last() {
                    Some(&last) if res[last].signum() == res[b].signum() => {
                        if res[b].abs() > res[last].abs() {
                            *picks.last_mut().unwrap() = b;
                        }
                    }
                    _ => picks.push(b),
                }
            }
        }
    };
    for (i, &r) in res.iter().enumerate() {
        let s = if r > 0.0 { 1.0 } else if r < 0.0 { -1.0 } else { run_sign };
        if s != run_sign {
            flush(run_best, &mut picks);
            run_best = None;
            run_sign = s;
        }
        if run_best.map_or(true, |b| r.abs() > res[b].abs()) {
            run_best = Some(i);
        }
    }
    flush(run_best, &mut picks);
    if picks.len() < len || !picks.contains(&gmax_i) {
        return None;
    }
    while picks.len() > len {
        let first = picks[0];
        let last = *picks.last().unwrap();
        if first == gmax_i {
            picks.pop();
        } else if last == gmax_i || res[first].abs() < res[last].abs() {
            picks.remove(0);
        } else {
            picks.pop();
        }
    }
    Some(picks)
}

/// Classic single-point exchange keeping sign alternation.
fn single_exchange(refs: &mut [usize], res: &[f64], new: usize) {
    if refs.contains(&new) {
        return;
    }
    let sign = |i: usize| res[i].signum();
    let pos = refs.partition_point(|&x| x < new);
    let len = refs.len();
    if pos == 0 {
        if sign(refs[0]) == sign(new) {
            refs[0] = new;
        } else {
            refs.rotate_right(1);
            refs[0] = new;
        }
    } else if pos == len {
        if sign(refs[len - 1]) == sign(new) {
            refs[len - 1] = new;
        } else {
            refs.rotate_left(1);
            refs[len - 1] = new;
        }
    } else if sign(refs[pos - 1]) == sign(new) {
        refs[pos - 1] = new;
    } else {
        refs[pos] = new;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::SampledPath;

    fn grid(n: usize, f: impl Fn(f64) -> f64) -> SampledPath {
        SampledPath::from_fn(n, 1.0, f).unwrap()
    }

    #[test]
    fn lp_norm_examples() {
        let c = grid(100, |_| -2.5);
        assert!((lp_norm(&c, 0.0, 1.0, Norm::L2).unwrap() - 2.5).abs() < 1e-14);
        let lin = grid(1000, |t| t);
        let l2 = lp_norm(&lin, 0.0, 1.0, Norm::L2).unwrap();
        assert!((l2 - 3f64.powf(-0.5)).abs() <= 1e-6, "{l2}");
        assert_eq!(lp_norm(&lin, 0.0, 1.0, Norm::INF).unwrap(), 1.0);
        assert!(matches!(lp_norm(&lin, 0.0, 2.0, Norm::L2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn exact_polynomials_have_zero_error() {
        let f = grid(200, |t| 3.0 * t * t - 1.0);
        for p in [Norm::L1, Norm::L2, Norm::new(3.0).unwrap(), Norm::INF] {
            let fit = best_poly(&f, 0.0, 1.0, 2, p).unwrap();
            assert!(fit.delta <= 1e-10, "p={p} delta={}", fit.delta);
            for (i, y) in f.values().iter().enumerate() {
                assert!((fit.poly.eval(f.time(i)) - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn minimax_line_for_parabola() {
        let f = grid(1000, |t| t * t);
        let fit = best_poly(&f, 0.0, 1.0, 1, Norm::INF).unwrap();
        assert!(fit.converged);
        assert!((fit.delta - 0.125).abs() < 1e-3, "{}", fit.delta);
        for t in [0.0, 0.3, 0.5, 1.0] {
            assert!((fit.poly.eval(t) - (t - 0.125)).abs() < 1e-3);
        }
    }

    #[test]
    fn minimax_parabola_brute_force() {
        // brute force over a coefficient grid for a + b t
        let f = grid(200, |t| t * t);
        let fit = best_poly(&f, 0.0, 1.0, 1, Norm::INF).unwrap();
        let mut brute = f64::INFINITY;
        for ia in 0..=200 {
            for ib in 0..=200 {
                let a = -0.3 + 0.002 * ia as f64;
                let b = 0.8 + 0.002 * ib as f64;
                let e = f
                    .values()
                    .iter()
                    .enumerate()
                    .fold(0.0f64, |m, (i, y)| m.max((y - a - b * f.time(i)).abs()));
                brute = brute.min(e);
            }
        }
        assert!(fit.delta <= brute + 1e-12);
        assert!(brute - fit.delta < 2e-3);
    }

    #[test]
    fn l2_constant_fit_is_mean() {
        let f = grid(1000, |t| t);
        let fit = best_poly(&f, 0.0, 1.0, 0, Norm::L2).unwrap();
        assert!((fit.poly.coeffs()[0] - 0.5).abs() < 1e-12);
        assert!((fit.delta - 12f64.powf(-0.5)).abs() < 1e-6);
        // generic path agrees with the r = 0 shortcut
        let d = delta(&f, 0.0, 1.0, 0, Norm::L2).unwrap();
        assert!((d - fit.delta).abs() < 1e-13);
    }

    #[test]
    fn sup_constant_is_half_oscillation() {
        let f = grid(1000, |t| t);
        assert_eq!(delta(&f, 0.0, 1.0, 0, Norm::INF).unwrap(), 0.5);
        let fit = best_poly(&f, 0.0, 1.0, 0, Norm::INF).unwrap();
        assert!((fit.delta - 0.5).abs() < 1e-14);
    }

    #[test]
    fn short_pieces_interpolate() {
        let f = grid(10, |t| (5.0 * t).sin());
        let fit = best_poly(&f, 0.0, 0.2, 2, Norm::INF).unwrap();
        assert_eq!(fit.delta, 0.0);
        for i in 0..=2 {
            assert!((fit.poly.eval(f.time(i)) - f.values()[i]).abs() < 1e-13);
        }
        assert_eq!(delta(&f, 0.0, 0.1, 3, Norm::L2).unwrap(), 0.0);
    }

    #[test]
    fn degree_cap() {
        let f = grid(100, |t| t);
        assert!(best_poly(&f, 0.0, 1.0, 11, Norm::L2).is_err());
    }

    #[test]
    fn first_exceedance_matches_linear_scan() {
        let f = grid(500, |t| (13.0 * t).sin() + 0.3 * (41.0 * t).cos());
        for (r, p) in [(0, Norm::INF), (1, Norm::INF), (2, Norm::L2), (1, Norm::new(1.5).unwrap())] {
            let mut fitter = Fitter::new(r, p).unwrap();
            for &eps in &[0.01, 0.05, 0.2] {
                let got = fitter.first_exceedance(f.values(), f.step(), 37, 500, eps, 3).unwrap();
                let mut want = None;
                for i in 38..=500 {
                    if fitter.delta(&f.values()[37..=i], f.step()).unwrap() > eps {
                        want = Some(i);
                        break;
                    }
                }
                assert_eq!(got, want, "r={r} p={p} eps={eps}");
            }
        }
    }
}
