//! Stopping times, the threshold `gamma_k` and the free-knot spline built from
//! them.
//!
//! For a threshold `eps` the stopping times are `tau_0 = 0` and
//! `tau_j = inf { t > tau_{j-1} : delta_[tau_{j-1}, t](f) > eps }`, resolved to
//! the first grid point where the best approximation error exceeds `eps`.
//! `gamma_k` is the smallest threshold whose first `k` intervals cover `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{Fitter, FitError, LocalFit};
use crate::norm::Norm;
use crate::path::SampledPath;
use crate::poly::Polynomial;
use crate::spline::{combine_piece_errors, Spline};

pub const DEFAULT_TOL_REL: f64 = 1e-4;

/// Degree, smoothness, norm and averaging exponent of an approximation task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub r: usize,
    pub s: usize,
    pub p: Norm,
    pub q: f64,
    pub k: usize,
}

impl ApproxParams {
    pub fn new(r: usize, s: usize, p: Norm, q: f64, k: usize) -> Result<Self> {
        let out = Self { r, s, p, q, k };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) {
            return Err(Error::invalid(format!("averaging exponent must satisfy q >= 1, got {}", self.q)));
        }
        if self.k == 0 {
            return Err(Error::invalid("need k >= 1 pieces"));
        }
        if self.r < self.s {
            return Err(Error::invalid(format!(
                "degree r = {} must be at least the integration order s = {}",
                self.r, self.s
            )));
        }
        if self.r > crate::fit::MAX_DEGREE {
            return Err(Error::invalid(format!("degree r = {} exceeds {}", self.r, crate::fit::MAX_DEGREE)));
        }
        Ok(())
    }

    /// `beta = s + 1/2 + 1/p`.
    pub fn beta(&self) -> f64 {
        beta(self.s, self.p)
    }
}

pub fn beta(s: usize, p: Norm) -> f64 {
    s as f64 + 0.5 + p.recip()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotSchedule {
    pub epsilon: f64,
    /// `tau_0 = t0, tau_1, ...` as grid times.
    pub taus: Vec<f64>,
    pub tau_indices: Vec<usize>,
    /// The horizon was reached before `max_count` stopping times were found.
    pub exhausted: bool,
}

impl KnotSchedule {
    /// Number of stopping times found, excluding `tau_0`.
    pub fn count(&self) -> usize {
        self.taus.len() - 1
    }

    /// Spacings `tau_j - tau_{j-1}`.
    pub fn spacings(&self) -> Vec<f64> {
        self.taus.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Stopping times of `path` at threshold `epsilon`, at most `max_count` of them,
/// searched up to `stop_at`.
pub fn stopping_times(
    path: &SampledPath,
    epsilon: f64,
    r: usize,
    p: Norm,
    max_count: usize,
    stop_at: f64,
) -> Result<KnotSchedule> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {epsilon}")));
    }
    let end = path.index_of(stop_at.min(path.end()))?;
    let mut fitter = Fitter::new(r, p)?;
    let idx = scan(&mut fitter, path, epsilon, 0, end, max_count)?;
    let exhausted = idx.len() <= max_count;
    let idx = if exhausted { idx } else { idx[..=max_count].to_vec() };
    Ok(KnotSchedule {
        epsilon,
        taus: idx.iter().map(|&i| path.time(i)).collect(),
        tau_indices: idx,
        exhausted,
    })
}

/// Stopping-time indices starting at `start`, searched up to grid index `end`.
/// Returns `tau_0 = start` followed by at most `max_count` further indices.
/// When fewer than `max_count` were found the result has length `<= max_count`.
fn scan(
    fitter: &mut Fitter,
    path: &SampledPath,
    eps: f64,
    start: usize,
    end: usize,
    max_count: usize,
) -> Result<Vec<usize>> {
    let ys = path.values();
    let mut out = vec![start];
    let mut cur = start;
    let mut hint = ((end - start) / 16).max(1);
    while out.len() <= max_count {
        match fitter.first_exceedance(ys, path.step(), cur, end, eps, hint)? {
            Some(i) => {
                hint = ((i - cur) / 2).max(1);
                out.push(i);
                cur = i;
            }
            None => break,
        }
    }
    Ok(out)
}

/// Whether `tau_k >= 1` at threshold `eps`, i.e. fewer than `k` stopping
/// times lie strictly before grid index `n1`.
fn covers(fitter: &mut Fitter, path: &SampledPath, eps: f64, k: usize, n1: usize) -> Result<bool> {
    let idx = scan(fitter, path, eps, 0, n1, k)?;
    Ok(idx.len() <= k || idx[k] >= n1)
}

/// Bisection bracket of `gamma_k`: `hi` covers `[0, 1]` with `k` pieces,
/// `lo` does not (or is zero).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaBracket {
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

impl GammaBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Errors below this multiple of the data scale count as exact.
fn zero_level(ys: &[f64]) -> f64 {
    64.0 * f64::EPSILON * ys.iter().fold(0.0f64, |m, y| m.max(y.abs()))
}

pub fn gamma_bracket(path: &SampledPath, k: usize, r: usize, p: Norm, tol_rel: f64) -> Result<GammaBracket> {
    if k == 0 {
        return Err(Error::invalid("need k >= 1"));
    }
    if !(tol_rel > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol_rel}")));
    }
    let n1 = unit_index(path)?;
    let mut fitter = Fitter::new(r, p)?;
    let ys = &path.values()[..=n1];
    let top = fitter.delta(ys, path.step())?;
    if top <= zero_level(ys) {
        return Ok(GammaBracket { lo: 0.0, hi: 0.0, evaluations: 0 });
    }
    let (mut lo, mut hi) = (0.0, top);
    let mut evaluations = 0;
    while hi - lo > tol_rel * hi {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if covers(&mut fitter, path, mid, k, n1)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GammaBracket { lo, hi, evaluations })
}

/// `gamma_k(f) = inf { eps > 0 : tau_{k, eps}(f) >= 1 }` to relative
/// tolerance `tol_rel` (bracket midpoint).
pub fn gamma_k(path: &SampledPath, k: usize, r: usize, p: Norm, tol_rel: f64) -> Result<f64> {
    Ok(gamma_bracket(path, k, r, p, tol_rel)?.midpoint())
}

fn unit_index(path: &SampledPath) -> Result<usize> {
    if path.t0() != 0.0 || path.end() < 1.0 - 0.5 * path.step() {
        return Err(Error::invalid(format!(
            "path must cover [0, 1], it covers [{}, {}]",
            path.t0(),
            path.end()
        )));
    }
    path.index_of(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeKnotSpline {
    pub spline: Spline,
    /// Reported threshold (bracket midpoint).
    pub gamma: f64,
    /// Threshold whose stopping times produced the knots.
    pub threshold: f64,
    pub schedule: KnotSchedule,
    /// Discrete `L_p` error of each piece on its closed grid interval.
    pub piece_errors: Vec<f64>,
    /// The last piece ends at 1 because the path was cut there, not at a
    /// stopping time.
    pub clipped_last: bool,
    pub degree: usize,
    pub norm: Norm,
}

impl FreeKnotSpline {
    /// Global discrete `L_p` error of the spline.
    pub fn error(&self) -> f64 {
        combine_piece_errors(&self.piece_errors, self.norm)
    }

    pub fn n_pieces(&self) -> usize {
        self.spline.n_pieces()
    }
}

/// The free-knot spline with at most `k` pieces whose knots are the stopping
/// times at threshold `gamma_k`.
pub fn build_spline(path: &SampledPath, k: usize, r: usize, p: Norm, tol_rel: f64) -> Result<FreeKnotSpline> {
    let bracket = gamma_bracket(path, k, r, p, tol_rel)?;
    let n1 = unit_index(path)?;
    let mut fitter = Fitter::new(r, p)?;
    let idx = if bracket.hi == 0.0 {
        vec![0]
    } else {
        scan(&mut fitter, path, bracket.hi, 0, n1, k)?
    };
    let mut knots: Vec<usize> = idx.iter().copied().take_while(|&i| i < n1).take(k).collect();
    let clipped_last = !(idx.len() > knots.len() && idx[knots.len()] == n1);
    knots.push(n1);
    let schedule = KnotSchedule {
        epsilon: bracket.hi,
        taus: idx.iter().map(|&i| path.time(i)).collect(),
        exhausted: idx.len() <= k,
        tau_indices: idx,
    };
    let (spline, piece_errors) = fit_pieces(&mut fitter, path, &knots)?;
    Ok(FreeKnotSpline {
        spline,
        gamma: bracket.midpoint(),
        threshold: bracket.hi,
        schedule,
        piece_errors,
        clipped_last,
        degree: r,
        norm: p,
    })
}

/// Variable-knot spline: stopping times at threshold `epsilon` until `[0, 1]`
/// is covered, the last knot clipped to 1.
pub fn build_spline_eps(path: &SampledPath, epsilon: f64, r: usize, p: Norm) -> Result<FreeKnotSpline> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {epsilon}")));
    }
    let n1 = unit_index(path)?;
    let mut fitter = Fitter::new(r, p)?;
    let idx = scan(&mut fitter, path, epsilon, 0, n1, usize::MAX - 1)?;
    let mut knots: Vec<usize> = idx.iter().copied().filter(|&i| i < n1).collect();
    let clipped_last = idx.last() != Some(&n1);
    knots.push(n1);
    let schedule = KnotSchedule {
        epsilon,
        taus: idx.iter().map(|&i| path.time(i)).collect(),
        tau_indices: idx,
        exhausted: true,
    };
    let (spline, piece_errors) = fit_pieces(&mut fitter, path, &knots)?;
    Ok(FreeKnotSpline {
        spline,
        gamma: epsilon,
        threshold: epsilon,
        schedule,
        piece_errors,
        clipped_last,
        degree: r,
        norm: p,
    })
}

/// Best polynomial on each closed grid interval between consecutive knot indices.
pub(crate) fn fit_pieces(fitter: &mut Fitter, path: &SampledPath, knots: &[usize]) -> Result<(Spline, Vec<f64>)> {
    let mut pieces = Vec::with_capacity(knots.len() - 1);
    let mut errors = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        let (lo, hi) = (path.time(w[0]), path.time(w[1]));
        let fit: LocalFit = match fitter.fit(&path.values()[w[0]..=w[1]], path.step()) {
            Ok(f) => f,
            Err(FitError::NotConverged(f)) => {
                return Err(Error::NotConverged {
                    best: Box::new(crate::fit::FitResult {
                        poly: Polynomial::new(lo, hi, f.coeffs)?,
                        delta: f.delta,
                        iterations: f.iterations,
                        converged: false,
                    }),
                })
            }
            Err(FitError::Other(e)) => return Err(e),
        };
        errors.push(fit.delta);
        pieces.push(Polynomial::new(lo, hi, fit.coeffs)?);
    }
    let knot_times = knots.iter().map(|&i| path.time(i)).collect();
    Ok((Spline::new(knot_times, pieces)?, errors))
}
