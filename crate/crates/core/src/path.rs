use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Wiener,
    /// `s`-fold integrated Wiener process.
    IntegratedWiener(usize),
    Bridge,
    Diffusion,
    Synthetic,
}

/// A trajectory sampled on the uniform grid `t0 + i * step`, `i = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    t0: f64,
    step: f64,
    values: Vec<f64>,
    kind: PathKind,
}

impl SampledPath {
    pub fn new(t0: f64, step: f64, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("grid step must be positive, got {step}")));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        if values.is_empty() {
            return Err(Error::invalid("a path needs at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i });
        }
        Ok(Self { t0, step, values, kind })
    }

    /// Samples `f` at `n + 1` equidistant points of `[0, horizon]`.
    pub fn from_fn(n: usize, horizon: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) {
            return Err(Error::invalid("need n >= 1 and a positive horizon"));
        }
        let step = horizon / n as f64;
        let values = (0..=n).map(|i| f(i as f64 * step)).collect();
        Self::new(0.0, step, values, PathKind::Synthetic)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of grid intervals.
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_steps())
    }

    /// Grid index of time `t`, snapped to the nearest grid point.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.step;
        let i = x.round();
        if !(i >= 0.0 && i <= self.n_steps() as f64) || !x.is_finite() {
            return Err(Error::OutOfRange { u: t, v: t, lo: self.t0, hi: self.end() });
        }
        Ok(i as usize)
    }

    /// Whether `t` lies on the grid up to a relative tolerance of the step.
    pub fn is_grid_point(&self, t: f64) -> bool {
        let x = (t - self.t0) / self.step;
        (x - x.round()).abs() <= 1e-6 && x.round() >= 0.0 && x.round() <= self.n_steps() as f64
    }

    /// Snapped index range of `[u, v]`; requires `u < v` inside the domain.
    pub fn index_range(&self, u: f64, v: f64) -> Result<(usize, usize)> {
        if !(u < v) {
            return Err(Error::invalid(format!("need u < v, got [{u}, {v}]")));
        }
        let oob = || Error::OutOfRange { u, v, lo: self.t0, hi: self.end() };
        let slack = 0.5 * self.step;
        if u < self.t0 - slack || v > self.end() + slack {
            return Err(oob());
        }
        let i0 = self.index_of(u).map_err(|_| oob())?;
        let i1 = self.index_of(v).map_err(|_| oob())?;
        if i1 <= i0 {
            return Err(Error::invalid(format!("[{u}, {v}] collapses to a single grid point")));
        }
        Ok((i0, i1))
    }

    pub fn extend_from_slice(&mut self, more: &[f64]) -> Result<()> {
        if let Some(i) = more.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: self.values.len() + i });
        }
        self.values.extend_from_slice(more);
        Ok(())
    }

    pub fn map(&self, kind: PathKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.t0, self.step, self.values.iter().map(|&v| f(v)).collect(), kind)
    }
}
