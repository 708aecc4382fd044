//! Path simulation: Wiener process, `s`-fold integrated Wiener process,
//! Brownian bridge and scalar diffusions.
//!
//! The integrated Wiener process is propagated exactly. Over a step `h` the
//! levels `(W, W^(1), ..., W^(s))` advance by their Taylor part plus a fresh
//! centred Gaussian vector with covariance
//! `C[a][b] = h^(a+b+1) / (a! b! (a+b+1))`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::path::{PathKind, SampledPath};
use crate::rng::RngStream;

/// Largest supported integration order.
pub const MAX_ORDER: usize = 8;

pub fn simulate_wiener(n: usize, horizon: f64, rng: &mut RngStream) -> Result<SampledPath> {
    let mut sim = simulate_integrated_wiener(0, n, horizon, rng)?;
    Ok(sim.levels.pop().expect("one level"))
}

/// Values `(W(z), W^(1)(z), ..., W^(s)(z))` at time `z`; together they
/// determine the law of the continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct IwpState {
    pub z: f64,
    pub levels: Vec<f64>,
}

impl IwpState {
    pub fn origin(s: usize) -> Self {
        Self { z: 0.0, levels: vec![0.0; s + 1] }
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }
}

#[derive(Clone, Debug)]
pub struct IwpPaths {
    /// `levels[a]` holds `W^(a)`.
    pub levels: Vec<SampledPath>,
    pub state: IwpState,
}

impl IwpPaths {
    /// The top level `W^(s)`.
    pub fn top(&self) -> &SampledPath {
        self.levels.last().expect("at least one level")
    }

    /// Continue all levels by `extra_n` steps of the same size.
    pub fn extend(&mut self, extra_n: usize, rng: &mut RngStream) -> Result<()> {
        let step = self.levels[0].step();
        let ext = extend_path(&self.state, self.state.order(), extra_n, extra_n as f64 * step, rng)?;
        for (path, more) in self.levels.iter_mut().zip(&ext.levels) {
            path.extend_from_slice(more)?;
        }
        self.state = ext.state;
        Ok(())
    }
}

/// Appended samples (times `z + h, ..., z + extra_n h`) and the new state.
#[derive(Clone, Debug)]
pub struct IwpExtension {
    pub levels: Vec<Vec<f64>>,
    pub step: f64,
    pub state: IwpState,
}

/// One exact propagation step of `(W, ..., W^(s))` for a fixed step size.
#[derive(Clone, Debug)]
pub struct IwpStepper {
    s: usize,
    h: f64,
    /// `h^i / i!`
    taylor: Vec<f64>,
    /// Lower-triangular square-root factor of the step covariance.
    factor: Vec<f64>,
    noise: Vec<f64>,
}

impl IwpStepper {
    pub fn new(s: usize, h: f64) -> Result<Self> {
        if s > MAX_ORDER {
            return Err(Error::invalid(format!("integration order {s} exceeds {MAX_ORDER}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {h}")));
        }
        let m = s + 1;
        let fact: Vec<f64> = (0..m).scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        }).collect();
        // C = D K D with D = diag(h^(a + 1/2)); K has no h-dependence.
        let k = DMatrix::from_fn(m, m, |a, b| 1.0 / (fact[a] * fact[b] * (a + b + 1) as f64));
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::NumericFailure("step covariance is not positive definite".into()))?;
        let lk = chol.l();
        let d: Vec<f64> = (0..m).map(|a| h.powf(a as f64 + 0.5)).collect();
        let mut factor = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..=a {
                factor[a * m + b] = d[a] * lk[(a, b)];
            }
        }
        if factor.iter().any(|v| !v.is_finite()) || (0..m).any(|a| !(factor[a * m + a] > 0.0)) {
            return Err(Error::NumericFailure(format!(
                "degenerate covariance factor for step {h} and order {s}"
            )));
        }
        let taylor = (0..m).map(|i| h.powi(i as i32) / fact[i]).collect();
        Ok(Self { s, h, taylor, factor, noise: vec![0.0; m] })
    }

    pub fn order(&self) -> usize {
        self.s
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// The step covariance `C` (row-major).
    pub fn covariance(&self) -> Vec<f64> {
        let m = self.s + 1;
        let fact = |i: usize| (1..=i).map(|x| x as f64).product::<f64>();
        let mut c = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                c[a * m + b] =
                    self.h.powi((a + b + 1) as i32) / (fact(a) * fact(b) * (a + b + 1) as f64);
            }
        }
        c
    }

    /// Row-major lower-triangular factor `L` with `L L^T = C`.
    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    /// Advance `levels` by one step in place. Draws `s + 1` normals.
    pub fn advance(&mut self, levels: &mut [f64], rng: &mut RngStream) {
        let m = self.s + 1;
        rng.fill_normal(&mut self.noise);
        // Highest level first so lower levels are still at time z.
        for a in (0..m).rev() {
            let mut det = 0.0;
            for i in 0..=a {
                det += self.taylor[i] * levels[a - i];
            }
            let row = &self.factor[a * m..a * m + a + 1];
            let fresh: f64 = row.iter().zip(&self.noise).map(|(l, z)| l * z).sum();
            levels[a] = det + fresh;
        }
    }
}

/// Simulates `W^(0), ..., W^(s)` on `n` steps of `[0, horizon]`.
pub fn simulate_integrated_wiener(
    s: usize,
    n: usize,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<IwpPaths> {
    if n == 0 || !(horizon > 0.0) {
        return Err(Error::invalid(format!("need n >= 1 and T > 0, got n={n}, T={horizon}")));
    }
    let state = IwpState::origin(s);
    let ext = extend_path(&state, s, n, horizon, rng)?;
    let step = ext.step;
    let kind = |a: usize| if a == 0 { PathKind::Wiener } else { PathKind::IntegratedWiener(a) };
    let levels = ext
        .levels
        .into_iter()
        .enumerate()
        .map(|(a, tail)| {
            let mut v = Vec::with_capacity(n + 1);
            v.push(0.0);
            v.extend(tail);
            SampledPath::new(0.0, step, v, kind(a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IwpPaths { levels, state: ext.state })
}

/// Continues an integrated Wiener process from `state` by `extra_n` steps
/// covering `extra_t` time units.
pub fn extend_path(
    state: &IwpState,
    s: usize,
    extra_n: usize,
    extra_t: f64,
    rng: &mut RngStream,
) -> Result<IwpExtension> {
    if state.levels.len() != s + 1 {
        return Err(Error::invalid(format!(
            "state carries order {} but order {s} was requested",
            state.order()
        )));
    }
    if state.levels.iter().any(|v| !v.is_finite()) || !state.z.is_finite() {
        return Err(Error::invalid("state holds non-finite values"));
    }
    if extra_n == 0 {
        return Ok(IwpExtension {
            levels: vec![Vec::new(); s + 1],
            step: 0.0,
            state: state.clone(),
        });
    }
    if !(extra_t > 0.0) {
        return Err(Error::invalid(format!("extension length must be positive, got {extra_t}")));
    }
    let h = extra_t / extra_n as f64;
    let mut stepper = IwpStepper::new(s, h)?;
    let mut cur = state.levels.clone();
    let mut out: Vec<Vec<f64>> = (0..=s).map(|_| Vec::with_capacity(extra_n)).collect();
    for i in 0..extra_n {
        stepper.advance(&mut cur, rng);
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
        for (lvl, v) in out.iter_mut().zip(&cur) {
            lvl.push(*v);
        }
    }
    Ok(IwpExtension {
        levels: out,
        step: h,
        state: IwpState { z: state.z + extra_t, levels: cur },
    })
}

/// Brownian bridge `B(t) = W(t) - t W(1)` on `n` steps of `[0, 1]`.
pub fn simulate_brownian_bridge(n: usize, rng: &mut RngStream) -> Result<SampledPath> {
    let w = simulate_wiener(n, 1.0, rng)?;
    let end = w.values()[n];
    let values = w
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| if i == n { 0.0 } else { v - (i as f64 / n as f64) * end })
        .collect();
    SampledPath::new(0.0, w.step(), values, PathKind::Bridge)
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficients of `dX = a(X) dt + b(X) dW`, `X(0) = x0`.
///
/// The caller vouches for Lipschitz `a` and for `b` having a bounded
/// Lipschitz derivative; only `b(x0) != 0` is checked.
#[derive(Clone)]
pub struct SdeCoefficients {
    drift: ScalarFn,
    diffusion: ScalarFn,
    diffusion_prime: Option<ScalarFn>,
    x0: f64,
}

impl fmt::Debug for SdeCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeCoefficients")
            .field("x0", &self.x0)
            .field("has_derivative", &self.diffusion_prime.is_some())
            .finish()
    }
}

impl SdeCoefficients {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        x0: f64,
    ) -> Result<Self> {
        let c = Self::unchecked(drift, diffusion, x0);
        let b0 = (c.diffusion)(x0);
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::invalid(format!("diffusion coefficient must be nonzero at x0, b(x0) = {b0}")));
        }
        Ok(c)
    }

    /// Skips the `b(x0) != 0` check, for degenerate test equations.
    pub fn unchecked(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        x0: f64,
    ) -> Self {
        Self { drift: Arc::new(drift), diffusion: Arc::new(diffusion), diffusion_prime: None, x0 }
    }

    pub fn with_derivative(mut self, db: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.diffusion_prime = Some(Arc::new(db));
        self
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    pub fn diffusion_prime(&self) -> Option<&ScalarFn> {
        self.diffusion_prime.as_ref()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

/// Shipped test equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdePreset {
    /// `a = 0`, `b = 1`: `X = W`.
    Wiener,
    /// `a(x) = -x`, `b(x) = 1 + 0.1 sin x`.
    OuSine,
    /// `a(x) = 1 - x`, `b(x) = 0.5 + 0.2 tanh x`.
    MeanRevertingTanh,
}

impl SdePreset {
    pub const ALL: [SdePreset; 3] = [SdePreset::Wiener, SdePreset::OuSine, SdePreset::MeanRevertingTanh];

    pub fn name(self) -> &'static str {
        match self {
            SdePreset::Wiener => "wiener",
            SdePreset::OuSine => "ou-sine",
            SdePreset::MeanRevertingTanh => "mean-reverting-tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn coefficients(self) -> SdeCoefficients {
        let c = match self {
            SdePreset::Wiener => SdeCoefficients::new(|_| 0.0, |_| 1.0, 0.0).map(|c| c.with_derivative(|_| 0.0)),
            SdePreset::OuSine => SdeCoefficients::new(|x| -x, |x| 1.0 + 0.1 * x.sin(), 0.0)
                .map(|c| c.with_derivative(|x| 0.1 * x.cos())),
            SdePreset::MeanRevertingTanh => {
                SdeCoefficients::new(|x| 1.0 - x, |x| 0.5 + 0.2 * x.tanh(), 0.0).map(|c| {
                    c.with_derivative(|x| {
                        let t = x.tanh();
                        0.2 * (1.0 - t * t)
                    })
                })
            }
        };
        c.expect("presets satisfy b(x0) != 0")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Euler,
    Milstein,
}

/// A diffusion path together with the Wiener path that drove it.
#[derive(Clone, Debug)]
pub struct DiffusionPaths {
    pub x: SampledPath,
    pub w: SampledPath,
}

pub fn simulate_diffusion(
    coeff: &SdeCoefficients,
    n: usize,
    horizon: f64,
    rng: &mut RngStream,
    scheme: Scheme,
) -> Result<DiffusionPaths> {
    if n == 0 || !(horizon > 0.0) {
        return Err(Error::invalid(format!("need n >= 1 and T > 0, got n={n}, T={horizon}")));
    }
    let db = match scheme {
        Scheme::Euler => None,
        Scheme::Milstein => Some(coeff.diffusion_prime().ok_or_else(|| {
            Error::invalid("the Milstein scheme needs the derivative of the diffusion coefficient")
        })?),
    };
    let h = horizon / n as f64;
    let sqrt_h = h.sqrt();
    let mut x = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    let (mut xi, mut wi) = (coeff.x0(), 0.0);
    x.push(xi);
    w.push(wi);
    for i in 0..n {
        let dw = sqrt_h * rng.normal();
        let b = coeff.diffusion(xi);
        let mut next = xi + coeff.drift(xi) * h + b * dw;
        if let Some(db) = db {
            next += 0.5 * b * db(xi) * (dw * dw - h);
        }
        if !next.is_finite() {
            return Err(Error::NonFinite { step: i + 1 });
        }
        xi = next;
        wi += dw;
        x.push(xi);
        w.push(wi);
    }
    Ok(DiffusionPaths {
        x: SampledPath::new(0.0, h, x, PathKind::Diffusion)?,
        w: SampledPath::new(0.0, h, w, PathKind::Wiener)?,
    })
}
