use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial of degree `<= r` on `[lo, hi]`, stored in the shifted Legendre
/// basis: `p(t) = sum_i coeffs[i] * P_i(x)` with `x = 2 (t - lo) / (hi - lo) - 1`
/// and `P_i` the Legendre polynomials on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(lo: f64, hi: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("polynomial interval must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if coeffs.is_empty() {
            return Err(Error::invalid("a polynomial needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NumericFailure("non-finite polynomial coefficient".into()));
        }
        Ok(Self { lo, hi, coeffs })
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(lo, hi, vec![value])
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Maps `t` to the reference interval `[-1, 1]`.
    pub fn local(&self, t: f64) -> f64 {
        2.0 * (t - self.lo) / (self.hi - self.lo) - 1.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        legendre_series(&self.coeffs, self.local(t))
    }

    /// Evaluates at the local coordinate `x in [-1, 1]`.
    pub fn eval_local(&self, x: f64) -> f64 {
        legendre_series(&self.coeffs, x)
    }

    /// Adds a constant.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Multiplies by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// Clenshaw summation of `sum_i c[i] P_i(x)`.
pub fn legendre_series(c: &[f64], x: f64) -> f64 {
    match c.len() {
        0 => 0.0,
        1 => c[0],
        _ => {
            // P_{k+1} = alpha_k(x) P_k + beta_k P_{k-1},
            // alpha_k = (2k+1) x / (k+1), beta_k = -k / (k+1).
            let n = c.len() - 1;
            let (mut b1, mut b2) = (0.0, 0.0);
            for k in (1..=n).rev() {
                let kf = k as f64;
                let alpha = (2.0 * kf + 1.0) * x / (kf + 1.0);
                let beta = -(kf + 1.0) / (kf + 2.0);
                let b0 = c[k] + alpha * b1 + beta * b2;
                b2 = b1;
                b1 = b0;
            }
            c[0] + x * b1 - 0.5 * b2
        }
    }
}

/// Writes `P_0(x), ..., P_r(x)` into `out` (length `r + 1`).
#[inline]
pub fn legendre_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}
