use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::slice_norm;
use crate::norm::Norm;
use crate::path::SampledPath;
use crate::poly::{legendre_values, Polynomial};

/// Piecewise polynomial with knots `t_0 < ... < t_k`; piece `j` lives on
/// `]t_{j-1}, t_j]` (the first piece also owns `t_0`). Pieces are independent,
/// no continuity is imposed across knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    knots: Vec<f64>,
    pieces: Vec<Polynomial>,
}

impl Spline {
    pub fn new(knots: Vec<f64>, pieces: Vec<Polynomial>) -> Result<Self> {
        if pieces.is_empty() || knots.len() != pieces.len() + 1 {
            return Err(Error::invalid(format!(
                "need k >= 1 pieces and k + 1 knots, got {} pieces and {} knots",
                pieces.len(),
                knots.len()
            )));
        }
        for (j, w) in knots.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::invalid(format!("knots must increase strictly, knot {} is {} after {}", j + 1, w[1], w[0])));
            }
            let piece = &pieces[j];
            let tol = 1e-9 * (w[1] - w[0]).abs().max(w[1].abs());
            if (piece.lo() - w[0]).abs() > tol || (piece.hi() - w[1]).abs() > tol {
                return Err(Error::invalid(format!("piece {j} interval does not match its knots")));
            }
        }
        Ok(Self { knots, pieces })
    }

    /// Piecewise constant spline.
    pub fn piecewise_constant(knots: Vec<f64>, values: &[f64]) -> Result<Self> {
        if knots.len() != values.len() + 1 {
            return Err(Error::invalid("need one value per piece"));
        }
        let pieces = knots
            .windows(2)
            .zip(values)
            .map(|(w, &v)| Polynomial::constant(w[0], w[1], v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(knots, pieces)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn n_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Index of the piece owning `t`.
    pub fn piece_index(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { u: t, v: t, lo, hi });
        }
        let j = self.knots[1..].partition_point(|&k| k < t);
        Ok(j.min(self.pieces.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.pieces[self.piece_index(t)?].eval(t))
    }

    /// Sum of two splines on the union of their knots.
    pub fn add(&self, other: &Spline) -> Result<Spline> {
        if self.domain() != other.domain() {
            return Err(Error::invalid("splines must share their domain to be added"));
        }
        let mut knots: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut pieces = Vec::with_capacity(knots.len() - 1);
        for w in knots.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let a = restrict(&self.pieces[self.piece_index(mid)?], w[0], w[1])?;
            let b = restrict(&other.pieces[other.piece_index(mid)?], w[0], w[1])?;
            let n = a.coeffs().len().max(b.coeffs().len());
            let mut c = vec![0.0; n];
            for (i, v) in a.coeffs().iter().enumerate() {
                c[i] += v;
            }
            for (i, v) in b.coeffs().iter().enumerate() {
                c[i] += v;
            }
            pieces.push(Polynomial::new(w[0], w[1], c)?);
        }
        Spline::new(knots, pieces)
    }

    /// Per-piece discrete `L_p` error against `path`. Each piece is compared
    /// with the samples on its own closed grid interval `[t_{j-1}, t_j]`.
    pub fn piece_errors(&self, path: &SampledPath, p: Norm) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.pieces.len());
        let mut res = Vec::new();
        for (j, piece) in self.pieces.iter().enumerate() {
            let (i0, i1) = self.grid_range(path, j)?;
            res.clear();
            res.extend((i0..=i1).map(|i| path.values()[i] - piece.eval(path.time(i))));
            out.push(slice_norm(&res, path.step(), p));
        }
        Ok(out)
    }

    fn grid_range(&self, path: &SampledPath, j: usize) -> Result<(usize, usize)> {
        let (u, v) = (self.knots[j], self.knots[j + 1]);
        if !path.is_grid_point(u) || !path.is_grid_point(v) {
            return Err(Error::invalid(format!("knots {u} and {v} must be grid points of the path")));
        }
        path.index_range(u, v).map_err(|e| match e {
            Error::OutOfRange { .. } => Error::invalid(format!(
                "spline domain [{}, {}] is not covered by the path [{}, {}]",
                self.knots[0],
                self.knots[self.knots.len() - 1],
                path.t0(),
                path.end()
            )),
            e => e,
        })
    }
}

/// Discrete `L_p` distance between `path` and `spline` over the spline domain.
///
/// For finite `p` the per-piece trapezoid integrals of `|f - phi|^p` are summed;
/// for `p = inf` the per-piece maxima are combined.
pub fn spline_error(path: &SampledPath, spline: &Spline, p: Norm) -> Result<f64> {
    let errs = spline.piece_errors(path, p)?;
    Ok(combine_piece_errors(&errs, p))
}

/// Aggregates per-piece `L_p` errors into the global one.
pub fn combine_piece_errors(errs: &[f64], p: Norm) -> f64 {
    if p.is_inf() {
        errs.iter().fold(0.0f64, |m, &e| m.max(e))
    } else {
        let q = p.value();
        errs.iter().map(|e| e.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Re-expresses `poly` in the Legendre basis of `[lo, hi]`.
pub fn restrict(poly: &Polynomial, lo: f64, hi: f64) -> Result<Polynomial> {
    let n = poly.coeffs().len();
    if n == 1 || (lo == poly.lo() && hi == poly.hi()) {
        return Polynomial::new(lo, hi, poly.coeffs().to_vec());
    }
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let x = -(std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos();
        legendre_values(x, &mut row);
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
        b[i] = poly.eval(lo + 0.5 * (x + 1.0) * (hi - lo));
    }
    let c = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NumericFailure("singular restriction system".into()))?;
    Polynomial::new(lo, hi, c.as_slice().to_vec())
}
