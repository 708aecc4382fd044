//! Plain CSV serialization of a fitted spline.
//!
//! ```text
//! k,r,p,gamma
//! 8,1,inf,0.0123
//! knot_left,knot_right,coeff_0,coeff_1
//! 0.0,0.125,...
//! ```
//!
//! Coefficients are in the shifted Legendre basis of each piece (see
//! [`freeknot::Polynomial`]); floats are written in shortest round-trip form.

use std::io::{BufRead, Write};

use freeknot::{Norm, Polynomial, Spline};

use crate::RunError;

#[derive(Clone, Debug, PartialEq)]
pub struct SplineFile {
    pub k: usize,
    pub r: usize,
    pub p: Norm,
    pub gamma: f64,
    pub spline: Spline,
}

pub fn write_spline(mut w: impl Write, f: &SplineFile) -> std::io::Result<()> {
    writeln!(w, "k,r,p,gamma")?;
    writeln!(w, "{},{},{},{:?}", f.k, f.r, f.p, f.gamma)?;
    let coeffs: Vec<String> = (0..=f.r).map(|i| format!("coeff_{i}")).collect();
    writeln!(w, "knot_left,knot_right,{}", coeffs.join(","))?;
    for piece in f.spline.pieces() {
        let mut cells = vec![format!("{:?}", piece.lo()), format!("{:?}", piece.hi())];
        cells.extend((0..=f.r).map(|i| format!("{:?}", piece.coeffs().get(i).copied().unwrap_or(0.0))));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> RunError {
    RunError::Input(format!("spline file line {line}: {msg}"))
}

fn num(line: usize, s: &str) -> Result<f64, RunError> {
    s.trim().parse().map_err(|_| bad(line, format!("not a number: {s:?}")))
}

pub fn read_spline(r: impl BufRead) -> Result<SplineFile, RunError> {
    let lines: Vec<String> = r
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| RunError::Input(format!("cannot read spline file: {e}")))?;
    let lines: Vec<&str> = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect();
    if lines.len() < 4 || lines[0] != "k,r,p,gamma" {
        return Err(bad(1, "expected header k,r,p,gamma"));
    }
    let head: Vec<&str> = lines[1].split(',').collect();
    if head.len() != 4 {
        return Err(bad(2, "expected 4 fields"));
    }
    let k: usize = head[0].trim().parse().map_err(|_| bad(2, "bad k"))?;
    let deg: usize = head[1].trim().parse().map_err(|_| bad(2, "bad r"))?;
    let p: Norm = head[2].trim().parse().map_err(|e| bad(2, e))?;
    let gamma = num(2, head[3])?;
    let ncols = deg + 3;
    if lines[2].split(',').count() != ncols {
        return Err(bad(3, format!("expected {ncols} columns")));
    }
    let mut knots = Vec::new();
    let mut pieces = Vec::new();
    for (i, l) in lines[3..].iter().enumerate() {
        let ln = i + 4;
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != ncols {
            return Err(bad(ln, format!("expected {ncols} columns, got {}", cells.len())));
        }
        let vals = cells.iter().map(|c| num(ln, c)).collect::<Result<Vec<_>, _>>()?;
        if knots.is_empty() {
            knots.push(vals[0]);
        } else if vals[0] != *knots.last().unwrap() {
            return Err(bad(ln, "pieces must be contiguous"));
        }
        knots.push(vals[1]);
        pieces.push(Polynomial::new(vals[0], vals[1], vals[2..].to_vec()).map_err(|e| bad(ln, e))?);
    }
    let spline = Spline::new(knots, pieces).map_err(|e| bad(4, e))?;
    Ok(SplineFile { k, r: deg, p, gamma, spline })
}
