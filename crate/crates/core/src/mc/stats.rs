use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const BOOTSTRAP_DRAWS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub replicates_used: usize,
}

impl EstimateWithError {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, replicates_used: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, replicates_used: n }
    }

    /// `(E X^q)^(1/q)` from samples of `X >= 0`, with a delta-method error.
    pub fn moment_root(xs: &[f64], q: f64) -> Self {
        if q == 1.0 {
            return Self::from_samples(xs);
        }
        let pows: Vec<f64> = xs.iter().map(|x| x.powf(q)).collect();
        let m = Self::from_samples(&pows);
        let root = m.mean.powf(1.0 / q);
        Self { mean: root, std_error: root / (q * m.mean) * m.std_error, replicates_used: m.replicates_used }
    }

    /// `mean^e` with a delta-method error.
    pub fn powf(&self, e: f64) -> Self {
        let v = self.mean.powf(e);
        Self { mean: v, std_error: (e * v / self.mean).abs() * self.std_error, replicates_used: self.replicates_used }
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_diff(&self, other: &Self) -> f64 {
        (self.mean - other.mean) / (self.std_error.powi(2) + other.std_error.powi(2)).sqrt()
    }
}

/// Least-squares line through `(log k, log error)` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points: Vec<(f64, f64)>,
}

fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = if points.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, se)
}

fn check_points(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("a rate fit needs >= 3 points, got {}", points.len())));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::InvalidInput("rate fit points must be finite".into()));
    }
    let x0 = points[0].0;
    if points.iter().all(|p| p.0 == x0) {
        return Err(Error::InvalidInput("rate fit needs distinct abscissae".into()));
    }
    Ok(())
}

impl RateFit {
    /// Plain OLS on already-logged points; the slope error is the classical one.
    pub fn ols(points: Vec<(f64, f64)>) -> Result<Self> {
        check_points(&points)?;
        let (slope, intercept, slope_stderr) = ols(&points);
        Ok(Self { slope, intercept, slope_stderr, points })
    }

    /// Fit of `log (E e^q)^(1/q)` against `log x`, where `samples[j][i]` is the
    /// error of replicate `i` at abscissa `xs[j]`. The slope error comes from a
    /// paired bootstrap over replicates.
    pub fn from_replicates(xs: &[f64], samples: &[Vec<f64>], q: f64, seed: u64) -> Result<Self> {
        Self::from_replicates_with(xs, samples, q, seed, |x, _| x)
    }

    /// As [`RateFit::from_replicates`], with abscissae recomputed on every
    /// bootstrap draw by `abscissa(x_j, resampled indices)`.
    pub fn from_replicates_with(
        xs: &[f64],
        samples: &[Vec<f64>],
        q: f64,
        seed: u64,
        abscissa: impl Fn(f64, &[usize]) -> f64,
    ) -> Result<Self> {
        if xs.len() != samples.len() {
            return Err(Error::invalid("one sample vector per abscissa is required"));
        }
        let reps = samples.first().map_or(0, Vec::len);
        if reps == 0 || samples.iter().any(|s| s.len() != reps) {
            return Err(Error::invalid("every abscissa needs the same positive number of replicates"));
        }
        let all: Vec<usize> = (0..reps).collect();
        let point_set = |idx: &[usize]| -> Vec<(f64, f64)> {
            xs.iter()
                .zip(samples)
                .map(|(&x, s)| {
                    let m = idx.iter().map(|&i| s[i].powf(q)).sum::<f64>() / idx.len() as f64;
                    (abscissa(x, idx).ln(), m.powf(1.0 / q).ln())
                })
                .collect()
        };
        let points = point_set(&all);
        check_points(&points)?;
        let (slope, intercept, _) = ols(&points);
        let mut rng = RngStream::for_lane(seed, 0xb007, 0);
        let mut idx = vec![0usize; reps];
        let mut slopes = Vec::with_capacity(BOOTSTRAP_DRAWS);
        for _ in 0..BOOTSTRAP_DRAWS {
            idx.iter_mut().for_each(|i| *i = rng.below(reps));
            let pts = point_set(&idx);
            if pts.iter().all(|p| p.0.is_finite() && p.1.is_finite()) {
                slopes.push(ols(&pts).0);
            }
        }
        let est = EstimateWithError::from_samples(&slopes);
        let slope_stderr = est.std_error * (slopes.len() as f64).sqrt();
        Ok(Self { slope, intercept, slope_stderr, points })
    }
}

/// Interquartile range with linear interpolation between order statistics.
pub fn interquartile_range(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let e = EstimateWithError::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(EstimateWithError::from_samples(&[7.0]).std_error, 0.0);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [4.0f64, 8.0, 16.0, 32.0]
            .iter()
            .map(|k| (k.ln(), (2.0 * k.powf(-0.5)).ln()))
            .collect();
        let fit = RateFit::ols(pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-10);
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(RateFit::ols(vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(RateFit::from_replicates(&[1.0], &[vec![1.0]], 1.0, 0).is_err());
    }

    #[test]
    fn bootstrap_error_is_positive() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let mut rng = RngStream::new(3, 0);
        let samples: Vec<Vec<f64>> = xs
            .iter()
            .map(|x: &f64| (0..200).map(|_| x.powf(-1.0) * (1.0 + 0.1 * rng.normal()).abs()).collect())
            .collect();
        let fit = RateFit::from_replicates(&xs, &samples, 1.0, 9).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05);
        assert!(fit.slope_stderr > 0.0 && fit.slope_stderr < 0.05);
    }

    #[test]
    fn iqr() {
        assert_eq!(interquartile_range(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
    }
}
