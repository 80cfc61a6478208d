//! Width measurement and Gaussian fitting for 1D curves.

use std::f64::consts::LN_2;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::grid::Curve1D;

/// Linear-interpolated full width at half maximum.
pub fn fwhm(curve: &Curve1D) -> Result<f64> {
    let (left, right) = half_max_crossings(curve)?;
    Ok(right - left)
}

/// Abscissae of the half-maximum crossings either side of the peak.
pub fn half_max_crossings(curve: &Curve1D) -> Result<(f64, f64)> {
    let (x, y) = (&curve.x, &curve.y);
    if y.len() < 3 {
        return Err(Error::NotMeasurable("need at least three samples".into()));
    }
    let (peak_idx, peak) =
        y.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if !(peak > 0.0) {
        return Err(Error::NotMeasurable("curve has no positive maximum".into()));
    }
    let half = 0.5 * peak;
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);

    let left = (0..peak_idx)
        .rev()
        .find(|&i| y[i] < half)
        .map(|i| cross(i, i + 1))
        .ok_or_else(|| Error::NotMeasurable("no half-maximum crossing left of the peak".into()))?;
    let right = (peak_idx + 1..y.len())
        .find(|&i| y[i] < half)
        .map(|i| cross(i - 1, i))
        .ok_or_else(|| Error::NotMeasurable("no half-maximum crossing right of the peak".into()))?;
    Ok((left, right))
}

/// Parameters of `A·exp(−4 ln2 (x−x₀)²/w²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    /// Root-mean-square residual over all samples.
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 500;
const PARAM_TOLERANCE: f64 = 1e-10;

fn model(p: &Vector3<f64>, x: f64) -> (f64, Vector3<f64>) {
    let (a, x0, w) = (p[0], p[1], p[2]);
    let u = x - x0;
    let k = 4.0 * LN_2 / (w * w);
    let e = (-k * u * u).exp();
    let f = a * e;
    (f, Vector3::new(e, f * 2.0 * k * u, f * 2.0 * k * u * u / w))
}

fn cost(p: &Vector3<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (model(p, xi).0 - yi).powi(2)).sum()
}

/// Weighted quadratic fit to `ln y` over the upper part of the peak.
fn log_domain_start(x: &[f64], y: &[f64]) -> Result<Vector3<f64>> {
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::FitFailure { reason: "curve has no positive samples".into(), iterations: 0 });
    }
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let xs = x.iter().map(|&v| (v - xm).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        if yi <= 0.1 * peak {
            continue;
        }
        let t = (xi - xm) / xs;
        let row = Vector3::new(1.0, t, t * t);
        let w = yi * yi;
        ata += w * row * row.transpose();
        atb += w * yi.ln() * row;
    }
    let degenerate = |reason: &str| Error::FitFailure { reason: reason.into(), iterations: 0 };
    let c = ata.lu().solve(&atb).ok_or_else(|| degenerate("log-domain initialization is singular"))?;
    if !(c[2] < -1e-12 * c[0].abs().max(1.0)) {
        return Err(degenerate("curve has no peak curvature"));
    }
    let t0 = -c[1] / (2.0 * c[2]);
    let curvature = c[2] / (xs * xs);
    let width = (-4.0 * LN_2 / curvature).sqrt();
    let amplitude = (c[0] - c[1] * c[1] / (4.0 * c[2])).exp();
    Ok(Vector3::new(amplitude, xm + t0 * xs, width))
}

/// Least-squares Gaussian fit: log-domain linear start, then damped
/// Gauss-Newton (Levenberg-Marquardt) refinement.
pub fn gaussian_fit(curve: &Curve1D) -> Result<GaussianFit> {
    let (x, y) = (&curve.x, &curve.y);
    if x.len() < 5 {
        return Err(Error::FitFailure { reason: format!("need at least 5 samples, got {}", x.len()), iterations: 0 });
    }
    let mut p = log_domain_start(x, y)?;
    let mut current = cost(&p, x, y);
    let mut lambda = 1e-3;

    for iter in 1..=MAX_ITERATIONS {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&xi, &yi) in x.iter().zip(y.iter()) {
            let (f, g) = model(&p, xi);
            jtj += g * g.transpose();
            jtr += g * (f - yi);
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&-jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_cost = cost(&trial, x, y);
            if trial[2] > 0.0 && trial_cost <= current {
                // Amplitude relative to itself; center and width relative to
                // the width, since the center may sit at zero.
                let scales = [trial[0].abs(), trial[2].abs(), trial[2].abs()];
                let small = (0..3).all(|i| step[i].abs() <= PARAM_TOLERANCE * scales[i]);
                p = trial;
                current = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small {
                    return Ok(finish(p, current, x.len(), iter));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: the cost is at a minimum to rounding.
            return Ok(finish(p, current, x.len(), iter));
        }
    }
    Err(Error::FitFailure {
        reason: format!("no convergence; last parameters A={}, x0={}, w={}, cost={current}", p[0], p[1], p[2]),
        iterations: MAX_ITERATIONS,
    })
}

fn finish(p: Vector3<f64>, cost: f64, n: usize, iterations: usize) -> GaussianFit {
    GaussianFit { amplitude: p[0], center: p[1], fwhm: p[2].abs(), residual: (cost / n as f64).sqrt(), iterations }
}
