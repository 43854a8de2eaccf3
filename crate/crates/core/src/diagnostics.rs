//! Quantitative verification helpers: positivity and mass audits, the
//! x1-marginal of the tip density, sech^2 pulse fitting, front-speed
//! estimation and convergence-order measurement.

use crate::grid::{AveragedField, GridSpec};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("profile has no strict interior maximum")]
    NoInteriorMax,
    #[error("pulse fit did not converge after {iterations} iterations")]
    FitDiverged { iterations: usize },
    #[error("need at least 3 snapshots for a speed estimate, got {got}")]
    TooFewSnapshots { got: usize },
    #[error("resolutions must be strictly decreasing and positive")]
    BadResolutions,
    #[error("error norms must be positive and finite")]
    NonPositiveError,
}

/// Smallest cell average and total mass `sum u dx dy` of a field.
pub fn min_and_mass(field: &AveragedField, grid: &GridSpec) -> (f64, f64) {
    (field.min_interior(), field.sum_interior() * grid.cell_area())
}

/// Reduce a 2D field to its x1 axis: `P(x_i) = sum_j u_ij dy`.
pub fn marginal_profile(field: &AveragedField, grid: &GridSpec) -> Vec<f64> {
    (0..grid.nx)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..grid.ny {
                s += field.get(i as isize, j as isize);
            }
            s * grid.dy
        })
        .collect()
}

/// `amplitude sech^2(width (x - x_peak))`.
pub fn soliton_profile(x: f64, amplitude: f64, width_param: f64, x_peak: f64) -> f64 {
    let s = 1.0 / (width_param * (x - x_peak)).cosh();
    amplitude * s * s
}

/// Fitted pulse parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonFit {
    pub amplitude: f64,
    pub width_param: f64,
    pub x_peak: f64,
    pub r_squared: f64,
}

const MAX_FIT_ITERATIONS: usize = 200;

/// Nonlinear least squares of a sech^2 pulse over (amplitude, width, peak
/// position): Levenberg-Marquardt with the analytic Jacobian, initialized
/// from the peak value, peak location and half-maximum width.
pub fn fit_soliton(profile: &[f64], x: &[f64]) -> Result<SolitonFit, DiagnosticsError> {
    assert_eq!(profile.len(), x.len());
    let n = profile.len();
    if n < 5 {
        return Err(DiagnosticsError::NoInteriorMax);
    }
    let (mut k_max, mut y_max) = (0usize, f64::NEG_INFINITY);
    for (k, &y) in profile.iter().enumerate() {
        if y > y_max {
            y_max = y;
            k_max = k;
        }
    }
    if k_max == 0 || k_max == n - 1 || !(y_max > 0.0) {
        return Err(DiagnosticsError::NoInteriorMax);
    }

    // half-maximum width for the initial sech scale
    let half = 0.5 * y_max;
    let mut left = None;
    for k in (0..k_max).rev() {
        if profile[k] <= half {
            left = Some(x[k]);
            break;
        }
    }
    let mut right = None;
    for k in k_max + 1..n {
        if profile[k] <= half {
            right = Some(x[k]);
            break;
        }
    }
    let half_width = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => x[k_max] - l,
        (None, Some(r)) => r - x[k_max],
        (None, None) => 0.25 * (x[n - 1] - x[0]),
    };
    // sech^2 falls to one half at arccosh(sqrt 2)/width
    let acosh_sqrt2 = (2.0_f64.sqrt() + 1.0).ln();
    let mut p = [y_max, (acosh_sqrt2 / half_width).abs().max(1e-8), x[k_max]];

    let cost = |p: &[f64; 3]| -> f64 {
        profile
            .iter()
            .zip(x)
            .map(|(&y, &xi)| {
                let r = soliton_profile(xi, p[0], p[1], p[2]) - y;
                r * r
            })
            .sum()
    };

    let mut lambda = 1e-3;
    let mut current = cost(&p);
    let mut converged = false;
    for _ in 0..MAX_FIT_ITERATIONS {
        // assemble normal equations
        let mut jtj = [[0.0_f64; 3]; 3];
        let mut jtr = [0.0_f64; 3];
        for (&y, &xi) in profile.iter().zip(x) {
            let z = p[1] * (xi - p[2]);
            let sech = 1.0 / z.cosh();
            let s2 = sech * sech;
            let tanh = z.tanh();
            let m = p[0] * s2;
            let r = m - y;
            let g = [
                s2,
                -2.0 * p[0] * (xi - p[2]) * s2 * tanh,
                2.0 * p[0] * p[1] * s2 * tanh,
            ];
            for a in 0..3 {
                jtr[a] += g[a] * r;
                for b in 0..3 {
                    jtj[a][b] += g[a] * g[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj;
            for a in 0..3 {
                m[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2]];
            let Some(delta) = solve3(&m, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + delta[0], (p[1] + delta[1]).abs().max(1e-12), p[2] + delta[2]];
            let trial_cost = cost(&trial);
            if trial_cost.is_finite() && trial_cost < current {
                let rel_drop = (current - trial_cost) / current.max(1e-300);
                p = trial;
                current = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel_drop < 1e-14 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true; // stuck in a flat basin: accept the current point
            break;
        }
        if converged {
            break;
        }
    }
    if !converged && !current.is_finite() {
        return Err(DiagnosticsError::FitDiverged { iterations: MAX_FIT_ITERATIONS });
    }

    let mean = profile.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = profile.iter().map(|&y| (y - mean) * (y - mean)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - current / ss_tot } else { 1.0 };
    Ok(SolitonFit { amplitude: p[0], width_param: p[1], x_peak: p[2], r_squared })
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut mm = *m;
        for r in 0..3 {
            mm[r][c] = rhs[r];
        }
        let dc = mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1])
            - mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0])
            + mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]);
        out[c] = dc / det;
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontSpeed {
    pub speed: f64,
    pub intercept: f64,
    /// root-mean-square residual of the linear fit
    pub residual_rms: f64,
}

/// Least-squares slope of the peak position against time.
pub fn front_speed(samples: &[(f64, f64)]) -> Result<FrontSpeed, DiagnosticsError> {
    let n = samples.len();
    if n < 3 {
        return Err(DiagnosticsError::TooFewSnapshots { got: n });
    }
    let nf = n as f64;
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / nf;
    let mean_x = samples.iter().map(|s| s.1).sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &(t, xp) in samples {
        cov += (t - mean_t) * (xp - mean_x);
        var += (t - mean_t) * (t - mean_t);
    }
    let speed = cov / var;
    let intercept = mean_x - speed * mean_t;
    let ss: f64 = samples
        .iter()
        .map(|&(t, xp)| {
            let r = xp - (intercept + speed * t);
            r * r
        })
        .sum();
    Ok(FrontSpeed { speed, intercept, residual_rms: (ss / nf).sqrt() })
}

/// Least-squares slope of `log error` against `log h`.
pub fn convergence_order(errors: &[f64], h: &[f64]) -> Result<f64, DiagnosticsError> {
    if errors.len() != h.len() || h.len() < 2 {
        return Err(DiagnosticsError::BadResolutions);
    }
    for w in h.windows(2) {
        if !(w[1] < w[0]) || !(w[1] > 0.0) {
            return Err(DiagnosticsError::BadResolutions);
        }
    }
    if errors.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(DiagnosticsError::NonPositiveError);
    }
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for k in 0..h.len() {
        cov += (lx[k] - mx) * (ly[k] - my);
        var += (lx[k] - mx) * (lx[k] - mx);
    }
    Ok(cov / var)
}
