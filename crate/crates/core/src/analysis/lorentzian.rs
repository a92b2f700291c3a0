use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::psd::PowerSpectrum;
use crate::{Error, Result};

/// Bins that enter a Lorentzian fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitWindow {
    /// Lowest bins dropped (DC and drift).
    pub skip_low_bins: usize,
    /// Upper limit as a fraction of the Nyquist frequency.
    pub nyquist_fraction: f64,
    /// Additional upper limit as a multiple of the initial corner estimate.
    /// `None` keeps only the Nyquist limit.
    pub corner_multiple: Option<f64>,
    pub max_iterations: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self {
            skip_low_bins: 3,
            nyquist_fraction: 0.25,
            corner_multiple: Some(10.0),
            max_iterations: 200,
        }
    }
}

/// Result of fitting P(f) = A/(f² + f_c²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdFit {
    pub f_c: f64,
    pub amplitude: f64,
    /// RMS residual of ln P.
    pub fit_residual: f64,
    /// Covariance of (ln A, ln f_c).
    pub covariance: [[f64; 2]; 2],
    pub iterations: usize,
    pub bins: usize,
}

pub fn fit_lorentzian(psd: &PowerSpectrum) -> Result<PsdFit> {
    fit_lorentzian_with(psd, &FitWindow::default())
}

/// Levenberg–Marquardt fit in log-power space over (ln A, ln f_c).
pub fn fit_lorentzian_with(psd: &PowerSpectrum, window: &FitWindow) -> Result<PsdFit> {
    let top = window.nyquist_fraction * psd.nyquist();
    let candidates: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .skip(window.skip_low_bins)
        .filter(|(f, _)| **f <= top)
        .map(|(&f, &p)| (f, p))
        .collect();
    if candidates.len() < 8 {
        return Err(Error::InsufficientData(
            "too few spectral bins to fit".into(),
        ));
    }
    if candidates.iter().any(|&(_, p)| !(p > 0.0 && p.is_finite())) {
        return Err(Error::NonConvergence(
            "spectrum has non-positive bins".into(),
        ));
    }
    let (f_guess, a_guess) = initial_guess(&candidates)?;
    let limit = window.corner_multiple.map_or(top, |m| top.min(m * f_guess));
    let data: Vec<(f64, f64)> = candidates
        .iter()
        .filter(|(f, _)| *f <= limit)
        .map(|&(f, p)| (f, p.ln()))
        .collect();
    if data.len() < 8 {
        return Err(Error::InsufficientData(
            "too few spectral bins below the fit limit".into(),
        ));
    }

    let residuals = |p: &Vector2<f64>| -> Vec<f64> {
        let fc2 = (2.0 * p[1]).exp();
        data.iter()
            .map(|&(f, lp)| lp - p[0] + (f * f + fc2).ln())
            .collect()
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let jacobian = |p: &Vector2<f64>| -> (Matrix2<f64>, Vector2<f64>) {
        let fc2 = (2.0 * p[1]).exp();
        let r = residuals(p);
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (&(f, _), ri) in data.iter().zip(&r) {
            let j = Vector2::new(-1.0, 2.0 * fc2 / (f * f + fc2));
            jtj += j * j.transpose();
            jtr += j * *ri;
        }
        (jtj, jtr)
    };

    let mut params = Vector2::new(a_guess.ln(), f_guess.ln());
    let mut current = cost(&residuals(&params));
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < window.max_iterations {
        iterations += 1;
        let (jtj, jtr) = jacobian(&params);
        let mut damped = jtj;
        for i in 0..2 {
            damped[(i, i)] *= 1.0 + lambda;
        }
        let Some(step) = damped.lu().solve(&(-jtr)) else {
            return Err(Error::NonConvergence("singular normal equations".into()));
        };
        let trial = params + step;
        let trial_cost = cost(&residuals(&trial));
        if trial_cost.is_finite() && trial_cost <= current {
            let small =
                step.amax() < 1e-10 || (current - trial_cost) <= 1e-15 * current.max(1e-300);
            params = trial;
            current = trial_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Lorentzian fit did not converge in {} iterations",
            window.max_iterations
        )));
    }
    let f_c = params[1].exp();
    let (f_lo, f_hi) = (data[0].0, data[data.len() - 1].0);
    if !(f_c.is_finite() && f_c > 0.1 * f_lo && f_c < f_hi) {
        return Err(Error::NonConvergence(format!(
            "fitted corner {f_c:.3e} Hz outside the fitted band [{f_lo:.3e}, {f_hi:.3e}] Hz"
        )));
    }
    let dof = (data.len() - 2) as f64;
    let sigma2 = current / dof;
    let (jtj, _) = jacobian(&params);
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("singular covariance".into()))?
        * sigma2;
    Ok(PsdFit {
        f_c,
        amplitude: params[0].exp(),
        fit_residual: (current / data.len() as f64).sqrt(),
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        iterations,
        bins: data.len(),
    })
}

/// Corner guess from the first bin where the smoothed spectrum drops below
/// half of its low-frequency plateau.
fn initial_guess(bins: &[(f64, f64)]) -> Result<(f64, f64)> {
    let plateau_len = 5.min(bins.len());
    let plateau = bins[..plateau_len].iter().map(|b| b.1).sum::<f64>() / plateau_len as f64;
    let width = 5;
    for i in 0..bins.len().saturating_sub(width) {
        let smoothed = bins[i..i + width].iter().map(|b| b.1).sum::<f64>() / width as f64;
        if smoothed < 0.5 * plateau {
            let f_c = bins[i + width / 2].0;
            return Ok((f_c, plateau * (f_c * f_c + bins[0].0 * bins[0].0)));
        }
    }
    Err(Error::NonConvergence(
        "spectrum never falls to half its low-frequency level".into(),
    ))
}
