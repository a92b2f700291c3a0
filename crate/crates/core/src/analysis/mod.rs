//! From position traces to the per-wavelength ratio statistics.

mod lof;
mod lorentzian;
mod psd;
mod ratios;
mod stats;

pub use lof::{lof_filter, lof_scores, standardize, LofConfig, LofResult};
pub use lorentzian::{fit_lorentzian, fit_lorentzian_with, FitWindow, PsdFit};
pub use psd::{power_spectrum, welch, PowerSpectrum, WelchConfig};
pub use ratios::{
    extract_ratios, ratios_from_corner_frequencies, ten_percent_rule, AnalysisConfig, RatioSample,
    Rejection, TEN_PERCENT,
};
pub use stats::{distribution_stats, quantile, DistributionStats};

use serde::{Deserialize, Serialize};

use crate::Result;

/// Ratios measured at one probe wavelength. Blue and red probes report the
/// same acquisitions under their own wavelengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavelengthSample {
    pub lambda_nm: f64,
    pub ratio: f64,
    pub rejection: Option<Rejection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavelengthStats {
    pub lambda_nm: f64,
    pub mean: f64,
    pub se: f64,
    pub skewness: f64,
    pub n_kept: usize,
    pub n_rejected_10pct: usize,
    pub n_rejected_lof: usize,
}

/// Runs LOF over the (λ, ratio) points that survived the earlier filters,
/// marks outliers, and reduces each wavelength to its moments. Wavelengths
/// with fewer than three kept samples are skipped.
pub fn summarize(
    samples: &mut [WavelengthSample],
    lof: &LofConfig,
) -> Result<Vec<WavelengthStats>> {
    let survivors: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].rejection.is_none())
        .collect();
    let points: Vec<[f64; 2]> = survivors
        .iter()
        .map(|&i| [samples[i].lambda_nm, samples[i].ratio])
        .collect();
    let verdict = lof_filter(&points, lof)?;
    for (&i, keep) in survivors.iter().zip(&verdict.keep) {
        if !keep {
            samples[i].rejection = Some(Rejection::Lof);
        }
    }

    let mut lambdas: Vec<f64> = samples.iter().map(|s| s.lambda_nm).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut out = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let at: Vec<&WavelengthSample> = samples
            .iter()
            .filter(|s| (s.lambda_nm - lambda).abs() < 1e-9)
            .collect();
        let kept: Vec<f64> = at
            .iter()
            .filter(|s| s.rejection.is_none())
            .map(|s| s.ratio)
            .collect();
        let count = |r: &Rejection| {
            at.iter()
                .filter(|s| s.rejection.as_ref() == Some(r))
                .count()
        };
        if kept.len() < 3 {
            log::warn!("{lambda} nm: only {} samples kept, skipped", kept.len());
            continue;
        }
        let st = distribution_stats(&kept)?;
        out.push(WavelengthStats {
            lambda_nm: lambda,
            mean: st.mean,
            se: st.standard_error,
            skewness: st.skewness,
            n_kept: kept.len(),
            n_rejected_10pct: count(&Rejection::TenPercentRule),
            n_rejected_lof: count(&Rejection::Lof),
        });
    }
    Ok(out)
}

/// Splits ratio samples into (λ, ratio) entries for the blue and red probes.
pub fn wavelength_samples(
    ratios: &[RatioSample],
    blue_nm: f64,
    red_nm: f64,
) -> Vec<WavelengthSample> {
    ratios
        .iter()
        .flat_map(|r| {
            [
                WavelengthSample {
                    lambda_nm: blue_nm,
                    ratio: r.r_blue,
                    rejection: r.rejection.clone(),
                },
                WavelengthSample {
                    lambda_nm: red_nm,
                    ratio: r.r_red,
                    rejection: r.rejection.clone(),
                },
            ]
        })
        .collect()
}
