use serde::{Deserialize, Serialize};

use super::lorentzian::{fit_lorentzian_with, FitWindow};
use super::psd::{welch, WelchConfig};
use crate::brownian::{LaserSet, SegmentedAcquisition};
use crate::{Error, Result};

/// Largest accepted relative change of the 660-only corner frequency
/// between the first and last segment.
pub const TEN_PERCENT: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "detail")]
pub enum Rejection {
    FitFailure(String),
    TenPercentRule,
    Lof,
}

/// Stiffness ratios from one acquisition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    /// κ_blue/κ_ref.
    pub r_blue: f64,
    /// κ_red/κ_ref.
    pub r_red: f64,
    pub f660_start: f64,
    pub f660_end: f64,
    pub f_blue: f64,
    pub f_ref: f64,
    pub f_red: f64,
    pub rejection: Option<Rejection>,
}

impl RatioSample {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }

    fn failed(reason: String) -> Self {
        Self {
            r_blue: f64::NAN,
            r_red: f64::NAN,
            f660_start: f64::NAN,
            f660_end: f64::NAN,
            f_blue: f64::NAN,
            f_ref: f64::NAN,
            f_red: f64::NAN,
            rejection: Some(Rejection::FitFailure(reason)),
        }
    }
}

/// Accepts iff |f_end − f_start|/f_start < 10 %.
pub fn ten_percent_rule(f_start: f64, f_end: f64) -> bool {
    ((f_end - f_start) / f_start).abs() < TEN_PERCENT
}

/// κ_blue/κ_ref = (f_blue − f_660)/(f_ref − f_660) and likewise for red,
/// with f_660 the mean of the first and last 660-only segments.
pub fn ratios_from_corner_frequencies(
    f660_start: f64,
    f_blue: f64,
    f_ref: f64,
    f_red: f64,
    f660_end: f64,
) -> RatioSample {
    let f660 = 0.5 * (f660_start + f660_end);
    let denom = f_ref - f660;
    RatioSample {
        r_blue: (f_blue - f660) / denom,
        r_red: (f_red - f660) / denom,
        f660_start,
        f660_end,
        f_blue,
        f_ref,
        f_red,
        rejection: (!ten_percent_rule(f660_start, f660_end)).then_some(Rejection::TenPercentRule),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub welch: WelchConfig,
    pub fit: FitWindow,
}

/// Fits every segment of `acq` and forms the ratio sample. A failed fit
/// yields a rejected sample that names the segment.
pub fn extract_ratios(acq: &SegmentedAcquisition, config: &AnalysisConfig) -> Result<RatioSample> {
    let order = acq.segments.iter().map(|s| s.lasers).collect::<Vec<_>>();
    if order != LaserSet::SEQUENCE {
        return Err(Error::Format(
            "acquisition must follow the 660, blue, ref, red, 660 sequence".into(),
        ));
    }
    let mut f = [0.0; 5];
    for (i, slot) in f.iter_mut().enumerate() {
        let fitted = welch(acq.segment_samples(i), acq.dt, &config.welch)
            .and_then(|psd| fit_lorentzian_with(&psd, &config.fit));
        match fitted {
            Ok(fit) => *slot = fit.f_c,
            Err(e) if e.is_numerical() => {
                return Ok(RatioSample::failed(format!(
                    "segment {} ({}): {e}",
                    i + 1,
                    acq.segments[i].lasers
                )))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ratios_from_corner_frequencies(f[0], f[1], f[2], f[3], f[4]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_percent_boundary() {
        assert!(ten_percent_rule(400.0, 400.0));
        assert!(ten_percent_rule(400.0, 400.0 * 1.0999));
        assert!(!ten_percent_rule(400.0, 400.0 * 1.1001));
        assert!(!ten_percent_rule(400.0, 400.0 * 0.8999));
    }

    #[test]
    fn equal_probe_frequencies_give_unit_ratios() {
        let r = ratios_from_corner_frequencies(200.0, 380.0, 380.0, 380.0, 200.0);
        assert_eq!((r.r_blue, r.r_red), (1.0, 1.0));
        assert!(r.accepted());
    }

    #[test]
    fn algebraic_ratios_are_exact() {
        let (f660, kb, kr, kref) = (213.0, 187.5, 221.25, 200.0);
        let r = ratios_from_corner_frequencies(f660, f660 + kb, f660 + kref, f660 + kr, f660);
        assert!((r.r_blue - kb / kref).abs() < 1e-12);
        assert!((r.r_red - kr / kref).abs() < 1e-12);
    }
}
