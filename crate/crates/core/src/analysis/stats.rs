use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub n: usize,
    pub mean: f64,
    /// s/√n with the n−1 sample standard deviation.
    pub standard_error: f64,
    /// Adjusted Fisher–Pearson coefficient G₁.
    pub skewness: f64,
}

/// Mean, standard error and bias-corrected skewness, accumulated
/// sequentially so the result does not depend on thread count.
pub fn distribution_stats(samples: &[f64]) -> Result<DistributionStats> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "skewness needs at least 3 samples, got {n}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples", "must be finite"));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (m2, m3) = samples.iter().fold((0.0, 0.0), |(s2, s3), &x| {
        let d = x - mean;
        (s2 + d * d, s3 + d * d * d)
    });
    let (m2, m3) = (m2 / nf, m3 / nf);
    let tiny = f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE);
    if m2.sqrt() <= tiny {
        return Ok(DistributionStats {
            n,
            mean,
            standard_error: 0.0,
            skewness: 0.0,
        });
    }
    let sample_var = m2 * nf / (nf - 1.0);
    let g1 = m3 / m2.powf(1.5);
    Ok(DistributionStats {
        n,
        mean,
        standard_error: (sample_var / nf).sqrt(),
        skewness: g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0),
    })
}

/// Empirical quantile with linear interpolation between order statistics
/// (the default "type 7" definition). `q` in [0, 1].
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "quantile of an empty sample".into(),
        ));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("q", "must lie in [0, 1]"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}
