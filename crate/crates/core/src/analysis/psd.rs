use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Welch estimator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fractional overlap of consecutive segments, in [0, 1).
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 1 << 14,
            overlap: 0.5,
        }
    }
}

/// One-sided power spectral density.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub df: f64,
    pub segments: usize,
}

impl PowerSpectrum {
    pub fn nyquist(&self) -> f64 {
        *self.frequencies.last().unwrap_or(&0.0)
    }

    /// ∫ P(f) df over the one-sided spectrum.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df
    }
}

/// Welch estimate with the default settings: 2¹⁴-sample Hann segments with
/// 50 % overlap, mean removed per segment, density scaling.
pub fn power_spectrum(samples: &[f64], dt: f64) -> Result<PowerSpectrum> {
    welch(samples, dt, &WelchConfig::default())
}

pub fn welch(samples: &[f64], dt: f64, config: &WelchConfig) -> Result<PowerSpectrum> {
    let n = config.segment_len;
    if n < 4 || !(0.0..1.0).contains(&config.overlap) {
        return Err(Error::invalid(
            "welch",
            "segment length >= 4 and overlap in [0, 1) required",
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if samples.len() < n {
        return Err(Error::InsufficientData(format!(
            "power spectrum needs at least {n} samples, got {}",
            samples.len()
        )));
    }
    let step = ((n as f64) * (1.0 - config.overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fs = 1.0 / dt;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut accum = vec![0.0; bins];
    let mut buffer = vec![Complex64::new(0.0, 0.0); n];
    let mut segments = 0;
    let mut start = 0;
    while start + n <= samples.len() {
        let chunk = &samples[start..start + n];
        let mean = chunk.iter().sum::<f64>() / n as f64;
        for ((b, &x), &w) in buffer.iter_mut().zip(chunk).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buffer);
        for (a, b) in accum.iter_mut().zip(&buffer) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * window_power * segments as f64);
    let power = accum
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    let df = fs / n as f64;
    Ok(PowerSpectrum {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        power,
        df,
        segments,
    })
}
