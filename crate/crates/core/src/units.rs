//! Physical constants (CODATA 2018) and the unit conversions used at the
//! crate's boundaries. Everything past these helpers is SI.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub const NM: f64 = 1e-9;
pub const MW: f64 = 1e-3;
pub const GHZ: f64 = 1e9;
pub const THZ: f64 = 1e12;
pub const MHZ: f64 = 1e6;

pub fn nm(value: f64) -> f64 {
    value * NM
}

pub fn to_nm(meters: f64) -> f64 {
    meters / NM
}

/// Angular frequency 2πf for a frequency in Hz.
pub fn angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// Vacuum wavelength (m) to angular frequency (rad/s).
pub fn wavelength_to_angular(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

pub fn angular_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

/// Converts a small spectral width in wavelength to angular frequency,
/// linearised about `center` (both in m).
pub fn wavelength_width_to_angular(width: f64, center: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * width / (center * center)
}

pub fn angular_width_to_wavelength(width: f64, center: f64) -> f64 {
    width * center * center / (2.0 * PI * SPEED_OF_LIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_round_trip() {
        let l = nm(639.08);
        let w = wavelength_to_angular(l);
        assert!((angular_to_wavelength(w) - l).abs() < 1e-22);
    }

    #[test]
    fn width_conversion_matches_finite_difference() {
        let c = nm(639.0);
        let dl = nm(0.001);
        let fd = wavelength_to_angular(c - dl / 2.0) - wavelength_to_angular(c + dl / 2.0);
        let lin = wavelength_width_to_angular(dl, c);
        assert!((fd - lin).abs() / lin < 1e-9);
    }
}
