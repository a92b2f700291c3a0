use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};
use std::f64::consts::SQRT_2;

use crate::{Error, Result};

/// One nanocrystal. Frequencies are angular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nanodiamond {
    pub radius: f64,
    pub n_nv: u64,
    /// Crystal-mean ZPL transition ω₀.
    pub zpl_center: f64,
    /// Gaussian spread σ_ZPL of NV transitions inside the crystal.
    pub zpl_sigma: f64,
}

impl Nanodiamond {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::invalid("radius", "must be positive"));
        }
        if self.n_nv == 0 {
            return Err(Error::invalid("n_nv", "needs at least one NV"));
        }
        if !(self.zpl_sigma >= 0.0) {
            return Err(Error::invalid("zpl_sigma", "must be non-negative"));
        }
        if !(self.zpl_center > 0.0) {
            return Err(Error::invalid("zpl_center", "must be positive"));
        }
        Ok(())
    }
}

/// A spectral grain treated as one Dicke ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveDomain {
    pub index: i64,
    /// ω_i = ω₀ + i·Γ_grains.
    pub omega_i: f64,
    /// Expected NV count N_Coop^i; fractional.
    pub n_coop: f64,
}

/// P(a < Z < b) for a standard normal Z, without cancellation in the tails.
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    let (x, y) = (a / SQRT_2, b / SQRT_2);
    if x >= 0.0 {
        0.5 * (erfc(x) - erfc(y))
    } else if y <= 0.0 {
        0.5 * (erfc(-y) - erfc(-x))
    } else {
        0.5 * (erf(y) - erf(x))
    }
}

/// Splits the Gaussian ZPL distribution of `nd` into grains of width
/// `grain_width` centred on ω₀ + i·Γ_grains, keeping grains whose centre lies
/// within ±4σ_ZPL. Each grain holds the Gaussian mass of
/// [ω_i − Γ/2, ω_i + Γ/2] times N.
///
/// A vanishing σ_ZPL, or a grain wider than the ±4σ window, degenerates to a
/// single domain at ω₀.
pub fn coarse_grain(nd: &Nanodiamond, grain_width: f64) -> Result<Vec<CollectiveDomain>> {
    if !(grain_width > 0.0 && grain_width.is_finite()) {
        return Err(Error::invalid("grain_width", "must be positive and finite"));
    }
    nd.validate()?;
    let n = nd.n_nv as f64;
    if nd.zpl_sigma == 0.0 {
        return Ok(vec![CollectiveDomain {
            index: 0,
            omega_i: nd.zpl_center,
            n_coop: n,
        }]);
    }
    let sigma = nd.zpl_sigma;
    let half_range = (4.0 * sigma / grain_width).floor() as i64;
    Ok((-half_range..=half_range)
        .map(|i| {
            let lo = (i as f64 - 0.5) * grain_width / sigma;
            let hi = (i as f64 + 0.5) * grain_width / sigma;
            CollectiveDomain {
                index: i,
                omega_i: nd.zpl_center + i as f64 * grain_width,
                n_coop: n * normal_mass(lo, hi),
            }
        })
        .collect())
}

/// Mean size of the domains that hold at least one NV after rounding
/// (N_Coop ≥ ½).
pub fn mean_occupied_domain_size(domains: &[CollectiveDomain]) -> f64 {
    let occupied: Vec<f64> = domains
        .iter()
        .map(|d| d.n_coop)
        .filter(|&n| n >= 0.5)
        .collect();
    if occupied.is_empty() {
        return 0.0;
    }
    occupied.iter().sum::<f64>() / occupied.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units;

    fn gaussian_bin_quadrature(n: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
        // Composite Gauss–Legendre (5 points) on 400 panels.
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 400;
        let h = (hi - lo) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let t = mid + x * h / 2.0;
                total += w * h / 2.0 * (-(t * t) / (2.0 * sigma * sigma)).exp();
            }
        }
        n * total / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn nd(n: u64, sigma: f64) -> Nanodiamond {
        Nanodiamond {
            radius: 75e-9,
            n_nv: n,
            zpl_center: units::wavelength_to_angular(units::nm(639.08)),
            zpl_sigma: sigma,
        }
    }

    #[test]
    fn counts_match_quadrature() {
        let sigma = units::angular(500e9);
        let grain = units::angular(100e9);
        let domains = coarse_grain(&nd(1000, sigma), grain).unwrap();
        assert_eq!(domains.len(), 41);
        for d in &domains {
            let lo = (d.index as f64 - 0.5) * grain;
            let hi = (d.index as f64 + 0.5) * grain;
            let q = gaussian_bin_quadrature(1000.0, sigma, lo, hi);
            assert!(
                ((d.n_coop - q) / q).abs() < 1e-9,
                "domain {}: {} vs {}",
                d.index,
                d.n_coop,
                q
            );
        }
    }

    #[test]
    fn zero_spread_gives_one_domain() {
        let domains = coarse_grain(&nd(9500, 0.0), units::angular(100e9)).unwrap();
        assert_eq!(domains.len(), 1);
        assert_eq!(domains[0].n_coop, 9500.0);
        assert_eq!(domains[0].omega_i, nd(1, 0.0).zpl_center);
    }

    #[test]
    fn very_wide_grain_collapses_to_center() {
        let sigma = units::angular(1e12);
        let domains = coarse_grain(&nd(9500, sigma), 1e3 * sigma).unwrap();
        assert_eq!(domains.len(), 1);
        assert!((domains[0].n_coop - 9500.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_grain() {
        assert!(coarse_grain(&nd(10, 1.0), 0.0).is_err());
        assert!(coarse_grain(&nd(10, 1.0), -1.0).is_err());
    }

    #[test]
    fn mass_is_conserved_over_the_window() {
        for (sigma_thz, grain_ghz) in [(1.336, 100.0), (0.5, 37.0), (2.0, 250.0)] {
            let sigma = units::angular(sigma_thz * 1e12);
            let grain = units::angular(grain_ghz * 1e9);
            let domains = coarse_grain(&nd(9500, sigma), grain).unwrap();
            let k = domains.last().unwrap().index as f64;
            let edge = (k + 0.5) * grain / (sigma * SQRT_2);
            let expect = 9500.0 * erf(edge);
            let total: f64 = domains.iter().map(|d| d.n_coop).sum();
            assert!(((total - expect) / expect).abs() < 1e-9);
            assert!(total <= 9500.0 && total >= 0.99993 * 9500.0 * erf(4.0 / SQRT_2) * 0.999);
        }
    }

    #[test]
    fn nominal_crystal_gives_about_95_nv_per_domain() {
        let center = units::nm(639.08);
        let sigma = units::wavelength_width_to_angular(units::nm(1.82), center);
        let mut d = nd(9500, sigma);
        d.zpl_center = units::wavelength_to_angular(center);
        let domains = coarse_grain(&d, units::angular(100e9)).unwrap();
        let mean = mean_occupied_domain_size(&domains);
        assert!((mean - 95.0).abs() <= 10.0, "mean {mean}");
    }
}
