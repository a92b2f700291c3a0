//! Single-emitter dipole physics of the NV⁻ zero-phonon line.
//!
//! The emitter is a three-level system: ground `g`, excited `e` and a lumped
//! phonon-sideband level `p` fed by `e → p` at Γ_SB and emptied by `p → g` at
//! Γ_Ph. Only the ZPL (`e ↔ g`) is driven.

use std::f64::consts::PI;

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::units::{self, EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Free-space-scaled total NV decay rate Γ/(2π) used when none is given.
pub const DEFAULT_TOTAL_RATE_HZ: f64 = 13.0e6;
pub const DEFAULT_DEBYE_WALLER: f64 = 0.04;
pub const DEFAULT_PHONON_RATE_HZ: f64 = 38.0e9;
/// Room-temperature total transverse rate γ/(2π).
pub const DEFAULT_TRANSVERSE_RATE_HZ: f64 = 1.0e12;
pub const DIAMOND_INDEX: f64 = 2.40;
pub const DEFAULT_ZPL_WAVELENGTH_NM: f64 = 639.08;

/// Emitter constants. All rates are angular (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NvPhotophysics {
    pub gamma_zpl: f64,
    pub gamma_sb: f64,
    pub gamma_ph: f64,
    pub gamma_c: f64,
    pub omega0: f64,
    pub debye_waller: f64,
    pub n_host: f64,
}

impl NvPhotophysics {
    /// Splits a total decay rate Γ into ZPL and sideband parts with the given
    /// Debye-Waller factor.
    pub fn from_total_rate(
        gamma_total: f64,
        debye_waller: f64,
        gamma_ph: f64,
        gamma_c: f64,
        omega0: f64,
        n_host: f64,
    ) -> Result<Self> {
        let phys = Self {
            gamma_zpl: debye_waller * gamma_total,
            gamma_sb: (1.0 - debye_waller) * gamma_total,
            gamma_ph,
            gamma_c,
            omega0,
            debye_waller,
            n_host,
        };
        phys.validate()?;
        Ok(phys)
    }

    /// Defaults with γ_c chosen so that the total transverse rate is exactly
    /// 2π·1 THz.
    pub fn with_total_rate(gamma_total: f64) -> Result<Self> {
        Self::from_total_rate(
            gamma_total,
            DEFAULT_DEBYE_WALLER,
            units::angular(DEFAULT_PHONON_RATE_HZ),
            units::angular(DEFAULT_TRANSVERSE_RATE_HZ) - gamma_total / 2.0,
            units::wavelength_to_angular(units::nm(DEFAULT_ZPL_WAVELENGTH_NM)),
            DIAMOND_INDEX,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_zpl", self.gamma_zpl),
            ("gamma_ph", self.gamma_ph),
            ("gamma_c", self.gamma_c),
            ("omega0", self.omega0),
            ("n_host", self.n_host),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.gamma_sb.is_finite() && self.gamma_sb >= 0.0) {
            return Err(Error::invalid("gamma_sb", "must be non-negative"));
        }
        if !(self.debye_waller > 0.0 && self.debye_waller <= 1.0) {
            return Err(Error::invalid("debye_waller", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Γ = Γ_ZPL + Γ_SB.
    pub fn gamma_total(&self) -> f64 {
        self.gamma_zpl + self.gamma_sb
    }

    /// γ = (Γ_ZPL + Γ_SB)/2 + γ_c.
    pub fn gamma_transverse(&self) -> f64 {
        self.gamma_total() / 2.0 + self.gamma_c
    }

    /// Sideband factor η = (2Γ_Ph + Γ_SB)/(2Γ_Ph).
    pub fn eta(&self) -> f64 {
        (2.0 * self.gamma_ph + self.gamma_sb) / (2.0 * self.gamma_ph)
    }

    pub fn with_omega0(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    pub fn zpl_wavelength(&self) -> f64 {
        units::angular_to_wavelength(self.omega0)
    }
}

impl Default for NvPhotophysics {
    fn default() -> Self {
        Self::with_total_rate(units::angular(DEFAULT_TOTAL_RATE_HZ))
            .expect("default photophysics is valid")
    }
}

/// Gaussian drive along the measurement axis, E(x) = E₀·exp(−x²/w₀²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveField {
    pub omega: f64,
    pub e0: f64,
    pub x: f64,
    pub w0: f64,
}

impl DriveField {
    pub fn new(omega: f64, e0: f64, x: f64, w0: f64) -> Result<Self> {
        if !(e0 >= 0.0) {
            return Err(Error::invalid("e0", "field amplitude must be non-negative"));
        }
        if !(w0 > 0.0) {
            return Err(Error::invalid("w0", "waist must be positive"));
        }
        Ok(Self { omega, e0, x, w0 })
    }

    pub fn at(self, x: f64) -> Self {
        Self { x, ..self }
    }

    pub fn profile(&self) -> f64 {
        (-(self.x * self.x) / (self.w0 * self.w0)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochSteadyState {
    pub rho_ee: f64,
    pub rho_gg: f64,
    pub rho_pp: f64,
    /// Rotating-frame coherence ρ̃_eg.
    pub coherence: Complex64,
}

/// d_ZPL = √(Γ_ZPL·3π·ε₀·c³·ħ / (n₁·ω₀³)).
pub fn zpl_dipole_moment(phys: &NvPhotophysics) -> f64 {
    (phys.gamma_zpl * 3.0 * PI * EPSILON_0 * SPEED_OF_LIGHT.powi(3) * HBAR
        / (phys.n_host * phys.omega0.powi(3)))
    .sqrt()
}

/// Ω(x) = √(2/3)·d·E₀·exp(−x²/w₀²)/ħ. The √(2/3) combines the time average
/// of the field (√2) and the orientational average of the dipole (1/√3).
pub fn rabi_frequency(d_zpl: f64, field: &DriveField) -> f64 {
    (2.0f64 / 3.0).sqrt() * d_zpl * field.e0 * field.profile() / HBAR
}

/// Steady state of the three-level optical Bloch equations at drive
/// frequency `omega` and Rabi frequency `rabi`.
///
/// Unknowns are (ρ_ee, ρ_gg, ρ_pp, Re ρ̃_eg, Im ρ̃_eg); the ρ_gg rate
/// equation is redundant with trace conservation and is replaced by
/// ρ_ee + ρ_gg + ρ_pp = 1.
pub fn bloch_steady_state(
    phys: &NvPhotophysics,
    omega: f64,
    rabi: f64,
) -> Result<BlochSteadyState> {
    if !(rabi >= 0.0) {
        return Err(Error::invalid(
            "rabi",
            "Rabi frequency must be non-negative",
        ));
    }
    let delta = omega - phys.omega0;
    let gamma = phys.gamma_transverse();
    let g_tot = phys.gamma_total();
    // Work in units of γ so that all coefficients are O(1).
    let s = gamma;
    let (o, d, gt, gsb, gph, g) = (
        rabi / s,
        delta / s,
        g_tot / s,
        phys.gamma_sb / s,
        phys.gamma_ph / s,
        1.0,
    );
    #[rustfmt::skip]
    let a = Matrix5::new(
        // dρ_ee = −Ω·v − Γ·ρ_ee
        -gt,       0.0,  0.0, 0.0, -o,
        // trace
        1.0,       1.0,  1.0, 0.0, 0.0,
        // dρ_pp = Γ_SB·ρ_ee − Γ_Ph·ρ_pp
        gsb,       0.0, -gph, 0.0, 0.0,
        // d Re ρ̃_eg = −γu − Δv
        0.0,       0.0,  0.0, -g,  -d,
        // d Im ρ̃_eg = −γv + Δu + (Ω/2)(ρ_ee − ρ_gg)
        o / 2.0, -o / 2.0, 0.0, d,  -g,
    );
    let b = Vector5::new(0.0, 1.0, 0.0, 0.0, 0.0);
    let x = a.lu().solve(&b).ok_or(Error::Singular { pivot: 0 })?;
    Ok(BlochSteadyState {
        rho_ee: x[0],
        rho_gg: x[1],
        rho_pp: x[2],
        coherence: Complex64::new(x[3], x[4]),
    })
}

/// s = η·Ω²/[Γγ(1 + Δ²/γ²)].
pub fn saturation_parameter(phys: &NvPhotophysics, field: &DriveField) -> f64 {
    let rabi = rabi_frequency(zpl_dipole_moment(phys), field);
    let gamma = phys.gamma_transverse();
    let delta = field.omega - phys.omega0;
    phys.eta() * rabi * rabi / (phys.gamma_total() * gamma * (1.0 + (delta / gamma).powi(2)))
}

/// (ħΔ/2)·(Γ/2γ)/η, the common prefactor of the analytic force and potential.
fn dispersive_prefactor(phys: &NvPhotophysics, omega: f64) -> f64 {
    let delta = omega - phys.omega0;
    HBAR * delta / 2.0 * phys.gamma_total() / (2.0 * phys.gamma_transverse()) / phys.eta()
}

/// F = −(1/η)(ħΔ/2)(Γ/2γ)·∇s/(1+s) along x. Attractive toward the beam
/// center for red detuning.
pub fn dipole_force_analytic(phys: &NvPhotophysics, field: &DriveField) -> f64 {
    let s = saturation_parameter(phys, field);
    let grad_s = -4.0 * field.x / (field.w0 * field.w0) * s;
    -dispersive_prefactor(phys, field.omega) * grad_s / (1.0 + s)
}

/// U = (1/η)(ħΔ/2)(Γ/2γ)·ln(1+s); negative at the center for red detuning.
pub fn dipole_potential_analytic(phys: &NvPhotophysics, field: &DriveField) -> f64 {
    let s = saturation_parameter(phys, field);
    dispersive_prefactor(phys, field.omega) * s.ln_1p()
}

/// Mean dipole force evaluated from the Bloch coherence,
/// F = −ħ·Re[Ω*·ρ̃_eg]·∂ₓ ln|Ω|.
pub fn dipole_force_from_steady_state(phys: &NvPhotophysics, field: &DriveField) -> Result<f64> {
    let rabi = rabi_frequency(zpl_dipole_moment(phys), field);
    let ss = bloch_steady_state(phys, field.omega, rabi)?;
    let grad_log_rabi = -2.0 * field.x / (field.w0 * field.w0);
    Ok(-HBAR * (rabi * ss.coherence).re * grad_log_rabi)
}
