//! Rayleigh trap stiffness, its NV contribution, wavelength sweeps and the
//! normalised observables built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::collective::{
    coarse_grain, ensemble_quantum_stiffness, CollectiveConfig, Nanodiamond, StiffnessTable,
    TableSpec,
};
use crate::quantum::{
    rabi_frequency, saturation_parameter, zpl_dipole_moment, DriveField, NvPhotophysics,
};
use crate::units::{self, EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::{Error, Result};

pub const WATER_INDEX: f64 = 1.33;
pub const DEFAULT_REFERENCE_WAVELENGTH_NM: f64 = 639.13;
pub const DEFAULT_WAIST_NM: f64 = 470.0;
pub const DEFAULT_WAIST_WAVELENGTH_NM: f64 = 640.0;
pub const DEFAULT_POWER_MW: f64 = 4.0;

/// Dependence of the focal waist on wavelength.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaistLaw {
    Constant,
    /// w₀(λ) = w₀_ref·λ/λ_ref, the diffraction-limited scaling.
    #[default]
    LinearInWavelength,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub wavelength: f64,
    pub power: f64,
    /// Waist measured at `w0_ref_wavelength`.
    pub w0_ref: f64,
    pub w0_ref_wavelength: f64,
    /// Refractive index n₂ of the surrounding medium.
    pub n_medium: f64,
    pub waist_law: WaistLaw,
    /// Relative change of the matrix stiffness per metre of wavelength,
    /// applied about the reference wavelength of a sweep. Zero disables it.
    pub chromatic_slope: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            wavelength: units::nm(DEFAULT_REFERENCE_WAVELENGTH_NM),
            power: DEFAULT_POWER_MW * units::MW,
            w0_ref: units::nm(DEFAULT_WAIST_NM),
            w0_ref_wavelength: units::nm(DEFAULT_WAIST_WAVELENGTH_NM),
            n_medium: WATER_INDEX,
            waist_law: WaistLaw::default(),
            chromatic_slope: 0.0,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid("wavelength", "must be positive"));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::invalid("power", "must be non-negative"));
        }
        if !(self.w0_ref > 0.0 && self.w0_ref_wavelength > 0.0) {
            return Err(Error::invalid(
                "w0_ref",
                "waist and its wavelength must be positive",
            ));
        }
        if !(self.n_medium > 0.0) {
            return Err(Error::invalid("n_medium", "must be positive"));
        }
        if !self.chromatic_slope.is_finite() {
            return Err(Error::invalid("chromatic_slope", "must be finite"));
        }
        Ok(())
    }

    pub fn with_wavelength(self, wavelength: f64) -> Self {
        Self { wavelength, ..self }
    }

    pub fn waist(&self) -> f64 {
        match self.waist_law {
            WaistLaw::Constant => self.w0_ref,
            WaistLaw::LinearInWavelength => self.w0_ref * self.wavelength / self.w0_ref_wavelength,
        }
    }

    pub fn omega(&self) -> f64 {
        units::wavelength_to_angular(self.wavelength)
    }

    /// Drive field seen by an emitter at the beam center.
    pub fn drive_field(&self) -> DriveField {
        DriveField {
            omega: self.omega(),
            e0: field_amplitude(self),
            x: 0.0,
            w0: self.waist(),
        }
    }
}

/// E₀ = √(4P/(πw₀²n₂ε₀c)).
pub fn field_amplitude(beam: &BeamConfig) -> f64 {
    let w0 = beam.waist();
    (4.0 * beam.power / (PI * w0 * w0 * beam.n_medium * EPSILON_0 * SPEED_OF_LIGHT)).sqrt()
}

/// Whether a sphere of `radius` is small enough for the point-dipole
/// (Rayleigh) picture at `wavelength`.
pub fn rayleigh_valid(radius: f64, wavelength: f64) -> bool {
    radius <= wavelength / 4.0
}

/// κ_cl = (4πε₀n₂R³/w₀²)·((m²−1)/(m²+2))·E₀² with m = n_host/n₂.
pub fn classical_stiffness(radius: f64, beam: &BeamConfig, n_host: f64) -> f64 {
    if !rayleigh_valid(radius, beam.wavelength) {
        log::warn!(
            "radius {:.1} nm exceeds a quarter wavelength; the Rayleigh stiffness is unreliable",
            units::to_nm(radius)
        );
    }
    let m2 = (n_host / beam.n_medium).powi(2);
    let w0 = beam.waist();
    let e0 = field_amplitude(beam);
    4.0 * PI * EPSILON_0 * beam.n_medium * radius.powi(3) / (w0 * w0) * (m2 - 1.0) / (m2 + 2.0)
        * e0
        * e0
}

/// κ_q = −N·(ħΔ/2η)·(Γ/2γ)·(4/w₀²)·s₀/(1+s₀) for N identical emitters at the
/// crystal's mean ZPL, Δ = ω − ω₀.
pub fn independent_quantum_stiffness(
    nd: &Nanodiamond,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
) -> f64 {
    let phys = phys.with_omega0(nd.zpl_center);
    let field = beam.drive_field();
    let s0 = saturation_parameter(&phys, &field);
    let delta = field.omega - phys.omega0;
    let w0 = field.w0;
    -(nd.n_nv as f64) * HBAR * delta / (2.0 * phys.eta()) * phys.gamma_total()
        / (2.0 * phys.gamma_transverse())
        * 4.0
        / (w0 * w0)
        * s0
        / (1.0 + s0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StiffnessBreakdown {
    pub wavelength: f64,
    pub kappa_cl: f64,
    pub kappa_q: f64,
    pub kappa_tot: f64,
}

impl StiffnessBreakdown {
    pub fn new(wavelength: f64, kappa_cl: f64, kappa_q: f64) -> Self {
        Self {
            wavelength,
            kappa_cl,
            kappa_q,
            kappa_tot: kappa_cl + kappa_q,
        }
    }
}

/// How the NV contribution to the stiffness is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum QuantumModel<'a> {
    /// Bare diamond matrix.
    None,
    /// N identical, independent emitters.
    Independent,
    /// Exact collective solves per sub-domain.
    Collective {
        grain_width: f64,
        config: &'a CollectiveConfig,
    },
    /// Collective model evaluated through a precomputed surrogate.
    Tabulated {
        grain_width: f64,
        config: &'a CollectiveConfig,
        table: &'a StiffnessTable,
    },
}

/// κ_cl and κ_q at one wavelength. `lambda_ref` anchors the optional
/// chromatic correction of the matrix term.
pub fn stiffness_at(
    nd: &Nanodiamond,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    lambda_ref: f64,
    model: QuantumModel<'_>,
) -> Result<StiffnessBreakdown> {
    beam.validate()?;
    nd.validate()?;
    let chromatic = 1.0 + beam.chromatic_slope * (beam.wavelength - lambda_ref);
    let kappa_cl = classical_stiffness(nd.radius, beam, phys.n_host) * chromatic;
    let kappa_q = match model {
        QuantumModel::None => 0.0,
        QuantumModel::Independent => independent_quantum_stiffness(nd, phys, beam),
        QuantumModel::Collective {
            grain_width,
            config,
        } => ensemble_quantum_stiffness(nd, phys, &beam.drive_field(), grain_width, config)?,
        QuantumModel::Tabulated {
            grain_width,
            config,
            table,
        } => {
            table.ensemble_quantum_stiffness(nd, phys, &beam.drive_field(), grain_width, config)?
        }
    };
    Ok(StiffnessBreakdown::new(beam.wavelength, kappa_cl, kappa_q))
}

/// κ_tot = κ_cl + κ_q over `wavelengths`, evaluated concurrently.
pub fn total_stiffness_curve(
    nd: &Nanodiamond,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    wavelengths: &[f64],
    lambda_ref: f64,
    model: QuantumModel<'_>,
) -> Result<Vec<StiffnessBreakdown>> {
    if let QuantumModel::Collective { grain_width, .. }
    | QuantumModel::Tabulated { grain_width, .. } = model
    {
        coarse_grain(nd, grain_width)?;
    }
    wavelengths
        .par_iter()
        .map(|&w| stiffness_at(nd, phys, &beam.with_wavelength(w), lambda_ref, model))
        .collect()
}

/// Table layout covering every detuning and Rabi frequency met when
/// sweeping `wavelengths` over crystals whose mean ZPL lies in
/// `zpl_centers` (angular, min and max) with spreads up to `zpl_sigma_max`.
pub fn sweep_table_spec(
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    wavelengths: &[f64],
    zpl_centers: (f64, f64),
    zpl_sigma_max: f64,
    grain_width: f64,
) -> TableSpec {
    let (lo, hi) = zpl_centers;
    let mut detuning_max = 0.0f64;
    let mut rabi_min = f64::INFINITY;
    let mut rabi_max = 0.0f64;
    for &w in wavelengths {
        let b = beam.with_wavelength(w);
        let omega = b.omega();
        detuning_max = detuning_max.max((omega - lo).abs()).max((omega - hi).abs());
        for center in [lo, hi] {
            let rabi = rabi_frequency(
                zpl_dipole_moment(&phys.with_omega0(center)),
                &b.drive_field(),
            );
            rabi_min = rabi_min.min(rabi);
            rabi_max = rabi_max.max(rabi);
        }
    }
    let same = (rabi_max - rabi_min) <= 1e-12 * rabi_max;
    TableSpec {
        detuning_max: detuning_max + 4.0 * zpl_sigma_max + grain_width,
        rabi_min,
        rabi_max: if same { rabi_min } else { rabi_max },
        rabi_nodes: if same { 1 } else { 3 },
        ..TableSpec::default()
    }
}

/// κ(λ)/κ(λ_ref) over a wavelength grid that contains λ_ref.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub wavelengths: Vec<f64>,
    pub ratios: Vec<f64>,
    pub lambda_ref: f64,
}

impl RatioCurve {
    /// Normalises `kappas` by its entry at `lambda_ref`, which must be one of
    /// `wavelengths` to within 1e-6 nm.
    pub fn new(wavelengths: &[f64], kappas: &[f64], lambda_ref: f64) -> Result<Self> {
        if wavelengths.len() != kappas.len() {
            return Err(Error::GridMismatch(
                "one stiffness per wavelength required".into(),
            ));
        }
        let reference = reference_index(wavelengths, lambda_ref)?;
        let kappa_ref = kappas[reference];
        if kappa_ref == 0.0 || !kappa_ref.is_finite() {
            return Err(Error::invalid(
                "kappa_ref",
                "reference stiffness must be finite and non-zero",
            ));
        }
        Ok(Self {
            wavelengths: wavelengths.to_vec(),
            ratios: kappas.iter().map(|k| k / kappa_ref).collect(),
            lambda_ref,
        })
    }

    pub fn from_breakdowns(curve: &[StiffnessBreakdown], lambda_ref: f64) -> Result<Self> {
        let wavelengths: Vec<f64> = curve.iter().map(|b| b.wavelength).collect();
        let kappas: Vec<f64> = curve.iter().map(|b| b.kappa_tot).collect();
        Self::new(&wavelengths, &kappas, lambda_ref)
    }
}

fn reference_index(wavelengths: &[f64], lambda_ref: f64) -> Result<usize> {
    wavelengths
        .iter()
        .position(|w| (w - lambda_ref).abs() <= 1e-15)
        .ok_or_else(|| {
            Error::GridMismatch(format!(
                "reference wavelength {:.3} nm is not on the grid",
                units::to_nm(lambda_ref)
            ))
        })
}

/// Ξ(λ) = ratio_high(λ) − ratio_low(λ) as (wavelength, Ξ) pairs.
pub fn xi_curve(high: &RatioCurve, low: &RatioCurve) -> Result<Vec<(f64, f64)>> {
    let same_grid = high.wavelengths.len() == low.wavelengths.len()
        && high
            .wavelengths
            .iter()
            .zip(&low.wavelengths)
            .all(|(a, b)| (a - b).abs() <= 1e-15);
    if !same_grid || high.lambda_ref != low.lambda_ref {
        return Err(Error::GridMismatch(
            "ratio curves must share wavelengths and reference".into(),
        ));
    }
    Ok(high
        .wavelengths
        .iter()
        .zip(high.ratios.iter().zip(&low.ratios))
        .map(|(&w, (h, l))| (w, h - l))
        .collect())
}

/// 629–648 nm in 0.5 nm steps with the reference wavelength inserted.
pub fn default_wavelength_grid() -> Vec<f64> {
    wavelength_grid(629.0, 648.0, 0.5, DEFAULT_REFERENCE_WAVELENGTH_NM)
}

/// Uniform grid from `start_nm` to `stop_nm` (inclusive) in metres, with
/// `reference_nm` inserted in order if not already present.
pub fn wavelength_grid(start_nm: f64, stop_nm: f64, step_nm: f64, reference_nm: f64) -> Vec<f64> {
    let count = ((stop_nm - start_nm) / step_nm + 1e-9).floor() as usize;
    let mut grid_nm: Vec<f64> = (0..=count).map(|k| start_nm + k as f64 * step_nm).collect();
    if !grid_nm.iter().any(|w| (w - reference_nm).abs() < 1e-9) {
        grid_nm.push(reference_nm);
        grid_nm.sort_by(f64::total_cmp);
    }
    grid_nm.into_iter().map(units::nm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// E₀ for P = 4 mW, w₀ = 470 nm, n₂ = 1.33, evaluated independently with
    /// mpmath at 30 digits.
    const GOLDEN_E0: f64 = 2_555_504.559_500_075;

    fn beam() -> BeamConfig {
        BeamConfig {
            wavelength: units::nm(640.0),
            ..Default::default()
        }
    }

    #[test]
    fn field_amplitude_golden_value() {
        let e0 = field_amplitude(&beam());
        assert!((e0 - GOLDEN_E0).abs() / GOLDEN_E0 < 1e-12, "{e0:e}");
    }

    #[test]
    fn field_amplitude_scaling() {
        let zero = BeamConfig {
            power: 0.0,
            ..beam()
        };
        assert_eq!(field_amplitude(&zero), 0.0);
        let quad = BeamConfig {
            power: 4.0 * beam().power,
            ..beam()
        };
        assert!((field_amplitude(&quad) / field_amplitude(&beam()) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn classical_stiffness_scalings() {
        let b = beam();
        let k = classical_stiffness(75e-9, &b, 2.4);
        assert!(k > 0.0);
        assert!((classical_stiffness(150e-9, &b, 2.4) / k - 8.0).abs() < 1e-12);
        assert_eq!(classical_stiffness(75e-9, &b, b.n_medium), 0.0);
        let doubled = BeamConfig {
            power: 2.0 * b.power,
            ..b
        };
        assert!((classical_stiffness(75e-9, &doubled, 2.4) / k - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_waist_gives_decreasing_matrix_stiffness() {
        let grid = default_wavelength_grid();
        let kappas: Vec<f64> = grid
            .iter()
            .map(|&w| classical_stiffness(75e-9, &beam().with_wavelength(w), 2.4))
            .collect();
        assert!(kappas.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn grid_contains_reference() {
        let grid = default_wavelength_grid();
        assert_eq!(grid.len(), 40);
        assert!(grid.contains(&units::nm(DEFAULT_REFERENCE_WAVELENGTH_NM)));
        assert!(grid.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn ratio_is_one_at_reference_and_xi_vanishes() {
        let grid = default_wavelength_grid();
        let lambda_ref = units::nm(DEFAULT_REFERENCE_WAVELENGTH_NM);
        let kappas: Vec<f64> = grid
            .iter()
            .map(|w| 1e-6 * (1.0 + 1e5 * (w - 630e-9)).sqrt())
            .collect();
        let curve = RatioCurve::new(&grid, &kappas, lambda_ref).unwrap();
        let i = grid.iter().position(|&w| w == lambda_ref).unwrap();
        assert_eq!(curve.ratios[i], 1.0);
        let xi = xi_curve(&curve, &curve).unwrap();
        assert!(xi.iter().all(|&(_, x)| x == 0.0));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let grid = default_wavelength_grid();
        let lambda_ref = units::nm(DEFAULT_REFERENCE_WAVELENGTH_NM);
        let a = RatioCurve::new(&grid, &vec![1.0; grid.len()], lambda_ref).unwrap();
        let b = RatioCurve::new(&grid[1..], &vec![1.0; grid.len() - 1], lambda_ref).unwrap();
        assert!(matches!(xi_curve(&a, &b), Err(Error::GridMismatch(_))));
        assert!(RatioCurve::new(&grid, &vec![1.0; grid.len()], units::nm(700.0)).is_err());
    }
}
