use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coarse::{coarse_grain, CollectiveDomain, Nanodiamond};
use super::dicke::{build_liouvillian, DomainDrive, DEFAULT_DOMAIN_CAP};
use super::steady::{steady_state, SteadyStateChecks};
use crate::quantum::{rabi_frequency, zpl_dipole_moment, DriveField, NvPhotophysics};
use crate::units::HBAR;
use crate::{Error, Result};

/// How the emitter's inhomogeneous dephasing γ_c enters the collective S^z
/// channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingMapping {
    /// Channel rate 2γ_c, so that a one-spin domain dephases at exactly the
    /// single-emitter γ = Γ/2 + γ_c.
    #[default]
    SingleEmitterLinewidth,
    /// Channel rate γ_c as written in the collective master equation.
    Literal,
}

/// Functional form used to continue κ(n) beyond the exact range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtrapolationModel {
    /// κ/n as a polynomial in 1/n, i.e. κ = a·n + b + c/n + … ; tends to the
    /// linear-in-n behaviour of large domains.
    #[default]
    PerSpinInverse,
    /// κ as a polynomial in n.
    Polynomial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectiveConfig {
    /// Domains up to this size are solved exactly.
    pub n_exact: usize,
    /// Sizes solved to build the extrapolation fit.
    pub sample_grid: Vec<usize>,
    pub fit_degree: usize,
    /// Grid points below this size are left out of the fit.
    pub fit_min_n: usize,
    pub extrapolation: ExtrapolationModel,
    /// Hard cap on exact Liouvillian size.
    pub cap: usize,
    pub dephasing: DephasingMapping,
    #[serde(skip)]
    pub checks: SteadyStateChecks,
}

impl Default for CollectiveConfig {
    fn default() -> Self {
        Self {
            n_exact: 80,
            sample_grid: vec![1, 2, 4, 8, 16, 24, 32, 48, 64, 80],
            fit_degree: 3,
            fit_min_n: 16,
            extrapolation: ExtrapolationModel::default(),
            cap: DEFAULT_DOMAIN_CAP,
            dephasing: DephasingMapping::default(),
            checks: SteadyStateChecks::default(),
        }
    }
}

impl CollectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_exact == 0 {
            return Err(Error::invalid("n_exact", "must be at least 1"));
        }
        if self.n_exact > self.cap {
            return Err(Error::invalid("n_exact", "exceeds the domain cap"));
        }
        let grid = self.fit_grid();
        if grid.len() < (self.fit_degree + 1).max(4) {
            return Err(Error::invalid(
                "sample_grid",
                "needs at least max(4, degree + 1) distinct sizes at or above fit_min_n",
            ));
        }
        if self.sample_grid.contains(&0) || *grid.last().unwrap() > self.n_exact {
            return Err(Error::invalid(
                "sample_grid",
                "sizes must lie in [1, n_exact]",
            ));
        }
        Ok(())
    }

    /// Sorted, distinct sample sizes that enter the extrapolation fit.
    pub fn fit_grid(&self) -> Vec<usize> {
        let mut grid: Vec<usize> = self
            .sample_grid
            .iter()
            .copied()
            .filter(|&n| n >= self.fit_min_n)
            .collect();
        grid.sort_unstable();
        grid.dedup();
        grid
    }

    /// Fits the configured model to `(n, κ)` samples.
    pub fn extrapolant(&self, samples: &[(f64, f64)]) -> Result<Extrapolant> {
        let fit = match self.extrapolation {
            ExtrapolationModel::Polynomial => PolynomialFit::fit(samples, self.fit_degree)?,
            ExtrapolationModel::PerSpinInverse => {
                let mapped: Vec<(f64, f64)> =
                    samples.iter().map(|&(n, k)| (1.0 / n, k / n)).collect();
                PolynomialFit::fit(&mapped, self.fit_degree)?
            }
        };
        Ok(Extrapolant {
            model: self.extrapolation,
            fit,
        })
    }
}

/// A fitted κ(n) continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct Extrapolant {
    pub model: ExtrapolationModel,
    pub fit: PolynomialFit,
}

impl Extrapolant {
    pub fn eval(&self, n: f64) -> f64 {
        match self.model {
            ExtrapolationModel::Polynomial => self.fit.eval(n),
            ExtrapolationModel::PerSpinInverse => n * self.fit.eval(1.0 / n),
        }
    }
}

/// Maps emitter constants onto the collective master equation: the S⁻
/// channel decays at the total rate Γ and the S^z channel carries γ_c per
/// `config.dephasing`. The sideband factor η is taken as 1.
pub fn domain_drive(
    phys: &NvPhotophysics,
    detuning: f64,
    rabi: f64,
    config: &CollectiveConfig,
) -> DomainDrive {
    let gamma_collective = match config.dephasing {
        DephasingMapping::SingleEmitterLinewidth => 2.0 * phys.gamma_c,
        DephasingMapping::Literal => phys.gamma_c,
    };
    DomainDrive {
        detuning,
        rabi,
        gamma_bare: phys.gamma_total(),
        gamma_collective,
    }
}

/// Re⟨Σ⁺⟩ for an `n`-spin domain.
pub(crate) fn sigma_plus_re(
    n: usize,
    drive: DomainDrive,
    config: &CollectiveConfig,
) -> Result<f64> {
    let l = build_liouvillian(n, drive, config.cap)?;
    Ok(steady_state(&l, &config.checks)?.sigma_plus_expect.re)
}

/// κ from Re⟨Σ⁺⟩ at the beam center: κ = −ħ·∂ₓ²Ω|₀·Re⟨Σ⁺⟩ with
/// ∂ₓ²Ω|₀ = −2Ω(0)/w₀².
pub(crate) fn stiffness_from_sigma(rabi_center: f64, w0: f64, sigma_plus_re: f64) -> f64 {
    2.0 * HBAR * rabi_center / (w0 * w0) * sigma_plus_re
}

/// Exact stiffness of an `n`-spin domain.
pub fn exact_stiffness(
    n: usize,
    drive: DomainDrive,
    w0: f64,
    config: &CollectiveConfig,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    Ok(stiffness_from_sigma(
        drive.rabi,
        w0,
        sigma_plus_re(n, drive, config)?,
    ))
}

/// Least-squares polynomial in n, fitted on n/scale for conditioning.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialFit {
    pub coefficients: Vec<f64>,
    pub scale: f64,
    pub rms_residual: f64,
}

impl PolynomialFit {
    pub fn fit(samples: &[(f64, f64)], degree: usize) -> Result<Self> {
        let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < (degree + 1).max(4) {
            return Err(Error::InsufficientData(format!(
                "polynomial fit of degree {degree} needs at least {} distinct sizes, got {}",
                (degree + 1).max(4),
                distinct.len()
            )));
        }
        if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(Error::InsufficientData("non-finite sample".into()));
        }
        let scale = distinct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let design = DMatrix::from_fn(samples.len(), degree + 1, |i, j| {
            (samples[i].0 / scale).powi(j as i32)
        });
        let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
        let svd = design.clone().svd(true, true);
        let coeffs = svd
            .solve(&y, 1e-14)
            .map_err(|e| Error::InsufficientData(e.to_string()))?;
        let resid = &design * &coeffs - &y;
        Ok(Self {
            coefficients: coeffs.iter().copied().collect(),
            scale,
            rms_residual: (resid.norm_squared() / samples.len() as f64).sqrt(),
        })
    }

    pub fn eval(&self, n: f64) -> f64 {
        let t = n / self.scale;
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c)
    }
}

/// Fits κ(n) with the model of `config` and evaluates it at `target_n`.
/// Samples below `config.fit_min_n` are ignored.
pub fn extrapolate_stiffness(
    samples: &[(f64, f64)],
    target_n: f64,
    config: &CollectiveConfig,
) -> Result<f64> {
    if !(target_n > 0.0) {
        return Err(Error::invalid("target_n", "must be positive"));
    }
    let used: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|s| s.0 >= config.fit_min_n as f64)
        .collect();
    Ok(config.extrapolant(&used)?.eval(target_n))
}

/// Linear interpolation between the bracketing integer sizes, with κ(0) = 0.
pub(crate) fn bracket<F>(n: f64, mut kappa_at: F) -> Result<f64>
where
    F: FnMut(usize) -> Result<f64>,
{
    if !(n > 0.0) {
        return Ok(0.0);
    }
    let lo = n.floor();
    let frac = n - lo;
    let k_lo = if lo == 0.0 {
        0.0
    } else {
        kappa_at(lo as usize)?
    };
    if frac == 0.0 {
        return Ok(k_lo);
    }
    let k_hi = kappa_at(lo as usize + 1)?;
    Ok(k_lo + frac * (k_hi - k_lo))
}

/// Stiffness contributed by one sub-domain at the beam center.
///
/// Sizes up to `n_exact` are solved exactly; larger domains use a polynomial
/// fit over `sample_grid`. Fractional occupancies interpolate linearly
/// between the two bracketing integer sizes.
pub fn domain_stiffness(
    domain: &CollectiveDomain,
    phys: &NvPhotophysics,
    field: &DriveField,
    config: &CollectiveConfig,
) -> Result<f64> {
    config.validate()?;
    if !(domain.n_coop >= 0.0) {
        return Err(Error::invalid("n_coop", "must be non-negative"));
    }
    let rabi = rabi_frequency(zpl_dipole_moment(phys), &field.at(0.0));
    let drive = domain_drive(phys, field.omega - domain.omega_i, rabi, config);
    let mut fit: Option<Extrapolant> = None;
    bracket(domain.n_coop, |k| {
        if k <= config.n_exact {
            return exact_stiffness(k, drive, field.w0, config);
        }
        if fit.is_none() {
            let samples = config
                .fit_grid()
                .iter()
                .map(|&m| Ok((m as f64, exact_stiffness(m, drive, field.w0, config)?)))
                .collect::<Result<Vec<_>>>()?;
            fit = Some(config.extrapolant(&samples)?);
        }
        Ok(fit.as_ref().expect("fitted above").eval(k as f64))
    })
}

/// κ_q = Σᵢ κᵢ over the coarse-grained domains of `nd`, with the NV
/// transition centred on the crystal's own ZPL.
pub fn ensemble_quantum_stiffness(
    nd: &Nanodiamond,
    phys: &NvPhotophysics,
    field: &DriveField,
    grain_width: f64,
    config: &CollectiveConfig,
) -> Result<f64> {
    let phys = phys.with_omega0(nd.zpl_center);
    let domains = coarse_grain(nd, grain_width)?;
    let parts = domains
        .par_iter()
        .map(|d| domain_stiffness(d, &phys, field, config))
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}
