//! Monte Carlo over nanodiamond populations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{distribution_stats, quantile};
use crate::collective::{Nanodiamond, TableSpec};
use crate::quantum::{NvPhotophysics, DEFAULT_ZPL_WAVELENGTH_NM};
use crate::trap::{self, BeamConfig, QuantumModel, RatioCurve};
use crate::units;
use crate::{Error, Result};

/// Normal distribution restricted to [min, max] by rejection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl TruncatedNormal {
    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.sd >= 0.0 && self.min <= self.mean && self.mean <= self.max) {
            return Err(Error::invalid(name, "needs sd >= 0 and min <= mean <= max"));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean + self.sd * z;
            if (self.min..=self.max).contains(&x) {
                return x;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean_nm: f64,
    pub sd_nm: f64,
}

/// Two-population distribution of crystal-mean ZPL wavelengths. Each
/// component is cut at ±`truncation_sds` standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZplMixture {
    pub components: Vec<MixtureComponent>,
    pub truncation_sds: f64,
}

impl Default for ZplMixture {
    fn default() -> Self {
        let (lo, hi) = (638.2, 639.6);
        let w_hi = (DEFAULT_ZPL_WAVELENGTH_NM - lo) / (hi - lo);
        Self {
            components: vec![
                MixtureComponent {
                    weight: 1.0 - w_hi,
                    mean_nm: lo,
                    sd_nm: 0.25,
                },
                MixtureComponent {
                    weight: w_hi,
                    mean_nm: hi,
                    sd_nm: 0.25,
                },
            ],
            truncation_sds: 4.0,
        }
    }
}

impl ZplMixture {
    pub fn mean_nm(&self) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components
            .iter()
            .map(|c| c.weight * c.mean_nm)
            .sum::<f64>()
            / total
    }

    /// Smallest and largest wavelength that sampling can return.
    pub fn support_nm(&self) -> (f64, f64) {
        self.components
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                let half = self.truncation_sds * c.sd_nm;
                (lo.min(c.mean_nm - half), hi.max(c.mean_nm + half))
            })
    }

    fn validate(&self) -> Result<()> {
        if self.components.is_empty()
            || self
                .components
                .iter()
                .any(|c| !(c.weight >= 0.0 && c.sd_nm >= 0.0 && c.mean_nm > 0.0))
            || !(self.components.iter().map(|c| c.weight).sum::<f64>() > 0.0)
            || !(self.truncation_sds > 0.0)
        {
            return Err(Error::invalid(
                "zpl_center",
                "needs non-negative weights with positive sum, sd >= 0 and a positive truncation",
            ));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = self.components[self.components.len() - 1];
        for c in &self.components {
            if u < c.weight {
                chosen = *c;
                break;
            }
            u -= c.weight;
        }
        let half = self.truncation_sds * chosen.sd_nm;
        TruncatedNormal {
            mean: chosen.mean_nm,
            sd: chosen.sd_nm,
            min: chosen.mean_nm - half,
            max: chosen.mean_nm + half,
        }
        .sample(rng)
    }
}

/// Statistical description of one nanodiamond batch. Sizes are diameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationModel {
    pub size_nm: TruncatedNormal,
    /// NV count N = anchor_count·(d/anchor_diameter)³, rounded, at least 1.
    pub nv_anchor_count: f64,
    pub nv_anchor_diameter_nm: f64,
    pub zpl_center: ZplMixture,
    pub zpl_sigma_nm: TruncatedNormal,
}

impl Default for PopulationModel {
    fn default() -> Self {
        Self::high_nv()
    }
}

impl PopulationModel {
    pub fn high_nv() -> Self {
        Self {
            size_nm: TruncatedNormal {
                mean: 150.0,
                sd: 23.0,
                min: 20.0,
                max: f64::INFINITY,
            },
            nv_anchor_count: 9500.0,
            nv_anchor_diameter_nm: 150.0,
            zpl_center: ZplMixture::default(),
            zpl_sigma_nm: TruncatedNormal {
                mean: 1.82,
                sd: 0.55,
                min: 0.2,
                max: 1.82 + 5.0 * 0.55,
            },
        }
    }

    /// Reference batch of similar size with a handful of NVs per crystal.
    pub fn low_nv() -> Self {
        Self {
            size_nm: TruncatedNormal {
                mean: 168.0,
                sd: 31.0,
                min: 20.0,
                max: f64::INFINITY,
            },
            nv_anchor_count: 3.0,
            nv_anchor_diameter_nm: 168.0,
            ..Self::high_nv()
        }
    }

    /// Every scale collapsed to its mean.
    pub fn without_variance(&self) -> Self {
        let mut m = self.clone();
        m.size_nm.sd = 0.0;
        m.zpl_sigma_nm.sd = 0.0;
        let mean = m.zpl_center.mean_nm();
        m.zpl_center.components = vec![MixtureComponent {
            weight: 1.0,
            mean_nm: mean,
            sd_nm: 0.0,
        }];
        m
    }

    pub fn validate(&self) -> Result<()> {
        self.size_nm.validate("size_nm")?;
        self.zpl_sigma_nm.validate("zpl_sigma_nm")?;
        self.zpl_center.validate()?;
        if !(self.size_nm.min > 0.0) || !(self.zpl_sigma_nm.min >= 0.0) {
            return Err(Error::invalid(
                "population",
                "size and ZPL width lower bounds must be positive",
            ));
        }
        if !(self.nv_anchor_count > 0.0 && self.nv_anchor_diameter_nm > 0.0) {
            return Err(Error::invalid(
                "nv_anchor",
                "count and diameter must be positive",
            ));
        }
        Ok(())
    }

    pub fn nv_count(&self, diameter_nm: f64) -> u64 {
        let n = self.nv_anchor_count * (diameter_nm / self.nv_anchor_diameter_nm).powi(3);
        (n.round() as u64).max(1)
    }

    pub fn nanodiamond(&self, diameter_nm: f64, zpl_nm: f64, zpl_sigma_nm: f64) -> Nanodiamond {
        let center = units::nm(zpl_nm);
        Nanodiamond {
            radius: units::nm(diameter_nm) / 2.0,
            n_nv: self.nv_count(diameter_nm),
            zpl_center: units::wavelength_to_angular(center),
            zpl_sigma: units::wavelength_width_to_angular(units::nm(zpl_sigma_nm), center),
        }
    }

    /// The crystal with every parameter at its mean.
    pub fn mean_nanodiamond(&self) -> Nanodiamond {
        self.nanodiamond(
            self.size_nm.mean,
            self.zpl_center.mean_nm(),
            self.zpl_sigma_nm.mean,
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Nanodiamond {
        let d = self.size_nm.sample(rng);
        let zpl = self.zpl_center.sample(rng);
        let sigma = self.zpl_sigma_nm.sample(rng);
        self.nanodiamond(d, zpl, sigma)
    }
}

/// One draw from `model`, reproducible from `seed`.
pub fn sample_nanodiamond(model: &PopulationModel, seed: u64) -> Nanodiamond {
    model.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_trials: usize,
    /// Γ_grains, angular.
    pub grain_width: f64,
    pub lambda_ref: f64,
    /// Standard deviation of the measurement scatter added to the low-NV
    /// control ratios.
    pub control_noise: f64,
    /// Largest tolerated fraction of failed trials.
    pub max_failure_rate: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            grain_width: units::angular(100.0 * units::GHZ),
            lambda_ref: units::nm(trap::DEFAULT_REFERENCE_WAVELENGTH_NM),
            control_noise: 0.01,
            max_failure_rate: 0.01,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 100 {
            return Err(Error::invalid("n_trials", "at least 100 trials required"));
        }
        if !(self.grain_width > 0.0 && self.lambda_ref > 0.0 && self.control_noise >= 0.0) {
            return Err(Error::invalid(
                "mc",
                "grain width and reference wavelength must be positive, control noise non-negative",
            ));
        }
        if !(0.0..1.0).contains(&self.max_failure_rate) {
            return Err(Error::invalid("max_failure_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Ξ statistics at one wavelength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiBand {
    pub lambda_nm: f64,
    pub xi_mean: f64,
    pub xi_lo90: f64,
    pub xi_hi90: f64,
    pub skewness: f64,
    /// Skewness of the noisy low-NV control ratio.
    pub control_skewness: f64,
    pub n_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub bands: Vec<XiBand>,
    pub seed: u64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub grain_width_ghz: f64,
    /// Ξ of every successful trial, indexed [wavelength][trial].
    #[serde(skip)]
    pub xi_samples: Vec<Vec<f64>>,
    /// High-NV ratios of every successful trial, indexed [wavelength][trial].
    #[serde(skip)]
    pub ratio_samples: Vec<Vec<f64>>,
}

impl McResult {
    /// Fraction of the entries of `experiments` (indexed [trial][wavelength])
    /// that fall inside the 90 % band.
    pub fn coverage(&self, experiments: &[Vec<f64>]) -> Result<f64> {
        let mut inside = 0usize;
        let mut total = 0usize;
        for e in experiments {
            if e.len() != self.bands.len() {
                return Err(Error::GridMismatch(
                    "experiment and band lengths differ".into(),
                ));
            }
            for (x, b) in e.iter().zip(&self.bands) {
                total += 1;
                inside += usize::from(b.xi_lo90 <= *x && *x <= b.xi_hi90);
            }
        }
        if total == 0 {
            return Err(Error::InsufficientData("no experiments".into()));
        }
        Ok(inside as f64 / total as f64)
    }
}

struct Trial {
    xi: Vec<f64>,
    ratio_high: Vec<f64>,
    control: Vec<f64>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn ratio_curve(
    nd: &Nanodiamond,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    wavelengths: &[f64],
    lambda_ref: f64,
    model: QuantumModel<'_>,
) -> Result<RatioCurve> {
    let curve = wavelengths
        .iter()
        .map(|&w| trap::stiffness_at(nd, phys, &beam.with_wavelength(w), lambda_ref, model))
        .collect::<Result<Vec<_>>>()?;
    RatioCurve::from_breakdowns(&curve, lambda_ref)
}

/// Ξ(λ) of a pair of crystals.
pub fn xi_for_pair(
    high: &Nanodiamond,
    low: &Nanodiamond,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    wavelengths: &[f64],
    lambda_ref: f64,
    model: QuantumModel<'_>,
) -> Result<(Vec<f64>, RatioCurve, RatioCurve)> {
    let rh = ratio_curve(high, phys, beam, wavelengths, lambda_ref, model)?;
    let rl = ratio_curve(low, phys, beam, wavelengths, lambda_ref, model)?;
    let xi = trap::xi_curve(&rh, &rl)?.into_iter().map(|p| p.1).collect();
    Ok((xi, rh, rl))
}

/// Draws `n_trials` (high-NV, low-NV) crystal pairs and reduces their Ξ
/// curves to mean, empirical 5th/95th percentiles and skewness. Trial `t`
/// uses its own stream of the seeded generator, so results do not depend on
/// scheduling.
#[allow(clippy::too_many_arguments)]
pub fn run_mc(
    high: &PopulationModel,
    low: &PopulationModel,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    wavelengths: &[f64],
    config: &McConfig,
    model: QuantumModel<'_>,
    seed: u64,
) -> Result<McResult> {
    config.validate()?;
    high.validate()?;
    low.validate()?;
    beam.validate()?;
    let noise = Normal::new(0.0, config.control_noise)
        .map_err(|e| Error::invalid("control_noise", e.to_string()))?;
    let model = with_grain(model, config.grain_width);

    let outcomes: Vec<Result<Trial>> = (0..config.n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let nd_high = high.sample(&mut rng);
            let nd_low = low.sample(&mut rng);
            let (xi, rh, rl) = xi_for_pair(
                &nd_high,
                &nd_low,
                phys,
                beam,
                wavelengths,
                config.lambda_ref,
                model,
            )?;
            let control = rl
                .ratios
                .iter()
                .map(|r| r + noise.sample(&mut rng))
                .collect();
            Ok(Trial {
                xi,
                ratio_high: rh.ratios,
                control,
            })
        })
        .collect();

    let mut trials = Vec::with_capacity(outcomes.len());
    let mut n_failed = 0;
    for outcome in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) if e.is_numerical() => {
                log::warn!("Monte Carlo trial failed: {e}");
                n_failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if n_failed as f64 > config.max_failure_rate * config.n_trials as f64 {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total: config.n_trials,
        });
    }

    let column = |i: usize, pick: fn(&Trial) -> &Vec<f64>| -> Vec<f64> {
        trials.iter().map(|t| pick(t)[i]).collect()
    };
    let mut bands = Vec::with_capacity(wavelengths.len());
    let mut xi_samples = Vec::with_capacity(wavelengths.len());
    let mut ratio_samples = Vec::with_capacity(wavelengths.len());
    for (i, &w) in wavelengths.iter().enumerate() {
        let xi = column(i, |t| &t.xi);
        let st = distribution_stats(&xi)?;
        let control = distribution_stats(&column(i, |t| &t.control))?;
        bands.push(XiBand {
            lambda_nm: units::to_nm(w),
            xi_mean: st.mean,
            xi_lo90: quantile(&xi, 0.05)?,
            xi_hi90: quantile(&xi, 0.95)?,
            skewness: st.skewness,
            control_skewness: control.skewness,
            n_trials: xi.len(),
        });
        xi_samples.push(xi);
        ratio_samples.push(column(i, |t| &t.ratio_high));
    }
    Ok(McResult {
        bands,
        seed,
        n_trials: config.n_trials,
        n_failed,
        grain_width_ghz: config.grain_width / units::angular(units::GHZ),
        xi_samples,
        ratio_samples,
    })
}

fn with_grain(model: QuantumModel<'_>, grain_width: f64) -> QuantumModel<'_> {
    match model {
        QuantumModel::Collective { config, .. } => QuantumModel::Collective {
            grain_width,
            config,
        },
        QuantumModel::Tabulated { config, table, .. } => QuantumModel::Tabulated {
            grain_width,
            config,
            table,
        },
        other => other,
    }
}

/// Table layout that covers every crystal `high` or `low` can produce.
pub fn mc_table_spec(
    high: &PopulationModel,
    low: &PopulationModel,
    phys: &NvPhotophysics,
    beam: &BeamConfig,
    wavelengths: &[f64],
    grain_width: f64,
) -> TableSpec {
    let (lo_nm, hi_nm) = [high, low]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, m| {
            let (a, b) = m.zpl_center.support_nm();
            (acc.0.min(a), acc.1.max(b))
        });
    let sigma_max = [high, low]
        .iter()
        .map(|m| {
            let s = m
                .zpl_sigma_nm
                .max
                .min(m.zpl_sigma_nm.mean + 8.0 * m.zpl_sigma_nm.sd);
            units::wavelength_width_to_angular(units::nm(s), units::nm(lo_nm))
        })
        .fold(0.0, f64::max);
    let centers = (
        units::wavelength_to_angular(units::nm(hi_nm)),
        units::wavelength_to_angular(units::nm(lo_nm)),
    );
    trap::sweep_table_spec(phys, beam, wavelengths, centers, sigma_max, grain_width)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrainFit {
    /// Best grain width, angular.
    pub best: f64,
    /// (grain width, sum of squared residuals) for every candidate.
    pub objective: Vec<(f64, f64)>,
}

/// Least-squares scan of `evaluate(width)` against `targets` over the
/// candidate grain widths.
pub fn fit_grain_width<F>(targets: &[f64], candidates: &[f64], evaluate: F) -> Result<GrainFit>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::invalid(
            "candidates",
            "at least one grain width required",
        ));
    }
    let objective = candidates
        .par_iter()
        .map(|&w| {
            let model = evaluate(w)?;
            if model.len() != targets.len() {
                return Err(Error::GridMismatch(
                    "model and target curves differ in length".into(),
                ));
            }
            Ok((
                w,
                model
                    .iter()
                    .zip(targets)
                    .map(|(m, t)| (m - t).powi(2))
                    .sum::<f64>(),
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let best = objective
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
        .expect("candidates are non-empty");
    Ok(GrainFit { best, objective })
}
