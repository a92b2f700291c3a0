//! Overdamped Langevin motion of a trapped particle under the five-segment
//! laser sequence of a stiffness-ratio acquisition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::units::BOLTZMANN;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DragModel {
    #[default]
    Stokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidEnvironment {
    pub temperature: f64,
    pub viscosity: f64,
    pub drag_model: DragModel,
}

impl Default for FluidEnvironment {
    fn default() -> Self {
        Self {
            temperature: 295.0,
            viscosity: 8.9e-4,
            drag_model: DragModel::Stokes,
        }
    }
}

impl FluidEnvironment {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return Err(Error::invalid("viscosity", "must be positive"));
        }
        Ok(())
    }

    pub fn thermal_energy(&self) -> f64 {
        BOLTZMANN * self.temperature
    }
}

/// β = 6πμR.
pub fn drag_coefficient(radius: f64, env: &FluidEnvironment) -> Result<f64> {
    env.validate()?;
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    Ok(match env.drag_model {
        DragModel::Stokes => 6.0 * PI * env.viscosity * radius,
    })
}

/// f_c = κ/(2πβ).
pub fn corner_frequency_truth(kappa: f64, beta: f64) -> f64 {
    kappa / (2.0 * PI * beta)
}

/// Relation between a stiffness κ and the linear restoring force −k·x.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestoringConvention {
    /// k = κ, so that κ = 2πβf_c holds for the simulated corner frequency.
    #[default]
    Kappa,
    /// k = 2κ, the force of U = κx².
    TwiceKappa,
}

impl RestoringConvention {
    pub fn restoring_constant(self, kappa: f64) -> f64 {
        match self {
            Self::Kappa => kappa,
            Self::TwiceKappa => 2.0 * kappa,
        }
    }
}

/// √(k_BT/k), the stationary positional spread for restoring constant k.
pub fn equipartition_spread(
    kappa: f64,
    env: &FluidEnvironment,
    convention: RestoringConvention,
) -> f64 {
    (env.thermal_energy() / convention.restoring_constant(kappa)).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    EulerMaruyama,
    /// Exact discretisation of the Ornstein–Uhlenbeck process.
    ExactOu,
}

/// Lasers on during one segment of the acquisition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LaserSet {
    #[serde(rename = "660")]
    Only660,
    #[serde(rename = "660+blue")]
    Blue,
    #[serde(rename = "660+ref")]
    Reference,
    #[serde(rename = "660+red")]
    Red,
}

impl LaserSet {
    pub const SEQUENCE: [LaserSet; 5] = [
        LaserSet::Only660,
        LaserSet::Blue,
        LaserSet::Reference,
        LaserSet::Red,
        LaserSet::Only660,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Only660 => "660",
            Self::Blue => "660+blue",
            Self::Reference => "660+ref",
            Self::Red => "660+red",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [Self::Only660, Self::Blue, Self::Reference, Self::Red]
            .into_iter()
            .find(|l| l.label() == label)
    }
}

impl fmt::Display for LaserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Multiplies κ by `factor` from `time` (s after the start) onward, as when a
/// second particle falls into the trap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyStep {
    pub time: f64,
    pub factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub dt: f64,
    pub segment_duration: f64,
    pub convention: RestoringConvention,
    pub integrator: Integrator,
    /// Standard deviation of white detector noise added to each sample (m).
    pub measurement_noise: f64,
    pub anomaly: Option<AnomalyStep>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            segment_duration: 10.0,
            convention: RestoringConvention::default(),
            integrator: Integrator::default(),
            measurement_noise: 0.0,
            anomaly: None,
        }
    }
}

impl SimulationConfig {
    pub fn samples_per_segment(&self) -> usize {
        (self.segment_duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.segment_duration > 0.0) {
            return Err(Error::invalid("segment_duration", "must be positive"));
        }
        let steps = self.segment_duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::invalid(
                "segment_duration",
                "must be a whole number of time steps",
            ));
        }
        if !(self.measurement_noise >= 0.0) {
            return Err(Error::invalid("measurement_noise", "must be non-negative"));
        }
        if let Some(a) = self.anomaly {
            if !(a.factor > 0.0 && a.time >= 0.0) {
                return Err(Error::invalid(
                    "anomaly",
                    "needs a positive factor and non-negative time",
                ));
            }
        }
        Ok(())
    }

    /// Largest time step the Euler–Maruyama update accepts for stiffness κ:
    /// 0.1·β/(2κ). The exact update has no such limit.
    pub fn max_dt(kappa: f64, beta: f64) -> f64 {
        0.1 * beta / (2.0 * kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lasers: LaserSet,
    pub start: usize,
    pub len: usize,
    pub kappa: f64,
}

/// A recorded trace with its segment layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedAcquisition {
    pub dt: f64,
    pub segments: Vec<Segment>,
    pub samples: Vec<f64>,
}

impl SegmentedAcquisition {
    pub fn segment_samples(&self, index: usize) -> &[f64] {
        let s = &self.segments[index];
        &self.samples[s.start..s.start + s.len]
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Builds the segment table for `samples` split into equal spans in the
    /// standard laser order; `kappas` is recorded as metadata.
    pub fn from_samples(dt: f64, samples: Vec<f64>, kappas: [f64; 5]) -> Result<Self> {
        if samples.len() % 5 != 0 || samples.is_empty() {
            return Err(Error::Format(
                "trace length must split into five equal segments".into(),
            ));
        }
        let len = samples.len() / 5;
        let segments = LaserSet::SEQUENCE
            .iter()
            .zip(kappas)
            .enumerate()
            .map(|(i, (&lasers, kappa))| Segment {
                lasers,
                start: i * len,
                len,
                kappa,
            })
            .collect();
        Ok(Self {
            dt,
            segments,
            samples,
        })
    }
}

struct Stepper {
    decay: f64,
    kick: f64,
}

impl Stepper {
    fn new(k: f64, beta: f64, kt: f64, dt: f64, integrator: Integrator) -> Self {
        match integrator {
            Integrator::EulerMaruyama => Self {
                decay: 1.0 - k * dt / beta,
                kick: (2.0 * kt * dt / beta).sqrt(),
            },
            Integrator::ExactOu => {
                let decay = (-k * dt / beta).exp();
                Self {
                    decay,
                    kick: (kt / k * (1.0 - decay * decay)).sqrt(),
                }
            }
        }
    }
}

/// Integrates β·dx = −k·x·dt + √(2k_BTβ)·dW with k from `config.convention`,
/// one stiffness per segment, starting from the stationary distribution of
/// the first segment. The same seed always yields the same trace.
pub fn simulate_trace(
    kappa_per_segment: [f64; 5],
    radius: f64,
    env: &FluidEnvironment,
    config: &SimulationConfig,
    seed: u64,
) -> Result<SegmentedAcquisition> {
    simulate_segments(
        &kappa_per_segment,
        &LaserSet::SEQUENCE,
        radius,
        env,
        config,
        seed,
    )
}

/// Single-stiffness trace of `n` samples, for calibration studies.
pub fn simulate_stationary(
    kappa: f64,
    n: usize,
    radius: f64,
    env: &FluidEnvironment,
    config: &SimulationConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let config = SimulationConfig {
        segment_duration: n as f64 * config.dt,
        ..*config
    };
    Ok(simulate_segments(&[kappa], &[LaserSet::Only660], radius, env, &config, seed)?.samples)
}

fn simulate_segments(
    kappas: &[f64],
    labels: &[LaserSet],
    radius: f64,
    env: &FluidEnvironment,
    config: &SimulationConfig,
    seed: u64,
) -> Result<SegmentedAcquisition> {
    config.validate()?;
    let beta = drag_coefficient(radius, env)?;
    let kt = env.thermal_energy();
    let per_segment = config.samples_per_segment();
    let step_factor = config.anomaly.map_or(1.0, |a| a.factor.max(1.0));
    for &kappa in kappas {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("kappa", "stiffness must be positive"));
        }
        let limit = SimulationConfig::max_dt(kappa * step_factor, beta);
        if config.integrator == Integrator::EulerMaruyama && config.dt > limit {
            return Err(Error::invalid(
                "dt",
                format!(
                    "time step {:e} s exceeds the stability bound {limit:e} s",
                    config.dt
                ),
            ));
        }
    }
    let anomaly_index = config
        .anomaly
        .map(|a| (a.time / config.dt).round() as usize);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let total = per_segment * kappas.len();
    let mut samples = Vec::with_capacity(total);
    let mut segments = Vec::with_capacity(kappas.len());

    let k_first = config.convention.restoring_constant(kappas[0]);
    let mut x = (kt / k_first).sqrt() * gauss();
    for (s, (&kappa, &lasers)) in kappas.iter().zip(labels).enumerate() {
        segments.push(Segment {
            lasers,
            start: s * per_segment,
            len: per_segment,
            kappa,
        });
        let normal = Stepper::new(
            config.convention.restoring_constant(kappa),
            beta,
            kt,
            config.dt,
            config.integrator,
        );
        let stepped = config.anomaly.map(|a| {
            Stepper::new(
                config.convention.restoring_constant(kappa * a.factor),
                beta,
                kt,
                config.dt,
                config.integrator,
            )
        });
        for i in 0..per_segment {
            let index = s * per_segment + i;
            samples.push(x);
            let step = match (anomaly_index, &stepped) {
                (Some(at), Some(st)) if index >= at => st,
                _ => &normal,
            };
            x = step.decay * x + step.kick * gauss();
        }
    }
    if config.measurement_noise > 0.0 {
        for v in &mut samples {
            *v += config.measurement_noise * gauss();
        }
    }
    Ok(SegmentedAcquisition {
        dt: config.dt,
        segments,
        samples,
    })
}
