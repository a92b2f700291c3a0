//! Run configuration: TOML (or JSON) with unit-suffixed quantities.

use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use nvtrap::analysis::{FitWindow, LofConfig, WelchConfig};
use nvtrap::brownian::{
    DragModel, FluidEnvironment, Integrator, RestoringConvention, SimulationConfig,
};
use nvtrap::collective::CollectiveConfig;
use nvtrap::ensemble::{McConfig, PopulationModel};
use nvtrap::quantum::{self, NvPhotophysics};
use nvtrap::trap::{self, BeamConfig, WaistLaw};
use nvtrap::units;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

/// Invalid or unreadable configuration content (exit status 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub trait Dimension {
    const NAME: &'static str;
    /// Accepted suffixes and their factor to SI.
    const UNITS: &'static [(&'static str, f64)];
}

macro_rules! dimension {
    ($ty:ident, $name:literal, [$(($suffix:literal, $factor:expr)),* $(,)?]) => {
        #[derive(Clone, Copy, Debug, PartialEq)]
        pub enum $ty {}
        impl Dimension for $ty {
            const NAME: &'static str = $name;
            const UNITS: &'static [(&'static str, f64)] = &[$(($suffix, $factor)),*];
        }
    };
}

dimension!(
    Length,
    "length",
    [
        ("nm", 1e-9),
        ("um", 1e-6),
        ("µm", 1e-6),
        ("mm", 1e-3),
        ("m", 1.0)
    ]
);
dimension!(Power, "power", [("uW", 1e-6), ("mW", 1e-3), ("W", 1.0)]);
dimension!(
    Frequency,
    "frequency",
    [
        ("Hz", 1.0),
        ("kHz", 1e3),
        ("MHz", 1e6),
        ("GHz", 1e9),
        ("THz", 1e12)
    ]
);
dimension!(
    Time,
    "time",
    [
        ("ns", 1e-9),
        ("us", 1e-6),
        ("µs", 1e-6),
        ("ms", 1e-3),
        ("s", 1.0)
    ]
);
dimension!(Temperature, "temperature", [("K", 1.0)]);
dimension!(Viscosity, "viscosity", [("Pa s", 1.0), ("mPa s", 1e-3)]);

/// A value in SI units, written either as a bare SI number or as a string
/// such as `"470 nm"`.
#[derive(Clone, Copy, PartialEq)]
pub struct Quantity<D> {
    pub si: f64,
    unit: PhantomData<D>,
}

impl<D> Quantity<D> {
    pub const fn new(si: f64) -> Self {
        Self {
            si,
            unit: PhantomData,
        }
    }
}

impl<D> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.si)
    }
}

impl<D> Serialize for Quantity<D> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.si)
    }
}

pub fn parse_quantity<D: Dimension>(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(_, c)| c.is_alphabetic() && c != 'e' && c != 'E')
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (number, suffix) = text.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("cannot read a number from `{text}`"))?;
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Ok(value);
    }
    D::UNITS
        .iter()
        .find(|(s, _)| *s == suffix)
        .map(|(_, f)| value * f)
        .ok_or_else(|| {
            let known: Vec<&str> = D::UNITS.iter().map(|u| u.0).collect();
            format!(
                "unknown {} unit `{suffix}` (expected one of {})",
                D::NAME,
                known.join(", ")
            )
        })
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> Result<Self, De::Error> {
        struct V<D>(PhantomData<D>);
        impl<D: Dimension> Visitor<'_> for V<D> {
            type Value = Quantity<D>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(
                    f,
                    "a {} as an SI number or a string with a unit suffix",
                    D::NAME
                )
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Quantity::new(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Quantity::new(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Quantity::new(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse_quantity::<D>(v).map(Quantity::new).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(V(PhantomData))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Forces,
    Sweep,
    VirtualExperiment,
    Analyze,
    Mc,
    FitGrain,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Self::Forces => "forces",
            Self::Sweep => "sweep",
            Self::VirtualExperiment => "virtual-experiment",
            Self::Analyze => "analyze",
            Self::Mc => "mc",
            Self::FitGrain => "fit-grain",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub physics: PhysicsBlock,
    #[serde(default)]
    pub beam: BeamBlock,
    #[serde(default)]
    pub population: PopulationBlock,
    #[serde(default)]
    pub wavelengths: GridBlock,
    #[serde(default)]
    pub quantum: QuantumBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    pub forces: Option<ForcesBlock>,
    pub virtual_experiment: Option<VirtualExperimentBlock>,
    pub analyze: Option<AnalyzeBlock>,
    pub mc: Option<McBlock>,
    pub fit_grain: Option<FitGrainBlock>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsBlock {
    /// Total excited-state decay rate Γ/2π.
    pub total_rate: Quantity<Frequency>,
    pub debye_waller: f64,
    /// Γ_Ph/2π.
    pub phonon_rate: Quantity<Frequency>,
    /// Total transverse rate γ/2π; γ_c follows from it.
    pub transverse_rate: Quantity<Frequency>,
    pub host_index: f64,
}

impl Default for PhysicsBlock {
    fn default() -> Self {
        Self {
            total_rate: Quantity::new(quantum::DEFAULT_TOTAL_RATE_HZ),
            debye_waller: quantum::DEFAULT_DEBYE_WALLER,
            phonon_rate: Quantity::new(quantum::DEFAULT_PHONON_RATE_HZ),
            transverse_rate: Quantity::new(quantum::DEFAULT_TRANSVERSE_RATE_HZ),
            host_index: quantum::DIAMOND_INDEX,
        }
    }
}

impl PhysicsBlock {
    /// Photophysics with ω₀ at the given ZPL wavelength.
    pub fn photophysics(&self, zpl_wavelength: f64) -> nvtrap::Result<NvPhotophysics> {
        let gamma = units::angular(self.total_rate.si);
        NvPhotophysics::from_total_rate(
            gamma,
            self.debye_waller,
            units::angular(self.phonon_rate.si),
            units::angular(self.transverse_rate.si) - gamma / 2.0,
            units::wavelength_to_angular(zpl_wavelength),
            self.host_index,
        )
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamBlock {
    pub power: Quantity<Power>,
    pub waist: Quantity<Length>,
    pub waist_wavelength: Quantity<Length>,
    pub medium_index: f64,
    pub waist_law: WaistLaw,
    /// Fractional change of the matrix stiffness per metre of wavelength.
    pub chromatic_slope: f64,
}

impl Default for BeamBlock {
    fn default() -> Self {
        let b = BeamConfig::default();
        Self {
            power: Quantity::new(b.power),
            waist: Quantity::new(b.w0_ref),
            waist_wavelength: Quantity::new(b.w0_ref_wavelength),
            medium_index: b.n_medium,
            waist_law: b.waist_law,
            chromatic_slope: b.chromatic_slope,
        }
    }
}

impl BeamBlock {
    pub fn beam(&self, wavelength: f64) -> BeamConfig {
        BeamConfig {
            wavelength,
            power: self.power.si,
            w0_ref: self.waist.si,
            w0_ref_wavelength: self.waist_wavelength.si,
            n_medium: self.medium_index,
            waist_law: self.waist_law,
            chromatic_slope: self.chromatic_slope,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationBlock {
    pub high_nv: PopulationModel,
    pub low_nv: PopulationModel,
}

impl Default for PopulationBlock {
    fn default() -> Self {
        Self {
            high_nv: PopulationModel::high_nv(),
            low_nv: PopulationModel::low_nv(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub start: Quantity<Length>,
    pub stop: Quantity<Length>,
    pub step: Quantity<Length>,
    pub reference: Quantity<Length>,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            start: Quantity::new(units::nm(629.0)),
            stop: Quantity::new(units::nm(648.0)),
            step: Quantity::new(units::nm(0.5)),
            reference: Quantity::new(units::nm(trap::DEFAULT_REFERENCE_WAVELENGTH_NM)),
        }
    }
}

impl GridBlock {
    pub fn grid(&self) -> Vec<f64> {
        trap::wavelength_grid(
            units::to_nm(self.start.si),
            units::to_nm(self.stop.si),
            units::to_nm(self.step.si),
            units::to_nm(self.reference.si),
        )
    }

    /// λ_ref exactly as it appears on the grid.
    pub fn reference(&self) -> f64 {
        units::nm(units::to_nm(self.reference.si))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantumModelKind {
    None,
    Independent,
    Exact,
    Tabulated,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumBlock {
    pub model: QuantumModelKind,
    /// Γ_grains/2π.
    pub grain_width: Quantity<Frequency>,
    /// Detuning node spacing of the surrogate table.
    pub table_step: f64,
    pub collective: CollectiveConfig,
}

impl Default for QuantumBlock {
    fn default() -> Self {
        Self {
            model: QuantumModelKind::Tabulated,
            grain_width: Quantity::new(100.0 * units::GHZ),
            table_step: 0.1,
            collective: CollectiveConfig::default(),
        }
    }
}

impl QuantumBlock {
    pub fn grain_width(&self) -> f64 {
        units::angular(self.grain_width.si)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationBlock {
    pub dt: Quantity<Time>,
    pub segment_duration: Quantity<Time>,
    pub convention: RestoringConvention,
    pub integrator: Integrator,
    pub measurement_noise: Quantity<Length>,
    pub temperature: Quantity<Temperature>,
    pub viscosity: Quantity<Viscosity>,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        let s = SimulationConfig::default();
        let env = FluidEnvironment::default();
        Self {
            dt: Quantity::new(s.dt),
            segment_duration: Quantity::new(s.segment_duration),
            convention: s.convention,
            integrator: s.integrator,
            measurement_noise: Quantity::new(s.measurement_noise),
            temperature: Quantity::new(env.temperature),
            viscosity: Quantity::new(env.viscosity),
        }
    }
}

impl SimulationBlock {
    pub fn config(&self) -> SimulationConfig {
        SimulationConfig {
            dt: self.dt.si,
            segment_duration: self.segment_duration.si,
            convention: self.convention,
            integrator: self.integrator,
            measurement_noise: self.measurement_noise.si,
            anomaly: None,
        }
    }

    pub fn environment(&self) -> FluidEnvironment {
        FluidEnvironment {
            temperature: self.temperature.si,
            viscosity: self.viscosity.si,
            drag_model: DragModel::Stokes,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    pub welch: WelchConfig,
    pub fit: FitWindow,
    pub lof: LofConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcesBlock {
    /// Positions sampled across ±`extent` around the focus.
    pub extent: Quantity<Length>,
    pub points: usize,
}

impl Default for ForcesBlock {
    fn default() -> Self {
        Self {
            extent: Quantity::new(units::nm(940.0)),
            points: 81,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePair {
    pub blue: Quantity<Length>,
    pub red: Quantity<Length>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VirtualExperimentBlock {
    /// Acquisitions per probe pair.
    pub acquisitions: usize,
    pub probes: Vec<ProbePair>,
    pub trap_wavelength: Quantity<Length>,
    pub trap_power: Quantity<Power>,
    /// Draw a new crystal for every acquisition; otherwise use the mean one.
    pub sample_population: bool,
    /// Fraction of acquisitions that receive a mid-trace stiffness step.
    pub anomaly_rate: f64,
    pub anomaly_factor: f64,
    /// Number of raw traces written alongside the results.
    pub write_traces: usize,
    pub trace_format: TraceFormat,
}

impl Default for VirtualExperimentBlock {
    fn default() -> Self {
        Self {
            acquisitions: 20,
            probes: [(635.13, 643.13), (637.13, 641.13)]
                .into_iter()
                .map(|(b, r)| ProbePair {
                    blue: Quantity::new(units::nm(b)),
                    red: Quantity::new(units::nm(r)),
                })
                .collect(),
            trap_wavelength: Quantity::new(units::nm(660.0)),
            trap_power: Quantity::new(6.0 * units::MW),
            sample_population: true,
            anomaly_rate: 0.0,
            anomaly_factor: 1.2,
            write_traces: 0,
            trace_format: TraceFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    #[default]
    Csv,
    Binary,
}

impl TraceFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::Csv,
            _ => Self::Binary,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Binary => "nvtr",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TraceInput {
    pub path: PathBuf,
    pub blue: Option<Quantity<Length>>,
    pub red: Option<Quantity<Length>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeBlock {
    pub inputs: Vec<TraceInput>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub trials: usize,
    pub control_noise: f64,
    pub max_failure_rate: f64,
}

impl Default for McBlock {
    fn default() -> Self {
        let m = McConfig::default();
        Self {
            trials: m.n_trials,
            control_noise: m.control_noise,
            max_failure_rate: m.max_failure_rate,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitGrainBlock {
    /// CSV with columns `lambda_nm,xi`.
    pub targets: PathBuf,
    /// Candidate Γ_grains/2π values.
    pub candidates: Vec<Quantity<Frequency>>,
}

impl RunConfig {
    /// Parses TOML, or JSON when the path ends in `.json`. Errors name the
    /// offending key path.
    pub fn from_text(text: &str, json: bool) -> Result<(Self, serde_json::Value), ConfigError> {
        let value: serde_json::Value = if json {
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?
        } else {
            let table: toml::Table =
                toml::from_str(text).map_err(|e| ConfigError(format!("invalid TOML: {e}")))?;
            serde_json::to_value(table).map_err(|e| ConfigError(e.to_string()))?
        };
        let config: RunConfig = serde_path_to_error::deserialize(value.clone()).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                ConfigError(e.inner().to_string())
            } else {
                ConfigError(format!("{path}: {}", e.inner()))
            }
        })?;
        Ok((config, value))
    }

    pub fn load(path: &Path) -> anyhow::Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text =
            std::str::from_utf8(&bytes).map_err(|_| ConfigError("config is not UTF-8".into()))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let (config, _) = Self::from_text(text, json)?;
        Ok((config, bytes))
    }

    /// The pipeline section, defaulted where every key is optional.
    pub fn section<'a, T: Default + Clone>(&self, block: &'a Option<T>) -> std::borrow::Cow<'a, T> {
        match block {
            Some(b) => std::borrow::Cow::Borrowed(b),
            None => std::borrow::Cow::Owned(T::default()),
        }
    }

    pub fn require<'a, T>(&self, block: &'a Option<T>, key: &str) -> Result<&'a T, ConfigError> {
        block.as_ref().ok_or_else(|| {
            ConfigError(format!(
                "{key}: missing section required by pipeline `{}`",
                self.pipeline.name()
            ))
        })
    }

    pub fn mc_config(&self) -> McConfig {
        let block = self.section(&self.mc);
        McConfig {
            n_trials: block.trials,
            grain_width: self.quantum.grain_width(),
            lambda_ref: self.wavelengths.reference(),
            control_noise: block.control_noise,
            max_failure_rate: block.max_failure_rate,
        }
    }
}
