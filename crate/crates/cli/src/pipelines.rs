use std::io::Write;
use std::path::Path;

use anyhow::Context as _;
use nvtrap::analysis::{self, AnalysisConfig, RatioSample};
use nvtrap::brownian::{self, AnomalyStep, SegmentedAcquisition};
use nvtrap::collective::{CollectiveConfig, StiffnessTable, TableSpec};
use nvtrap::ensemble::{self, PopulationModel};
use nvtrap::quantum::{self, NvPhotophysics};
use nvtrap::trap::{self, QuantumModel, RatioCurve};
use nvtrap::{io, units};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{ConfigError, Pipeline, QuantumModelKind, RunConfig, TraceFormat};
use crate::output::OutputDir;

pub fn run(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    match config.pipeline {
        Pipeline::Forces => forces(config, out),
        Pipeline::Sweep => sweep(config, out),
        Pipeline::VirtualExperiment => virtual_experiment(config, out),
        Pipeline::Analyze => analyze(config, out),
        Pipeline::Mc => mc(config, out),
        Pipeline::FitGrain => fit_grain(config, out),
    }
}

fn photophysics(config: &RunConfig) -> anyhow::Result<NvPhotophysics> {
    let zpl = units::nm(config.population.high_nv.zpl_center.mean_nm());
    Ok(config.physics.photophysics(zpl)?)
}

/// Builds the surrogate table when the tabulated model is selected.
fn table_for(
    config: &RunConfig,
    phys: &NvPhotophysics,
    spec: impl FnOnce() -> TableSpec,
) -> anyhow::Result<Option<StiffnessTable>> {
    if config.quantum.model != QuantumModelKind::Tabulated {
        return Ok(None);
    }
    let spec = TableSpec {
        asinh_step: config.quantum.table_step,
        ..spec()
    };
    log::info!(
        "building stiffness table: |Δ| ≤ {:.3e} rad/s, step {}, {} Rabi node(s)",
        spec.detuning_max,
        spec.asinh_step,
        spec.rabi_nodes
    );
    let started = std::time::Instant::now();
    let table = StiffnessTable::build(phys, &spec, &config.quantum.collective)?;
    log::info!("table built in {:.1?}", started.elapsed());
    Ok(Some(table))
}

fn model<'a>(
    config: &'a RunConfig,
    collective: &'a CollectiveConfig,
    table: Option<&'a StiffnessTable>,
) -> QuantumModel<'a> {
    let grain_width = config.quantum.grain_width();
    match (config.quantum.model, table) {
        (QuantumModelKind::None, _) => QuantumModel::None,
        (QuantumModelKind::Independent, _) => QuantumModel::Independent,
        (QuantumModelKind::Tabulated, Some(table)) => QuantumModel::Tabulated {
            grain_width,
            config: collective,
            table,
        },
        _ => QuantumModel::Collective {
            grain_width,
            config: collective,
        },
    }
}

fn csv_write<T: serde::Serialize>(rows: &[T], w: &mut dyn Write) -> anyhow::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct ForceRow {
    wavelength_nm: f64,
    x_nm: f64,
    force_n: f64,
    potential_j: f64,
}

/// Single-emitter dipole force and potential across the focus.
fn forces(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let block = config.section(&config.forces);
    if block.points < 2 || !(block.extent.si > 0.0) {
        return Err(
            ConfigError("forces: needs at least 2 points and a positive extent".into()).into(),
        );
    }
    let phys = photophysics(config)?;
    let mut rows = Vec::new();
    for w in config.wavelengths.grid() {
        let field = config.beam.beam(w).drive_field();
        for i in 0..block.points {
            let x = -block.extent.si + 2.0 * block.extent.si * i as f64 / (block.points - 1) as f64;
            let f = field.at(x);
            rows.push(ForceRow {
                wavelength_nm: units::to_nm(w),
                x_nm: units::to_nm(x),
                force_n: quantum::dipole_force_analytic(&phys, &f),
                potential_j: quantum::dipole_potential_analytic(&phys, &f),
            });
        }
    }
    out.write("forces.csv", |w| csv_write(&rows, w))
}

/// Stiffness, ratio and Ξ of the mean high-NV crystal against the mean
/// low-NV crystal.
fn sweep(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let phys = photophysics(config)?;
    let grid = config.wavelengths.grid();
    let lambda_ref = config.wavelengths.reference();
    let beam = config.beam.beam(lambda_ref);
    let high = config.population.high_nv.mean_nanodiamond();
    let low = config.population.low_nv.mean_nanodiamond();
    let grain = config.quantum.grain_width();
    let table = table_for(config, &phys, || {
        let centers = (
            high.zpl_center.min(low.zpl_center),
            high.zpl_center.max(low.zpl_center),
        );
        trap::sweep_table_spec(
            &phys,
            &beam,
            &grid,
            centers,
            high.zpl_sigma.max(low.zpl_sigma),
            grain,
        )
    })?;
    let model = model(config, &config.quantum.collective, table.as_ref());
    let high_curve = trap::total_stiffness_curve(&high, &phys, &beam, &grid, lambda_ref, model)?;
    let low_curve = trap::total_stiffness_curve(&low, &phys, &beam, &grid, lambda_ref, model)?;
    let high_ratio = RatioCurve::from_breakdowns(&high_curve, lambda_ref)?;
    let low_ratio = RatioCurve::from_breakdowns(&low_curve, lambda_ref)?;
    let rows = io::sweep_rows(&high_curve, &high_ratio, &low_ratio)?;
    out.write("sweep.csv", |w| Ok(io::write_sweep_csv(&rows, w)?))
}

struct Acquisition {
    probe: (f64, f64),
    kappas: [f64; 5],
    radius: f64,
    crystal_seed: u64,
    trace_seed: u64,
    anomaly: Option<AnomalyStep>,
}

fn virtual_experiment(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let block = config.section(&config.virtual_experiment);
    if block.probes.is_empty() || block.acquisitions == 0 {
        return Err(ConfigError(
            "virtual_experiment: needs probes and at least one acquisition".into(),
        )
        .into());
    }
    if !(0.0..=1.0).contains(&block.anomaly_rate) || !(block.anomaly_factor > 0.0) {
        return Err(ConfigError(
            "virtual_experiment: anomaly_rate in [0, 1] and positive anomaly_factor required"
                .into(),
        )
        .into());
    }
    let phys = photophysics(config)?;
    let lambda_ref = config.wavelengths.reference();
    let probe_beam = config.beam.beam(lambda_ref);
    let trap_beam = nvtrap::trap::BeamConfig {
        power: block.trap_power.si,
        ..config.beam.beam(block.trap_wavelength.si)
    };
    let population = &config.population.high_nv;
    let sim = config.simulation.config();
    let env = config.simulation.environment();

    let mut probe_wavelengths = vec![lambda_ref];
    for p in &block.probes {
        probe_wavelengths.extend([p.blue.si, p.red.si]);
    }
    let table = table_for(config, &phys, || {
        let mut all = probe_wavelengths.clone();
        all.push(block.trap_wavelength.si);
        let mut spec = ensemble::mc_table_spec(
            population,
            population,
            &phys,
            &probe_beam,
            &all,
            config.quantum.grain_width(),
        );
        let trap_spec = ensemble::mc_table_spec(
            population,
            population,
            &phys,
            &trap_beam,
            &all,
            config.quantum.grain_width(),
        );
        spec.detuning_max = spec.detuning_max.max(trap_spec.detuning_max);
        spec.rabi_min = spec.rabi_min.min(trap_spec.rabi_min);
        spec.rabi_max = spec.rabi_max.max(trap_spec.rabi_max);
        spec.rabi_nodes = 3;
        spec
    })?;
    let model = model(config, &config.quantum.collective, table.as_ref());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut plan = Vec::new();
    for p in &block.probes {
        for _ in 0..block.acquisitions {
            let anomalous = rng.random::<f64>() < block.anomaly_rate;
            let duration = 5.0 * sim.segment_duration;
            plan.push(Acquisition {
                probe: (p.blue.si, p.red.si),
                kappas: [0.0; 5],
                radius: 0.0,
                crystal_seed: rng.random(),
                trace_seed: rng.random(),
                anomaly: anomalous.then(|| AnomalyStep {
                    time: duration * (0.2 + 0.6 * rng.random::<f64>()),
                    factor: block.anomaly_factor,
                }),
            });
        }
    }
    for a in &mut plan {
        let nd = if block.sample_population {
            ensemble::sample_nanodiamond(population, a.crystal_seed)
        } else {
            population.mean_nanodiamond()
        };
        let k = |beam: &nvtrap::trap::BeamConfig, w: f64| -> anyhow::Result<f64> {
            Ok(
                trap::stiffness_at(&nd, &phys, &beam.with_wavelength(w), lambda_ref, model)?
                    .kappa_tot,
            )
        };
        let k660 = k(&trap_beam, trap_beam.wavelength)?;
        let (kb, kref, kr) = (
            k(&probe_beam, a.probe.0)?,
            k(&probe_beam, lambda_ref)?,
            k(&probe_beam, a.probe.1)?,
        );
        a.kappas = [k660, k660 + kb, k660 + kref, k660 + kr, k660];
        a.radius = nd.radius;
    }

    let analysis_config = AnalysisConfig {
        welch: config.analysis.welch,
        fit: config.analysis.fit,
    };
    let results: Vec<anyhow::Result<(RatioSample, Option<SegmentedAcquisition>)>> = plan
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let sim = nvtrap::brownian::SimulationConfig {
                anomaly: a.anomaly,
                ..sim
            };
            let acq = brownian::simulate_trace(a.kappas, a.radius, &env, &sim, a.trace_seed)?;
            let sample = analysis::extract_ratios(&acq, &analysis_config)?;
            Ok((sample, (i < block.write_traces).then_some(acq)))
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let (sample, trace) = r?;
        if let Some(acq) = trace {
            let name = format!("trace_{i:04}.{}", block.trace_format.extension());
            out.write(&name, |w| write_trace(&acq, block.trace_format, w))?;
        }
        samples.push(sample);
    }
    let probes: Vec<(f64, f64)> = plan
        .iter()
        .map(|a| (units::to_nm(a.probe.0), units::to_nm(a.probe.1)))
        .collect();
    write_ratios_and_stats(config, out, &samples, &probes)
}

fn write_trace(
    acq: &SegmentedAcquisition,
    format: TraceFormat,
    w: &mut dyn Write,
) -> anyhow::Result<()> {
    match format {
        TraceFormat::Csv => io::write_trace_csv(acq, w)?,
        TraceFormat::Binary => io::write_trace_binary(acq, w)?,
    }
    Ok(())
}

fn write_ratios_and_stats(
    config: &RunConfig,
    out: &mut OutputDir,
    samples: &[RatioSample],
    probes: &[(f64, f64)],
) -> anyhow::Result<()> {
    let mut points = Vec::new();
    for (s, p) in samples.iter().zip(probes) {
        points.extend(analysis::wavelength_samples(
            std::slice::from_ref(s),
            p.0,
            p.1,
        ));
    }
    let kept = points.iter().filter(|p| p.rejection.is_none()).count();
    let mut final_samples = samples.to_vec();
    if kept > config.analysis.lof.k {
        let stats = analysis::summarize(&mut points, &config.analysis.lof)?;
        // A sample is an outlier when either of its probe ratios is.
        for (i, s) in final_samples.iter_mut().enumerate() {
            if s.rejection.is_none()
                && points[2 * i..2 * i + 2]
                    .iter()
                    .any(|p| p.rejection == Some(analysis::Rejection::Lof))
            {
                s.rejection = Some(analysis::Rejection::Lof);
            }
        }
        out.write("stats.json", |w| Ok(io::write_stats_json(&stats, w)?))?;
    } else {
        log::warn!("{kept} accepted ratio points; too few for outlier rejection and statistics");
    }
    out.write("ratios.csv", |w| {
        Ok(io::write_ratio_samples_csv(
            &final_samples,
            Some(probes),
            w,
        )?)
    })
}

fn analyze(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let block = config.require(&config.analyze, "analyze")?;
    if block.inputs.is_empty() {
        return Err(ConfigError("analyze.inputs: at least one trace required".into()).into());
    }
    let analysis_config = AnalysisConfig {
        welch: config.analysis.welch,
        fit: config.analysis.fit,
    };
    let mut samples = Vec::new();
    for input in &block.inputs {
        let acq = read_trace(&input.path)?;
        samples.push(analysis::extract_ratios(&acq, &analysis_config)?);
    }
    let labelled = block
        .inputs
        .iter()
        .all(|i| i.blue.is_some() && i.red.is_some());
    if labelled {
        let probes: Vec<(f64, f64)> = block
            .inputs
            .iter()
            .map(|i| {
                (
                    units::to_nm(i.blue.unwrap().si),
                    units::to_nm(i.red.unwrap().si),
                )
            })
            .collect();
        write_ratios_and_stats(config, out, &samples, &probes)
    } else {
        out.write("ratios.csv", |w| {
            Ok(io::write_ratio_samples_csv(&samples, None, w)?)
        })
    }
}

fn read_trace(path: &Path) -> anyhow::Result<SegmentedAcquisition> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = std::io::BufReader::new(file);
    Ok(match TraceFormat::for_path(path) {
        TraceFormat::Csv => io::read_trace_csv(reader)?,
        TraceFormat::Binary => io::read_trace_binary(reader)?,
    })
}

fn mc_table(
    config: &RunConfig,
    phys: &NvPhotophysics,
    grid: &[f64],
    grain_width: f64,
) -> anyhow::Result<Option<StiffnessTable>> {
    let (high, low) = (&config.population.high_nv, &config.population.low_nv);
    let beam = config.beam.beam(config.wavelengths.reference());
    table_for(config, phys, || {
        ensemble::mc_table_spec(high, low, phys, &beam, grid, grain_width)
    })
}

fn mc(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let phys = photophysics(config)?;
    let grid = config.wavelengths.grid();
    let mc_config = config.mc_config();
    mc_config.validate()?;
    let table = mc_table(config, &phys, &grid, mc_config.grain_width)?;
    let model = model(config, &config.quantum.collective, table.as_ref());
    let beam = config.beam.beam(config.wavelengths.reference());
    let result = ensemble::run_mc(
        &config.population.high_nv,
        &config.population.low_nv,
        &phys,
        &beam,
        &grid,
        &mc_config,
        model,
        config.seed,
    )?;
    out.write("mc.json", |w| Ok(io::write_mc_json(&result, w)?))?;
    out.write("mc.csv", |w| Ok(io::write_mc_csv(&result, w)?))
}

#[derive(Deserialize)]
struct TargetRow {
    lambda_nm: f64,
    xi: f64,
}

#[derive(serde::Serialize)]
struct GrainRow {
    grain_width_ghz: f64,
    objective: f64,
}

/// Scans grain widths against a target Ξ curve using the mean crystals.
fn fit_grain(config: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let block = config.require(&config.fit_grain, "fit_grain")?;
    if block.candidates.is_empty() {
        return Err(
            ConfigError("fit_grain.candidates: at least one grain width required".into()).into(),
        );
    }
    let file = std::fs::File::open(&block.targets)
        .with_context(|| format!("opening {}", block.targets.display()))?;
    let targets: Vec<TargetRow> = csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| nvtrap::Error::Format(format!("{}: {e}", block.targets.display())))?;
    let lambda_ref = config.wavelengths.reference();
    let mut grid: Vec<f64> = targets.iter().map(|t| units::nm(t.lambda_nm)).collect();
    let ref_index = match grid.iter().position(|w| (w - lambda_ref).abs() < 1e-15) {
        Some(i) => i,
        None => {
            grid.push(lambda_ref);
            grid.len() - 1
        }
    };
    let phys = photophysics(config)?;
    let widths: Vec<f64> = block
        .candidates
        .iter()
        .map(|c| units::angular(c.si))
        .collect();
    let widest = widths.iter().copied().fold(0.0, f64::max);
    let table = mc_table(config, &phys, &grid, widest)?;
    let beam = config.beam.beam(lambda_ref);
    let high = config.population.high_nv.mean_nanodiamond();
    let low = config.population.low_nv.mean_nanodiamond();
    let target_xi: Vec<f64> = targets.iter().map(|t| t.xi).collect();
    let fit = ensemble::fit_grain_width(&target_xi, &widths, |grain_width| {
        let model = match model(config, &config.quantum.collective, table.as_ref()) {
            QuantumModel::Tabulated { config, table, .. } => QuantumModel::Tabulated {
                grain_width,
                config,
                table,
            },
            QuantumModel::Collective { config, .. } => QuantumModel::Collective {
                grain_width,
                config,
            },
            other => other,
        };
        let (mut xi, _, _) =
            ensemble::xi_for_pair(&high, &low, &phys, &beam, &grid, lambda_ref, model)?;
        if ref_index == targets.len() {
            xi.truncate(targets.len());
        }
        Ok(xi)
    })?;
    let hz = |w: f64| w / units::angular(units::GHZ);
    let rows: Vec<GrainRow> = fit
        .objective
        .iter()
        .map(|&(w, o)| GrainRow {
            grain_width_ghz: hz(w),
            objective: o,
        })
        .collect();
    out.write("fit_grain.csv", |w| csv_write(&rows, w))?;
    out.write("fit_grain.json", |w| {
        serde_json::to_writer_pretty(
            w,
            &serde_json::json!({ "best_grain_width_ghz": hz(fit.best), "objective": rows }),
        )?;
        Ok(())
    })
}

/// Physical-plausibility diagnostics that do not need a full run.
pub fn diagnostics(config: &RunConfig) -> (Vec<String>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    let lambda_ref = config.wavelengths.reference();
    let beam = config.beam.beam(lambda_ref);
    if let Err(e) = beam.validate() {
        errors.push(format!("beam: {e}"));
    }
    let phys = match photophysics(config) {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(format!("physics: {e}"));
            None
        }
    };
    for (name, p) in [
        ("population.high_nv", &config.population.high_nv),
        ("population.low_nv", &config.population.low_nv),
    ] {
        if let Err(e) = p.validate() {
            errors.push(format!("{name}: {e}"));
        }
    }
    if let Err(e) = config.quantum.collective.validate() {
        errors.push(format!("quantum.collective: {e}"));
    }
    if !(config.quantum.grain_width.si > 0.0) {
        errors.push("quantum.grain_width: must be positive".into());
    }
    let grid = config.wavelengths.grid();
    if grid.len() < 2 || !(config.wavelengths.step.si > 0.0) {
        errors.push("wavelengths: need a positive step and at least two points".into());
    }
    let sim = config.simulation.config();
    if let Err(e) = sim.validate() {
        errors.push(format!("simulation: {e}"));
    }
    if matches!(config.pipeline, Pipeline::Mc) {
        if let Err(e) = config.mc_config().validate() {
            errors.push(format!("mc: {e}"));
        }
    }
    if !errors.is_empty() {
        return (warnings, errors);
    }
    let phys = phys.expect("checked above");

    let largest =
        max_diameter(&config.population.high_nv).max(max_diameter(&config.population.low_nv));
    let shortest = grid.first().copied().unwrap_or(lambda_ref);
    if !trap::rayleigh_valid(units::nm(largest) / 2.0, shortest) {
        warnings.push(format!(
            "Rayleigh approximation: crystals up to {largest:.0} nm exceed a quarter of {:.1} nm",
            units::to_nm(shortest)
        ));
    }

    if matches!(config.pipeline, Pipeline::VirtualExperiment) {
        let block = config.section(&config.virtual_experiment);
        let env = config.simulation.environment();
        let nd = config.population.high_nv.nanodiamond(
            config.population.high_nv.size_nm.mean,
            config.population.high_nv.zpl_center.mean_nm(),
            config.population.high_nv.zpl_sigma_nm.mean,
        );
        let trap_beam = nvtrap::trap::BeamConfig {
            power: block.trap_power.si,
            ..config.beam.beam(block.trap_wavelength.si)
        };
        let stiff = |b: &nvtrap::trap::BeamConfig| {
            trap::stiffness_at(&nd, &phys, b, lambda_ref, QuantumModel::Independent)
                .map(|s| s.kappa_tot.abs())
        };
        let mut kappa = stiff(&trap_beam).unwrap_or(0.0);
        let probe_max = block
            .probes
            .iter()
            .flat_map(|p| [p.blue.si, p.red.si])
            .filter_map(|w| stiff(&config.beam.beam(w)).ok())
            .fold(0.0, f64::max);
        kappa += probe_max;
        kappa *= block.anomaly_factor.max(1.0);
        if let Ok(beta) = brownian::drag_coefficient(
            units::nm(config.population.high_nv.size_nm.mean) / 2.0,
            &env,
        ) {
            let bound = nvtrap::brownian::SimulationConfig::max_dt(kappa, beta);
            if sim.dt > bound {
                warnings.push(format!(
                    "simulation.dt = {:.3e} s exceeds the stability bound {bound:.3e} s for the mean crystal",
                    sim.dt
                ));
            }
        }
    }
    (warnings, errors)
}

fn max_diameter(p: &PopulationModel) -> f64 {
    p.size_nm.max.min(p.size_nm.mean + 4.0 * p.size_nm.sd)
}
