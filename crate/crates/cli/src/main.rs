mod config;
mod output;
mod pipelines;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};
use output::{sha256_hex, Manifest, OutputDir};

/// Optical-trap simulations and analyses of NV-rich nanodiamonds.
#[derive(Parser)]
#[command(name = "nvtrap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the pipeline named in the configuration.
    Run(RunArgs),
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Run on a single worker.
    #[arg(long)]
    deterministic: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<nvtrap::Error>() {
            return match e {
                e if e.is_numerical() => EXIT_NUMERICAL,
                nvtrap::Error::Io(_)
                | nvtrap::Error::Csv(_)
                | nvtrap::Error::Json(_)
                | nvtrap::Error::Format(_) => EXIT_IO,
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
        {
            return EXIT_IO;
        }
    }
    EXIT_IO
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NVTRAP_LOG", "info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run(args) => run(&args),
    }
}

fn validate(path: &Path) -> ExitCode {
    let config = match RunConfig::load(path) {
        Ok((c, _)) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let (warnings, errors) = pipelines::diagnostics(&config);
    for w in &warnings {
        println!("warning: {w}");
    }
    for e in &errors {
        println!("error: {e}");
    }
    if errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CONFIG)
    }
}

fn run(args: &RunArgs) -> ExitCode {
    let workers = if args.deterministic {
        1
    } else {
        args.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build_global()
    {
        log::warn!("worker pool: {e}");
    }

    let mut out = match OutputDir::create(&args.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_IO);
        }
    };
    let loaded = RunConfig::load(&args.config);
    let (hash, mut pipeline, mut seed) = match &loaded {
        Ok((c, bytes)) => (
            sha256_hex(bytes),
            c.pipeline.name().to_string(),
            Some(args.seed.unwrap_or(c.seed)),
        ),
        Err(_) => (
            std::fs::read(&args.config)
                .map(|b| sha256_hex(&b))
                .unwrap_or_default(),
            "unknown".to_string(),
            args.seed,
        ),
    };
    let outcome = loaded.and_then(|(mut config, _)| {
        if let Some(s) = args.seed {
            config.seed = s;
        }
        pipeline = config.pipeline.name().to_string();
        seed = Some(config.seed);
        log::info!(
            "running `{pipeline}` with seed {} on {workers} worker(s)",
            config.seed
        );
        pipelines::run(&config, &mut out)
    });
    let code = match &outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(e)
        }
    };
    let manifest = Manifest {
        tool: "nvtrap",
        version: env!("CARGO_PKG_VERSION"),
        pipeline: &pipeline,
        config_path: args.config.display().to_string(),
        config_sha256: hash,
        seed,
        workers,
        deterministic: args.deterministic,
        status: if code == 0 { "ok" } else { "failed" },
        exit_code: i32::from(code),
        error: outcome.as_ref().err().map(|e| format!("{e:#}")),
        outputs: out.written().to_vec(),
    };
    if let Err(e) = out.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        w.write_all(b"\n")?;
        Ok(())
    }) {
        eprintln!("error: writing manifest: {e:#}");
        return ExitCode::from(if code == 0 { EXIT_IO } else { code });
    }
    ExitCode::from(code)
}
