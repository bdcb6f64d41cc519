use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use haze_core::scenario::{
    preset, run_ablation, run_bench_stepping, run_render, run_simulate, run_validate_depth, run_validate_multiview,
    DepthMode, Output, ScenarioConfig, PRESETS,
};
use haze_core::HazeError;
use log::{error, info};

/// Heat-haze simulation, curved-ray rendering and distortion validation.
#[derive(Parser, Debug)]
#[command(name = "haze", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped scenario preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory; nothing is written when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Order every neighbor reduction by particle index.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Override the number of recorded frames.
    #[arg(long, global = true)]
    frames: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the particle simulation and write per-frame statistics.
    Simulate,
    /// Render every camera for every frame.
    Render,
    /// Track markers and check distortion statistics.
    #[command(subcommand)]
    Validate(Validate),
    /// Compare the full thermal model against single-term variants.
    Ablation,
    /// Compare adaptive and static ray stepping against a fine reference.
    Bench,
    /// Print the resolved scenario as TOML.
    ShowConfig,
    /// List the shipped presets.
    Presets,
}

#[derive(Subcommand, Debug)]
enum Validate {
    /// Variance against marker depth.
    Depth {
        #[arg(long, value_enum, default_value_t = Mode::Continuous)]
        mode: Mode,
    },
    /// Cross-view agreement of two cameras.
    Multiview,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Discrete,
    Continuous,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_IO: u8 = 5;

fn exit_code(err: &HazeError) -> u8 {
    match err.root() {
        HazeError::Config { .. } | HazeError::Parameter(_) => EXIT_CONFIG,
        HazeError::SolverInstability { .. }
        | HazeError::StiffConduction { .. }
        | HazeError::NonFinite { .. }
        | HazeError::NonFinitePosition { .. } => EXIT_SOLVER,
        HazeError::Validation(_) | HazeError::MarkerLost { .. } => EXIT_VALIDATION,
        HazeError::Io { .. } => EXIT_IO,
        HazeError::AtFrame { .. } => unreachable!("root strips frame context"),
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, HazeError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ScenarioConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(HazeError::config("--config", "give a scenario file or --preset")),
    };
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(frames) = common.frames {
        cfg.schedule.frames = frames;
    }
    if common.deterministic {
        cfg.sim.deterministic = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary<T: serde::Serialize>(report: &T) -> Result<(), HazeError> {
    let text = toml::to_string(report).map_err(|e| HazeError::Validation(format!("summary: {e}")))?;
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), HazeError> {
    if let Command::Presets = cli.command {
        PRESETS.iter().for_each(|p| println!("{p}"));
        return Ok(());
    }
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(HazeError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HazeError::config("--threads", e.to_string()))?;
    }
    let cfg = load(&cli.common)?;
    let out = Output::new(cli.common.out.as_deref())?;
    info!("scenario `{}`", cfg.name);
    match cli.command {
        Command::Simulate => summary(&run_simulate(&cfg, &out)?),
        Command::Render => {
            let report = run_render(&cfg, &out)?;
            for f in &report.frames {
                println!(
                    "frame {} camera {}: {} steps, {} truncated rays",
                    f.frame, f.camera, f.total_steps, f.truncated_rays
                );
            }
            Ok(())
        }
        Command::Validate(Validate::Depth { mode }) => {
            let mode = match mode {
                Mode::Discrete => DepthMode::Discrete,
                Mode::Continuous => DepthMode::Continuous,
            };
            summary(&run_validate_depth(&cfg, mode, &out)?)
        }
        Command::Validate(Validate::Multiview) => {
            let report = run_validate_multiview(&cfg, &out)?;
            summary(&report)?;
            if report.pass {
                Ok(())
            } else {
                Err(HazeError::Validation(
                    "cross-view metrics not below the reseeded control".into(),
                ))
            }
        }
        Command::Ablation => {
            let report = run_ablation(&cfg, &out)?;
            summary(&report)?;
            if report.ordering_holds() {
                Ok(())
            } else {
                Err(HazeError::Validation("ablation ordering does not hold".into()))
            }
        }
        Command::Bench => summary(&run_bench_stepping(&cfg, &out)?),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml_string()?);
            Ok(())
        }
        Command::Presets => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
