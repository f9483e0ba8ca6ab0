use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use nailforce::pipeline::{self, GridSpec, PipelineConfig};
use nailforce::synth::Scenario;
use nailforce::Result;

#[derive(Parser)]
#[command(name = "nailforce", version, about = "Fingernail-imaging grasp force pipeline")]
struct Cli {
    /// JSON pipeline config; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Image noise standard deviation (intensity units).
    #[arg(long, global = true)]
    noise: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the calibration grid to images and a forces CSV.
    Calibrate {
        /// sparse, medium or dense.
        #[arg(long)]
        grid: Option<GridSpec>,
    },
    /// Train the appearance and force models from a calibration dataset.
    Train {
        /// Calibration directory [default: <out>/calibration].
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Estimate per-finger forces for every frame of a session.
    Estimate {
        #[arg(long)]
        session: PathBuf,
        /// Model directory [default: <out>/model].
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Simulate a grasp session with ground-truth forces and frames.
    SimulateSession {
        #[arg(long)]
        scenario: Option<Scenario>,
        /// Skip the per-finger nail frames.
        #[arg(long)]
        no_frames: bool,
        /// Whole camera frames to render per side.
        #[arg(long)]
        camera_frames: Option<usize>,
    },
    /// Run a visual-servoing tracking simulation.
    Servo {
        /// static, moving or two-camera.
        #[arg(long)]
        preset: Option<String>,
        /// Scenario JSON, used instead of a preset.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Compare grasp conditions from force CSVs or session directories.
    Analyze {
        /// NAME=PATH[,PATH...], repeated per condition.
        #[arg(long = "condition", required = true, value_parser = parse_condition)]
        conditions: Vec<(String, Vec<PathBuf>)>,
    },
    /// Simulate trials of both conditions and write the comparison report.
    Report {
        /// Trials per condition.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn parse_condition(s: &str) -> std::result::Result<(String, Vec<PathBuf>), String> {
    let (name, paths) = s.split_once('=').ok_or("expected NAME=PATH[,PATH...]")?;
    if name.is_empty() || paths.is_empty() {
        return Err("expected NAME=PATH[,PATH...]".into());
    }
    Ok((name.to_string(), paths.split(',').map(PathBuf::from).collect()))
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.noise {
        cfg.oracle.noise_sigma = n;
    }
    match cli.command {
        Command::Calibrate { grid } => {
            if let Some(g) = grid {
                cfg.grid = g;
            }
            print(&pipeline::cmd_calibrate(&cfg)?)
        }
        Command::Train { dataset } => {
            let dataset = dataset.unwrap_or_else(|| cfg.calibration_dir());
            print(&pipeline::cmd_train(&cfg, &dataset)?)
        }
        Command::Estimate { session, model } => {
            let model = model.unwrap_or_else(|| cfg.model_dir());
            print(&pipeline::cmd_estimate(&cfg, &model, &session)?)
        }
        Command::SimulateSession {
            scenario,
            no_frames,
            camera_frames,
        } => {
            if let Some(s) = scenario {
                cfg.session.scenario = s;
            }
            if no_frames {
                cfg.session.nail_frames = false;
            }
            if let Some(n) = camera_frames {
                cfg.session.camera_frames = n;
            }
            let (dir, _) = pipeline::cmd_simulate_session(&cfg)?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::Servo { preset, scenario } => {
            if let Some(p) = preset {
                cfg.servo.preset = p;
            }
            if scenario.is_some() {
                cfg.servo.scenario_file = scenario;
            }
            print(&pipeline::cmd_servo(&cfg)?)
        }
        Command::Analyze { conditions } => {
            let report = pipeline::cmd_analyze(&cfg, &conditions)?;
            print(&report.comparisons)
        }
        Command::Report { trials } => {
            if let Some(n) = trials {
                cfg.session.trials_per_condition = n;
            }
            let report = pipeline::cmd_report(&cfg)?;
            print(&report.comparisons)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
