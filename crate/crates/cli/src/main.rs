use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpo_storage::config::{self, RunConfig, Units};
use cpo_storage::linear_response::{dispersion_csv, dispersion_scan, response_csv, response_scan};
use cpo_storage::maxwell_bloch::{write_traces_csv, RunOptions};
use cpo_storage::protocol::{run_storage, sweep_depth, sweep_switch, write_depth_csv, write_switch_csv};
use cpo_storage::validation::run_suite;
use cpo_storage::{ConfigError, NumericError};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cpo", version, about = "CPO light-storage simulations")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Shipped configuration (he_star_fig2, he_star_fig3, he_star_figS1a, he_star_figS1b).
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps; defaults to the available parallelism.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Unit system of the configured medium and times.
    #[arg(long, global = true, value_name = "gamma0|si")]
    units: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Group velocities and gains of the eigenquadratures against saturation.
    Dispersion,
    /// Exact against adiabatic population response.
    Response,
    /// One write/store/retrieve sequence with exit traces.
    Store,
    /// Storage efficiency against optical depth.
    SweepDepth,
    /// Storage efficiency against drive switching time.
    SweepSwitch,
    /// Oracle and invariant checks.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dispersion => "dispersion",
            Command::Response => "response",
            Command::Store => "store",
            Command::SweepDepth => "sweep-depth",
            Command::SweepSwitch => "sweep-switch",
            Command::Validate => "validate",
        }
    }
}

enum Failure {
    Config(ConfigError),
    Numeric(NumericError),
    Checks(String),
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<NumericError> for Failure {
    fn from(e: NumericError) -> Self {
        Failure::Numeric(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Numeric(e) => match e {
                NumericError::NonConvergence { .. } => "non_convergence",
                NumericError::Stability { .. } => "stability",
                NumericError::StepTooLarge { .. } => "step_too_large",
                NumericError::Aliasing { .. } => "aliasing",
                NumericError::Window { .. } => "window",
                NumericError::Validity { .. } => "validity",
                NumericError::Param(_) => "parameter",
            },
            Failure::Checks(_) => "check_failed",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => e.to_string(),
            Failure::Numeric(e) => e.to_string(),
            Failure::Checks(m) => m.clone(),
            Failure::Io(e) => e.to_string(),
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) | Failure::Checks(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Parse("give either --config or --preset, not both".into()).into())
        }
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        (None, Some(name)) => config::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(units) = &cli.units {
        cfg.units = Units::parse(units)?;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    Ok(cfg.resolve()?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(command: Command, cfg: &RunConfig) -> Result<(), Failure> {
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("resolved_config.json"), cfg.to_json())?;
    let medium = cfg.medium();
    match command {
        Command::Dispersion => {
            let rows = dispersion_scan(&medium, &cfg.dispersion.s_values(), cfg.dispersion.model);
            fs::write(dir.join("dispersion.csv"), dispersion_csv(&rows))?;
        }
        Command::Response => {
            let r = &cfg.response;
            let rows = response_scan(&medium, &r.s_values, &r.omegas(), r.model);
            fs::write(dir.join("response.csv"), response_csv(&rows))?;
        }
        Command::Store => {
            let result = run_storage(&medium, &cfg.sequence, &RunOptions::default())?;
            let mut out = create(&dir, "traces.csv")?;
            write_traces_csv(&result.traces, &cfg.unit_system(), cfg.output.normalization, &mut out)?;
            out.flush()?;
            let summary = json!({
                "efficiency": result.efficiency,
                "s_in": result.s_in,
                "s_out": result.s_out,
                "optical_depth": result.optical_depth,
                "cut_time": result.cut_time,
                "storage_duration": result.storage_duration,
                "retrieve_time": result.retrieve_time,
                "max_trace_drift": result.traces.max_trace_drift,
                "unphysical_points": result.traces.unphysical_points,
            });
            fs::write(dir.join("store.json"), format!("{summary:#}\n"))?;
            log::info!("efficiency {}", result.efficiency);
        }
        Command::SweepDepth => {
            let sw = &cfg.sweep_depth;
            let points = sweep_depth(&medium, &cfg.sequence, &sw.depths, &sw.s_in, cfg.workers);
            let mut out = create(&dir, "sweep_depth.csv")?;
            write_depth_csv(&points, &mut out)?;
            out.flush()?;
            let failed: Vec<String> = points.iter().filter_map(|p| p.error.clone()).collect();
            if !failed.is_empty() {
                return Err(Failure::Checks(format!("{} sweep points failed: {}", failed.len(), failed.join("; "))));
            }
        }
        Command::SweepSwitch => {
            let sw = &cfg.sweep_switch;
            let s_values = if sw.s_in.is_empty() {
                vec![cfg.sequence.s_in]
            } else {
                sw.s_in.clone()
            };
            let mut failed = Vec::new();
            for s_in in s_values {
                let base = cpo_storage::protocol::StorageSequence { s_in, ..cfg.sequence };
                let mut points = Vec::new();
                for &edge in &sw.edges {
                    points.extend(sweep_switch(&medium, &base, &sw.tau_over_inv_dcpo, edge, cfg.workers));
                }
                let mut out = create(&dir, &format!("sweep_switch_s_in_{s_in}.csv"))?;
                write_switch_csv(&points, &mut out)?;
                out.flush()?;
                failed.extend(points.into_iter().filter_map(|p| p.error));
            }
            if !failed.is_empty() {
                return Err(Failure::Checks(format!("{} sweep points failed: {}", failed.len(), failed.join("; "))));
            }
        }
        Command::Validate => {
            let checks = run_suite(cfg);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let report = serde_json::to_string_pretty(&checks).expect("checks serialize");
            fs::write(dir.join("validate.json"), report + "\n")?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Failure::Checks(format!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = cli.command;
    let result = load_config(&cli).and_then(|cfg| run(command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let err = json!({
                "error": f.kind(),
                "subcommand": command.name(),
                "message": f.message(),
            });
            eprintln!("{err}");
            ExitCode::from(f.code())
        }
    }
}
