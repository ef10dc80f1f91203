use std::path::PathBuf;
use std::process::ExitCode;

use aris_isac::config::{AsMode, ScenarioConfig};
use aris_isac::error::Error;
use aris_isac::experiments::{self, SweepAxis};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aris-isac", version, about = "Antenna selection and beamforming for active-RIS dual-function radar-communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed under each AS mode.
    Run(Common),
    /// Repeat `run` over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// n, p, eta, rho or ms.
        #[arg(long)]
        axis: String,
        /// Comma-separated ascending values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Write beampattern_<mode>.csv for one seed.
    Beampattern(Common),
    /// Print the default configuration.
    DefaultConfig,
    /// Solve one small scenario and check its constraints.
    Selftest,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated AS modes (cuckoo, random, contiguous, full).
    #[arg(long = "as-mode", value_delimiter = ',')]
    as_mode: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<(ScenarioConfig, Vec<AsMode>, PathBuf), Error> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.run.first_seed = s;
        }
        if let Some(n) = self.seeds {
            cfg.run.num_seeds = n;
        }
        if let Some(o) = &self.out {
            cfg.run.output_dir = o.to_string_lossy().into_owned();
        }
        cfg.validate()?;
        let modes = if self.as_mode.is_empty() {
            vec![cfg.selection.mode]
        } else {
            self.as_mode.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
        };
        let out = PathBuf::from(&cfg.run.output_dir);
        Ok((cfg, modes, out))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::DimensionMismatch { .. } => 1,
        Error::Io { .. } => 3,
        _ => 2,
    }
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

/// Outputs are written either way; failed seeds turn into a nonzero exit.
fn finish(report: &experiments::RunReport, out: &std::path::Path) -> Result<(), Error> {
    report_paths(&experiments::write_report(report, out)?);
    let failed = report.rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        return Err(Error::Solver(format!("{failed} of {} runs failed", report.rows.len())));
    }
    Ok(())
}

fn selftest() -> Result<(), Error> {
    let mut cfg = ScenarioConfig::default();
    cfg.geometry.num_antennas = 4;
    cfg.geometry.num_selected = 2;
    cfg.geometry.num_ris_elements = 8;
    cfg.run.num_seeds = 1;
    cfg.validate()?;
    let sol = experiments::solve_seed(&cfg, AsMode::Cuckoo, 0)?;
    let sc = cfg.scenario();
    let radar_ok = sol.radar_power >= sc.budget.radar_target() * (1.0 - 1e-6);
    let ris_ok = sol.ris_power <= sc.budget.ris_power() * (1.0 + 1e-6);
    let trace_ok = sol.wsr_trace.windows(2).all(|w| w[1] >= w[0] - 1e-6);
    println!(
        "wsr {:.6e} bits, radar {:.6e} W, ris {:.6e} W, {} iterations",
        sol.wsr, sol.radar_power, sol.ris_power, sol.iterations
    );
    for (name, ok) in [("radar power", radar_ok), ("RIS power", ris_ok), ("monotone trace", trace_ok)] {
        println!("{name}: {}", if ok { "ok" } else { "FAILED" });
    }
    if radar_ok && ris_ok && trace_ok {
        Ok(())
    } else {
        Err(Error::Solver("selftest constraint check failed".into()))
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, modes, out) = common.resolve()?;
            finish(&experiments::run_scenario(&cfg, &modes)?, &out)?;
        }
        Command::Sweep { common, axis, values } => {
            let (cfg, modes, out) = common.resolve()?;
            let axis: SweepAxis = axis.parse()?;
            finish(&experiments::sweep(&cfg, axis, &values, &modes)?, &out)?;
        }
        Command::Beampattern(common) => {
            let (cfg, modes, out) = common.resolve()?;
            report_paths(&experiments::beampattern_files(&cfg, &modes, cfg.run.first_seed, &out)?);
        }
        Command::DefaultConfig => {
            experiments::write_default_config(&mut std::io::stdout().lock())
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        }
        Command::Selftest => selftest()?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
