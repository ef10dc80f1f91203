//! Seeded scenario runs, parameter sweeps and their CSV / JSON outputs.
//!
//! Every (axis value, seed, AS mode) triple is an independent job. Jobs run
//! through [`Execution::map`], which keeps input order, so the emitted tables
//! are sorted by (axis value, seed, mode) regardless of the execution mode.
//! The only field that changes between reruns is `wall_ms`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::channel::{generate_channels, AntennaSubset, ChannelSet};
use crate::config::{AsMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::beampattern;
use crate::optimizer::{optimize, Solution};
use crate::par::Execution;
use crate::selection::{cuckoo_search, random_search};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// RIS elements.
    N,
    /// Total power in dBm.
    P,
    Eta,
    Rho,
    /// Selected antennas.
    Ms,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::P => "p",
            SweepAxis::Eta => "eta",
            SweepAxis::Rho => "rho",
            SweepAxis::Ms => "ms",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("axis {} needs a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepAxis::N => cfg.geometry.num_ris_elements = count()?,
            SweepAxis::Ms => cfg.geometry.num_selected = count()?,
            SweepAxis::P => cfg.power.total_dbm = value,
            SweepAxis::Eta => cfg.power.radar_ratio = value,
            SweepAxis::Rho => cfg.power.split_ratio = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" => Ok(SweepAxis::N),
            "p" => Ok(SweepAxis::P),
            "eta" | "η" => Ok(SweepAxis::Eta),
            "rho" | "ρ" => Ok(SweepAxis::Rho),
            "ms" | "m_s" => Ok(SweepAxis::Ms),
            _ => Err(Error::Config(format!("unknown sweep axis '{s}' (n|p|eta|rho|ms)"))),
        }
    }
}

/// Antenna subset chosen by `mode` on one channel draw.
pub fn select_antennas(channels: &ChannelSet, cfg: &ScenarioConfig, mode: AsMode, seed: u64) -> Result<AntennaSubset> {
    let scenario = cfg.scenario();
    let ms = cfg.geometry.num_selected;
    Ok(match mode {
        AsMode::Cuckoo => {
            cuckoo_search(channels, &scenario, ms, &cfg.cuckoo_params(seed), Execution::Sequential)?
                .best
                .subset
        }
        AsMode::Random => {
            random_search(channels, &scenario, ms, cfg.selection.random_draws, seed, Execution::Sequential)?.subset
        }
        AsMode::Contiguous => AntennaSubset::contiguous(ms),
        AsMode::Full => AntennaSubset::contiguous(channels.num_antennas()),
    })
}

/// Channel draw, antenna selection and alternating optimization for one seed.
pub fn solve_seed(cfg: &ScenarioConfig, mode: AsMode, seed: u64) -> Result<Solution> {
    let channels = generate_channels(&cfg.geometry(), &cfg.channel_params(seed))?;
    let subset = select_antennas(&channels, cfg, mode, seed)?;
    optimize(&channels, &subset, &cfg.scenario(), &cfg.optimizer_config(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub as_mode: AsMode,
    /// `Err` carries the failure message.
    pub outcome: std::result::Result<RowSummary, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSummary {
    pub wsr_bits: f64,
    pub radar_power_w: f64,
    pub ris_power_w: f64,
    pub iters: usize,
    pub converged: bool,
    pub wall_ms: f64,
    pub subset: AntennaSubset,
    pub antenna_powers: Vec<f64>,
    pub wsr_trace: Vec<f64>,
}

impl From<&Solution> for RowSummary {
    fn from(s: &Solution) -> Self {
        Self {
            wsr_bits: s.wsr,
            radar_power_w: s.radar_power,
            ris_power_w: s.ris_power,
            iters: s.iterations,
            converged: s.converged,
            wall_ms: s.wall_ms,
            subset: s.subset.clone(),
            antenna_powers: s.t.antenna_powers(),
            wsr_trace: s.wsr_trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub axis_value: Option<f64>,
    pub as_mode: AsMode,
    pub ok: usize,
    pub failed: usize,
    pub mean_wsr_bits: f64,
    /// Sample standard deviation; zero with fewer than two rows.
    pub std_wsr_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub axis: Option<SweepAxis>,
    pub axis_values: Vec<f64>,
    pub as_modes: Vec<AsMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip)]
    pub rows: Vec<RunRow>,
}

impl RunReport {
    pub fn aggregate(&self, axis_value: Option<f64>, mode: AsMode) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.axis_value == axis_value && a.as_mode == mode)
    }
}

fn aggregate(rows: &[RunRow], axis_value: Option<f64>, mode: AsMode) -> Aggregate {
    let mut failed = 0;
    let mut wsr = Vec::new();
    for r in rows.iter().filter(|r| r.axis_value == axis_value && r.as_mode == mode) {
        match &r.outcome {
            Ok(s) => wsr.push(s.wsr_bits),
            Err(_) => failed += 1,
        }
    }
    let n = wsr.len() as f64;
    let mean = if wsr.is_empty() { f64::NAN } else { wsr.iter().sum::<f64>() / n };
    let std = if wsr.len() < 2 {
        0.0
    } else {
        (wsr.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Aggregate {
        axis_value,
        as_mode: mode,
        ok: wsr.len(),
        failed,
        mean_wsr_bits: mean,
        std_wsr_bits: std,
    }
}

fn execute(
    base: &ScenarioConfig,
    points: &[(Option<f64>, ScenarioConfig)],
    axis: Option<SweepAxis>,
    modes: &[AsMode],
) -> Result<RunReport> {
    if modes.is_empty() {
        return Err(Error::Config("at least one AS mode is required".into()));
    }
    let seeds = base.seeds();
    let mut jobs = Vec::new();
    for (pi, _) in points.iter().enumerate() {
        for &seed in &seeds {
            for &mode in modes {
                jobs.push((pi, seed, mode));
            }
        }
    }
    let rows = base.run.execution.map(&jobs, |&(pi, seed, mode)| {
        let (axis_value, cfg) = &points[pi];
        let outcome = solve_seed(cfg, mode, seed).map(|s| RowSummary::from(&s)).map_err(|e| {
            log::warn!("seed {seed} mode {mode} failed: {e}");
            e.to_string()
        });
        if let Ok(s) = &outcome {
            log::info!("seed {seed} mode {mode}: wsr {:.4e} bits in {} iterations", s.wsr_bits, s.iters);
        }
        RunRow {
            axis_value: *axis_value,
            seed,
            as_mode: mode,
            outcome,
        }
    });
    let aggregates = points
        .iter()
        .flat_map(|(v, _)| modes.iter().map(|&m| aggregate(&rows, *v, m)))
        .collect();
    Ok(RunReport {
        provenance: Provenance {
            config_hash: base.config_hash(),
            seeds,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            axis,
            axis_values: points.iter().filter_map(|(v, _)| *v).collect(),
            as_modes: modes.to_vec(),
        },
        aggregates,
        rows,
    })
}

/// Runs every seed of `cfg` under each AS mode.
pub fn run_scenario(cfg: &ScenarioConfig, modes: &[AsMode]) -> Result<RunReport> {
    cfg.validate()?;
    execute(cfg, &[(None, cfg.clone())], None, modes)
}

/// One [`run_scenario`] per axis value on a shared seed list.
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64], modes: &[AsMode]) -> Result<RunReport> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("sweep values must be strictly ascending".into()));
    }
    let points = values
        .iter()
        .map(|&v| Ok((Some(v), axis.apply(cfg, v)?)))
        .collect::<Result<Vec<_>>>()?;
    execute(cfg, &points, Some(axis), modes)
}

/// Nine significant digits; reparsing and reprinting gives the same text.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_axis(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub const RESULTS_HEADER: [&str; 12] = [
    "axis_value",
    "seed",
    "as_mode",
    "wsr_bits",
    "radar_power_w",
    "ris_power_w",
    "iters",
    "wall_ms",
    "converged",
    "status",
    "subset",
    "config_hash",
];

pub const TRACE_HEADER: [&str; 5] = ["axis_value", "seed", "as_mode", "iter", "wsr_bits"];

pub const BEAMPATTERN_HEADER: [&str; 2] = ["angle_deg", "power_w"];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_results_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let hash = &report.provenance.config_hash;
    w.write_record(RESULTS_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &report.rows {
        let common = [fmt_axis(r.axis_value), r.seed.to_string(), r.as_mode.to_string()];
        let rest = match &r.outcome {
            Ok(s) => [
                fmt_sig9(s.wsr_bits),
                fmt_sig9(s.radar_power_w),
                fmt_sig9(s.ris_power_w),
                s.iters.to_string(),
                format!("{:.3}", s.wall_ms),
                s.converged.to_string(),
                "ok".into(),
                s.subset.to_compact(),
            ],
            Err(_) => Default::default(),
        };
        let mut rec: Vec<String> = common.into_iter().chain(rest).collect();
        if r.outcome.is_err() {
            rec[9] = "failed".into();
        }
        rec.push(hash.clone());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &report.rows {
        let Ok(s) = &r.outcome else { continue };
        for (i, v) in s.wsr_trace.iter().enumerate() {
            w.write_record([
                fmt_axis(r.axis_value),
                r.seed.to_string(),
                r.as_mode.to_string(),
                i.to_string(),
                fmt_sig9(*v),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_json(report: &RunReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `trace.csv` and `summary.json` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = vec![dir.join("results.csv"), dir.join("trace.csv"), dir.join("summary.json")];
    write_results_csv(report, &paths[0])?;
    write_trace_csv(report, &paths[1])?;
    write_summary_json(report, &paths[2])?;
    Ok(paths)
}

/// Uniform grid `lo, lo+step, …, hi` in degrees.
pub fn angle_grid(lo_deg: f64, hi_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && hi_deg >= lo_deg) {
        return Err(Error::invalid("angle grid needs step > 0 and hi >= lo"));
    }
    let n = ((hi_deg - lo_deg) / step_deg + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo_deg + i as f64 * step_deg).collect())
}

/// Default beampattern grid: −90°..90° in 0.5° steps.
pub fn default_angle_grid() -> Vec<f64> {
    angle_grid(-90.0, 90.0, 0.5).expect("static grid is valid")
}

/// Radar probing power of `solution` over `grid_deg`, as `(angle_deg, power_w)`.
pub fn beampattern_rows(cfg: &ScenarioConfig, solution: &Solution, grid_deg: &[f64]) -> Vec<(f64, f64)> {
    let rad: Vec<f64> = grid_deg.iter().map(|d| d.to_radians()).collect();
    let power = beampattern(&solution.t, &solution.subset, &rad, cfg.channel.d_over_lambda);
    grid_deg.iter().copied().zip(power).collect()
}

/// Power values are written in shortest round-trip form, so parsing the file
/// recovers the evaluated values exactly.
pub fn emit_beampattern(cfg: &ScenarioConfig, solution: &Solution, grid_deg: &[f64], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(BEAMPATTERN_HEADER).map_err(|e| csv_err(path, e))?;
    for (ang, p) in beampattern_rows(cfg, solution, grid_deg) {
        w.write_record([format!("{ang}"), format!("{p:e}")])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Solves `seed` under each mode and writes `beampattern_<mode>.csv` into `dir`.
pub fn beampattern_files(cfg: &ScenarioConfig, modes: &[AsMode], seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let grid = default_angle_grid();
    let solutions = cfg.run.execution.map(modes, |&m| solve_seed(cfg, m, seed));
    let mut out = Vec::new();
    for (&mode, sol) in modes.iter().zip(solutions) {
        let path = dir.join(format!("beampattern_{mode}.csv"));
        emit_beampattern(cfg, &sol?, &grid, &path)?;
        out.push(path);
    }
    Ok(out)
}

/// Writes the default configuration as TOML.
pub fn write_default_config(out: &mut dyn Write) -> std::io::Result<()> {
    out.write_all(ScenarioConfig::default().to_toml().as_bytes())
}
