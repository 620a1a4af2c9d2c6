//! Run directories: manifest, step log, particle dumps and plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fd::GridState;
use crate::kernel::KernelSpec;
use crate::particles::ParticleSet;
use crate::postprocess::{
    default_levels, emit_contours_svg, find_vortices, interpolation_noise_floor, marching_squares,
    sample_to_grid, ExtremumKind, FieldKind, GridField, Level, VortexReport,
};
use crate::solver::{RunObserver, RunSummary, SolverConfig, StepReport};

pub const MANIFEST: &str = "manifest.json";
pub const RUN_LOG: &str = "run.log";

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub termination: Option<String>,
    pub steps: Option<usize>,
    pub final_time: Option<f64>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn start(command: &str, cfg: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: cfg
                .resolved()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            config_hash: cfg.hash(),
            started_unix: unix_now(),
            finished_unix: None,
            termination: None,
            steps: None,
            final_time: None,
            error: None,
        }
    }

    pub fn finish(&mut self, outcome: std::result::Result<&RunSummary, &Error>) {
        self.finished_unix = Some(unix_now());
        match outcome {
            Ok(s) => {
                self.termination = Some(s.termination.to_string());
                self.steps = Some(s.steps);
                self.final_time = Some(s.time);
            }
            Err(e) => {
                self.termination = Some("failed".into());
                self.error = Some(e.to_string());
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Step log and particle dumps written while a run progresses.
pub struct RunDirectory {
    dir: PathBuf,
    log: BufWriter<File>,
    echo: bool,
}

impl RunDirectory {
    /// Creates `dir` if needed and starts `run.log` with its header.
    pub fn create(dir: &Path, echo: bool) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RUN_LOG);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut log = BufWriter::new(file);
        writeln!(log, "{}", StepReport::HEADER).map_err(|e| Error::io(&path, e))?;
        if echo {
            println!("{}", StepReport::HEADER);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            log,
            echo,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&mut self, report: &StepReport) -> Result<()> {
        let line = report.log_line();
        if self.echo {
            println!("{line}");
        }
        writeln!(self.log, "{line}").map_err(|e| Error::io(self.dir.join(RUN_LOG), e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.log.flush().map_err(|e| Error::io(self.dir.join(RUN_LOG), e))
    }
}

pub fn dump_name(step: usize) -> String {
    format!("state_{step:08}.csv")
}

pub const FINAL_DUMP: &str = "state_final.csv";

impl RunObserver for RunDirectory {
    fn on_step(&mut self, report: &StepReport, state: &ParticleSet, cfg: &SolverConfig) -> Result<()> {
        self.record(report)?;
        if cfg.dump_every > 0 && report.step.is_multiple_of(cfg.dump_every) {
            state.write_csv(&self.dir.join(dump_name(report.step)))?;
        }
        Ok(())
    }

    fn on_finish(&mut self, _summary: &RunSummary, state: &ParticleSet, _cfg: &SolverConfig) -> Result<()> {
        self.flush()?;
        state.write_csv(&self.dir.join(FINAL_DUMP))
    }
}

/// Contours one field into `<stem>.svg` and its grid into `<stem>_grid.csv`.
pub fn write_field_plots(dir: &Path, stem: &str, field: &GridField, levels: &[Level]) -> Result<()> {
    field.write_csv(&dir.join(format!("{stem}_grid.csv")))?;
    let contours = marching_squares(field, levels);
    emit_contours_svg(&contours, field.side, &dir.join(format!("{stem}.svg")))
}

/// Tab-separated vortex table: global extrema, then local extrema.
pub fn format_vortices(report: &VortexReport) -> String {
    let mut out = String::from("kind\tx\ty\tvalue\n");
    let kind = |k: ExtremumKind| match k {
        ExtremumKind::Min => "min",
        ExtremumKind::Max => "max",
    };
    for (label, e) in [("global_min", &report.global_min), ("global_max", &report.global_max)] {
        if let Some(e) = e {
            let _ = writeln!(out, "{label}\t{:e}\t{:e}\t{:e}", e.location.x, e.location.y, e.value);
        }
    }
    for e in &report.local {
        let _ = writeln!(
            out,
            "local_{}\t{:e}\t{:e}\t{:e}",
            kind(e.kind),
            e.location.x,
            e.location.y,
            e.value
        );
    }
    out
}

/// Samples a particle state on the `grid_n` grid and writes stream-function
/// and vorticity plots plus `vortices.tsv`. Returns the stream-function
/// vortex report.
pub fn plot_particles(
    dir: &Path,
    state: &ParticleSet,
    kernel: &KernelSpec,
    grid_n: usize,
    levels: Option<&[Level]>,
) -> Result<VortexReport> {
    let mut phi_report = None;
    for field in [FieldKind::Phi, FieldKind::Omega] {
        let grid = sample_to_grid(state, field, grid_n, kernel);
        log::info!(
            "{}: interpolation noise floor {:e}",
            field.name(),
            interpolation_noise_floor(state, field, kernel)
        );
        let fallback = default_levels(field);
        let lv = match (field, levels) {
            (FieldKind::Phi, Some(l)) => l,
            _ => &fallback,
        };
        write_field_plots(dir, field.name(), &grid, lv)?;
        if field == FieldKind::Phi {
            phi_report = Some(find_vortices(&grid));
        }
    }
    let report = phi_report.expect("stream function sampled");
    let path = dir.join("vortices.tsv");
    std::fs::write(&path, format_vortices(&report)).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn grid_field(gs: &GridState, values: &[f64]) -> GridField {
    GridField {
        n: gs.n,
        side: gs.side,
        values: values.to_vec(),
        mask: vec![false; values.len()],
    }
}

/// Plots of the finite-difference state, named `fd_phi` and `fd_omega`.
pub fn plot_grid_state(dir: &Path, gs: &GridState) -> Result<VortexReport> {
    let psi = grid_field(gs, &gs.psi);
    write_field_plots(dir, "fd_phi", &psi, &default_levels(FieldKind::Phi))?;
    write_field_plots(dir, "fd_omega", &grid_field(gs, &gs.omega), &default_levels(FieldKind::Omega))?;
    let report = find_vortices(&psi);
    let path = dir.join("fd_vortices.tsv");
    std::fs::write(&path, format_vortices(&report)).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
