use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sphsv::config::RunConfig;
use sphsv::output::{plot_grid_state, plot_particles, RunDirectory, RunManifest};
use sphsv::postprocess::load_levels;
use sphsv::solver::Simulation;
use sphsv::{fd, verify, Error, ParticleSet};

/// Stream-function/vorticity SPH solver for the lid-driven cavity.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle solver and write a run directory.
    Run(RunArgs),
    /// Run the finite-difference reference solver on a `grid_n` grid.
    Fd(RunArgs),
    /// Contour an existing particle dump.
    Plot(PlotArgs),
    /// Operator-consistency and manufactured-solution checks.
    Verify,
}

#[derive(Args)]
struct Overrides {
    /// `key = value` configuration file; flags below take precedence.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Reynolds number U L / nu.
    #[arg(long)]
    reynolds: Option<String>,
    /// Initial particle spacing d0.
    #[arg(long)]
    spacing: Option<String>,
    /// Smoothing length as a multiple of the spacing.
    #[arg(long)]
    h_factor: Option<String>,
    /// Time step.
    #[arg(long)]
    dt: Option<String>,
    /// Final time if steadiness is not reached first.
    #[arg(long)]
    t_end: Option<String>,
    /// Steadiness threshold on the stream-function rate.
    #[arg(long)]
    steady_tol: Option<String>,
    /// Particle shifting coefficient (0 disables shifting).
    #[arg(long)]
    shift_coeff: Option<String>,
    /// Write a particle dump every this many steps (0: final state only).
    #[arg(long)]
    dump_every: Option<String>,
    /// Nodes per side of the plotting grid and the grid solver.
    #[arg(long)]
    grid_n: Option<String>,
    /// Run directory.
    #[arg(long)]
    out_dir: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> sphsv::Result<RunConfig> {
        self.resolve_over(None)
    }

    /// Like `resolve`, but without a config file the parameters recorded in
    /// `manifest` are the starting point.
    fn resolve_over(&self, manifest: Option<&RunManifest>) -> sphsv::Result<RunConfig> {
        let mut cfg = match (&self.config, manifest) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(m)) => {
                let mut cfg = RunConfig::default();
                for (key, value) in &m.config {
                    if sphsv::config::KEYS.contains(&key.as_str()) {
                        cfg.set(key, value, None)?;
                    }
                }
                cfg
            }
            (None, None) => RunConfig::default(),
        };
        let flags = [
            ("reynolds", &self.reynolds),
            ("spacing", &self.spacing),
            ("h_factor", &self.h_factor),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("steady_tol", &self.steady_tol),
            ("shift_coeff", &self.shift_coeff),
            ("dump_every", &self.dump_every),
            ("grid_n", &self.grid_n),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v, None)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Echo the step log to stdout.
    #[arg(long)]
    echo: bool,
    /// Stream-function contour levels, one per line.
    #[arg(long)]
    levels: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Particle dump (`x,y,phi,omega,u,v,kind`).
    dump: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Stream-function contour levels, one per line.
    #[arg(long)]
    levels: Option<PathBuf>,
    /// Output directory; defaults to the dump's directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            // library errors already carry their causes in the message
            eprintln!("error: {err}");
            let usage = err
                .downcast_ref::<Error>()
                .is_some_and(|e| matches!(e, Error::Config(_) | Error::ConfigKey { .. }));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run(args) => run(args),
        Command::Fd(args) => run_fd(args),
        Command::Plot(args) => plot(args),
        Command::Verify => {
            let checks = verify::suite()?;
            print!("{}", verify::format_table(&checks));
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn levels(path: Option<&Path>) -> anyhow::Result<Option<Vec<sphsv::postprocess::Level>>> {
    path.map(|p| load_levels(p).map_err(anyhow::Error::from)).transpose()
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.resolve()?;
    let levels = levels(args.levels.as_deref())?;
    let dir = cfg.out_dir.clone();
    let mut out = RunDirectory::create(&dir, args.echo)?;
    let mut manifest = RunManifest::start("run", &cfg);
    manifest.write(&dir)?;

    let started = Instant::now();
    let mut sim = Simulation::new(cfg.solver.clone())?;
    log::info!("{} particles, h = {:e}", sim.state.len(), sim.kernel.h);
    let outcome = sim.run(&mut out);
    manifest.finish(outcome.as_ref());
    manifest.write(&dir)?;
    let summary = outcome?;

    let report = plot_particles(&dir, &sim.state, &sim.kernel, cfg.grid_n, levels.as_deref())?;
    println!(
        "{} after {} steps (t = {}): min phi {:.6e}, {:.1} s",
        summary.termination,
        summary.steps,
        summary.time,
        report.global_min.map_or(summary.phi_min, |e| e.value),
        started.elapsed().as_secs_f64()
    );
    println!("run directory: {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn run_fd(args: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.resolve()?;
    let fd_cfg = cfg.fd_config();
    if fd_cfg.dt != cfg.solver.dt {
        log::warn!("grid time step reduced to {:e} for stability", fd_cfg.dt);
    }
    let dir = cfg.out_dir.clone();
    let mut out = RunDirectory::create(&dir, args.echo)?;
    let mut manifest = RunManifest::start("fd", &cfg);
    manifest.write(&dir)?;

    let outcome = fd::fd_run(&fd_cfg, |report, _| out.record(report));
    manifest.finish(outcome.as_ref().map(|(_, s)| s));
    manifest.write(&dir)?;
    let (gs, summary) = outcome?;
    out.flush()?;
    gs.write_csv(&dir.join("fd_state.csv"))?;
    plot_grid_state(&dir, &gs)?;
    let (psi_min, at) = gs.psi_min();
    println!(
        "{} after {} steps (t = {}): min psi {:.6e} at ({:.4}, {:.4})",
        summary.termination, summary.steps, summary.time, psi_min, at.x, at.y
    );
    println!("run directory: {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn plot(args: PlotArgs) -> anyhow::Result<ExitCode> {
    // a dump inside a run directory is plotted with that run's parameters
    let manifest = args
        .dump
        .parent()
        .filter(|d| d.join(sphsv::output::MANIFEST).exists())
        .map(RunManifest::read)
        .transpose()?;
    let cfg = args.overrides.resolve_over(manifest.as_ref())?;
    let levels = levels(args.levels.as_deref())?;
    let state = ParticleSet::read_csv(&args.dump, cfg.solver.side, cfg.solver.spacing)?;
    let dir = match args.output {
        Some(d) => d,
        None => args
            .dump
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    let report = plot_particles(&dir, &state, &cfg.solver.kernel(), cfg.grid_n, levels.as_deref())?;
    if let Some(m) = report.global_min {
        println!("min phi {:.6e} at ({:.4}, {:.4})", m.value, m.location.x, m.location.y);
    }
    for e in &report.local {
        println!(
            "local {:?} {:.6e} at ({:.4}, {:.4})",
            e.kind, e.value, e.location.x, e.location.y
        );
    }
    Ok(ExitCode::SUCCESS)
}
