//! Command-line verbs behind the `fpesn` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::io::{export_series, export_trajectory, import_series, import_trajectory, write_atomic};
use super::report::{emit_report, write_plot_table};
use super::sweep::{summary_table, sweep};
use super::{baselines, generate_truth, observe, run_experiment, run_jacobian};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fixed_point::{reconstruct, ObservationSet};
use crate::reservoir::Reservoir;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fpesn", version, about = "Fixed-point echo state network reconstruction of sparse time series")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Integrate the configured system and write the complete series.
    Gen(Common),
    /// Remove a random ω fraction of a series.
    Mask(Common),
    /// Run the fixed-point reconstruction.
    Reconstruct(Common),
    /// Linear and natural-spline interpolation of a masked series.
    Baseline(Common),
    /// Full pipeline with metrics against the ground truth.
    Report(Common),
    /// Run the `[sweep]` grid of the config.
    Sweep(Common),
    /// Jacobian l1-norm diagnostics at the ground truth.
    Jacobian(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Series file to start from instead of generating one.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub seed_dynamics: Option<u64>,
    #[arg(long)]
    pub seed_reservoir: Option<u64>,
    #[arg(long)]
    pub seed_mask: Option<u64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Worker threads for ensembles and sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Common {
    pub fn load_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed_dynamics {
            cfg.seeds.dynamics = s;
        }
        if let Some(s) = self.seed_reservoir {
            cfg.seeds.reservoir = s;
        }
        if let Some(s) = self.seed_mask {
            cfg.seeds.mask = s;
        }
        if let Some(w) = self.omega {
            cfg.omega = w;
        }
        if let Some(e) = self.ensemble {
            cfg.ensemble = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn truth_or_input(c: &Common, cfg: &ExperimentConfig) -> Result<Trajectory> {
    match &c.input {
        Some(p) => import_trajectory(p),
        None => generate_truth(cfg),
    }
}

fn observed_or_input(c: &Common, cfg: &ExperimentConfig) -> Result<ObservationSet> {
    match &c.input {
        Some(p) => import_series(p),
        None => observe(cfg, &generate_truth(cfg)?),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    missing_fraction: f64,
    iterations: usize,
    converged: bool,
    improvements: &'a [f64],
}

/// Executes one verb; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let c = match &cli.verb {
        Verb::Gen(c)
        | Verb::Mask(c)
        | Verb::Reconstruct(c)
        | Verb::Baseline(c)
        | Verb::Report(c)
        | Verb::Sweep(c)
        | Verb::Jacobian(c) => c,
    };
    let cfg = c.load_config()?;
    let jobs = c.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| run_verb(&cli.verb, c, &cfg))
}

fn run_verb(verb: &Verb, c: &Common, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = |name: &str| c.out.join(name);
    let mut written = Vec::new();
    match verb {
        Verb::Gen(_) => {
            let tr = generate_truth(cfg)?;
            export_trajectory(&tr, &out("truth.csv"))?;
            written.push(out("truth.csv"));
        }
        Verb::Mask(_) => {
            let tr = truth_or_input(c, cfg)?;
            let obs = observe(cfg, &tr)?;
            export_series(&obs, &out("observed.csv"))?;
            written.push(out("observed.csv"));
        }
        Verb::Baseline(_) => {
            let obs = observed_or_input(c, cfg)?;
            let (lin, csp) = baselines(&obs)?;
            for (name, y) in [("linear.csv", lin), ("spline.csv", csp)] {
                let tr = Trajectory { y, u: obs.u().clone(), dt: obs.dt() };
                export_trajectory(&tr, &out(name))?;
                written.push(out(name));
            }
        }
        Verb::Reconstruct(_) => {
            let obs = observed_or_input(c, cfg)?;
            let mut spec = cfg.reservoir_spec(0);
            spec.n_target = obs.n_target();
            spec.n_exo = obs.n_exo();
            let res = Reservoir::build(&spec)?;
            let run = reconstruct(&res, &obs, &cfg.fixed_point_config())?;
            let tr = Trajectory { y: run.y_r.clone(), u: obs.u().clone(), dt: obs.dt() };
            export_trajectory(&tr, &out("reconstruction.csv"))?;
            write_json(
                &out("run.json"),
                &RunSummary {
                    version: super::VERSION,
                    config: cfg,
                    missing_fraction: obs.missing_fraction(),
                    iterations: run.iterations,
                    converged: run.converged,
                    improvements: &run.improvements,
                },
            )?;
            written.extend([out("reconstruction.csv"), out("run.json")]);
        }
        Verb::Report(_) => {
            let result = run_experiment(cfg)?;
            emit_report(&result, &out("report.json"))?;
            written.push(out("report.json"));
            if let Some(rec) = &result.reconstruction {
                write_plot_table(rec, &out("timeseries.csv"))?;
                written.push(out("timeseries.csv"));
            }
        }
        Verb::Sweep(_) => {
            if cfg.sweep.is_empty() {
                log::warn!("config has no [sweep] grid; running the base configuration once");
            }
            let cells = sweep(cfg, &cfg.sweep);
            write_json(&out("sweep.json"), &cells)?;
            let (header, rows) = summary_table(&cells);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_atomic(&out("sweep.csv"), &bytes)?;
            written.extend([out("sweep.json"), out("sweep.csv")]);
        }
        Verb::Jacobian(_) => {
            let diag = run_jacobian(cfg)?;
            write_json(&out("jacobian.json"), &diag)?;
            written.push(out("jacobian.json"));
        }
    }
    Ok(written)
}
