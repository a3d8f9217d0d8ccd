//! Experiment pipelines: generate → mask → reconstruct → compare.
//!
//! Three seed streams keep the factors independent: `dynamics` drives the
//! forcing of stochastic systems, `reservoir` the ESN draws (member `m` of an
//! ensemble uses `reservoir + m`) and `mask` the observation pattern.

pub mod config;
pub mod io;
pub mod report;
pub mod sweep;
pub mod cli;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dynamics::{gen_lorenz63, gen_lorenz96, gen_mackey_glass, gen_vdp, Trajectory};
use crate::error::Result;
use crate::fixed_point::{reconstruct, ObservationSet};
use crate::jacobian::{diag_bound_check, l1_report, DiagBoundCheck, JacobianReport};
use crate::readout::fit_ridge_full;
use crate::reservoir::{LatentState, Reservoir};
use crate::sparsity::{interp_cubic_spline, interp_linear, make_mask, MaskSpec, MetricReport};

pub use config::{ExperimentConfig, SeedSet, SweepGrid, System};
pub use report::{emit_report, EnsembleStats, ExperimentResult, MemberResult, MetricSummary, Reconstruction};
pub use sweep::{sweep, SweepCell};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Ground truth wired as a reconstruction problem: masked targets `y` and
/// fully known inputs `u`.
pub fn generate_truth(cfg: &ExperimentConfig) -> Result<Trajectory> {
    let d = &cfg.dynamics;
    let t = cfg.t_len;
    match cfg.system {
        System::MackeyGlass => gen_mackey_glass(&d.mackey_glass, t),
        System::Lorenz63Full => gen_lorenz63(&d.lorenz63, t),
        System::Lorenz63Partial => {
            let full = gen_lorenz63(&d.lorenz63, t)?;
            Ok(Trajectory {
                y: full.y.columns(0, 1).into_owned(),
                u: full.y.columns(2, 1).into_owned(),
                dt: full.dt,
            })
        }
        System::Lorenz96 => gen_lorenz96(&d.lorenz96, t),
        System::Vdp => gen_vdp(&d.vdp, t, cfg.seeds.dynamics),
    }
}

pub fn mask_spec(cfg: &ExperimentConfig) -> MaskSpec {
    MaskSpec::new(cfg.omega, cfg.seeds.mask)
}

/// Applies the configured mask to a ground-truth trajectory.
pub fn observe(cfg: &ExperimentConfig, truth: &Trajectory) -> Result<ObservationSet> {
    let mask = make_mask(truth.y.nrows(), truth.y.ncols(), &mask_spec(cfg))?;
    ObservationSet::new(truth.y.clone(), mask, truth.u.clone(), truth.dt)
}

/// Linear and natural-spline baselines.
pub fn baselines(obs: &ObservationSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok((
        interp_linear(obs.y_obs(), obs.mask())?,
        interp_cubic_spline(obs.y_obs(), obs.mask())?,
    ))
}

pub fn summarize(
    y_r: &DMatrix<f64>,
    y_lin: &DMatrix<f64>,
    y_csp: &DMatrix<f64>,
    y_star: &DMatrix<f64>,
    washout: usize,
) -> Result<MetricSummary> {
    Ok(MetricSummary {
        all: MetricReport::compute(y_r, y_lin, y_csp, y_star, 0)?,
        after_washout: MetricReport::compute(y_r, y_lin, y_csp, y_star, washout + 1)?,
    })
}

struct MemberOutcome {
    result: MemberResult,
    y_r: Option<DMatrix<f64>>,
}

fn run_member(
    cfg: &ExperimentConfig,
    member: usize,
    obs: &ObservationSet,
    truth: &Trajectory,
    y_lin: &DMatrix<f64>,
    y_csp: &DMatrix<f64>,
) -> Result<MemberOutcome> {
    let spec = cfg.reservoir_spec(member);
    let start = Instant::now();
    let res = Reservoir::build(&spec)?;
    let run = reconstruct(&res, obs, &cfg.fixed_point_config())?;
    let metrics = summarize(&run.y_r, y_lin, y_csp, &truth.y, cfg.fixed_point.washout)?;
    Ok(MemberOutcome {
        result: MemberResult {
            reservoir_seed: spec.seed,
            metrics: Some(metrics),
            iterations: run.iterations,
            converged: run.converged,
            ridge_retries: run.theta.retried_targets.len(),
            improvements: run.improvements,
            wall_time_s: start.elapsed().as_secs_f64(),
            error: None,
        },
        y_r: Some(run.y_r),
    })
}

/// Full pipeline for one configuration. Ensemble members run in parallel; a
/// failing member is recorded when `ensemble > 1` and propagated otherwise.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let truth = generate_truth(cfg)?;
    let obs = observe(cfg, &truth)?;
    let (y_lin, y_csp) = baselines(&obs)?;

    let outcomes: Vec<Result<MemberOutcome>> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|m| run_member(cfg, m, &obs, &truth, &y_lin, &y_csp))
        .collect();

    let mut members = Vec::with_capacity(cfg.ensemble);
    let mut first_y_r = None;
    for (m, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                if m == 0 {
                    first_y_r = o.y_r;
                }
                members.push(o.result);
            }
            Err(e) if cfg.ensemble == 1 => return Err(e),
            Err(e) => {
                log::warn!("ensemble member {m} failed: {e}");
                members.push(MemberResult {
                    reservoir_seed: cfg.reservoir_spec(m).seed,
                    metrics: None,
                    improvements: Vec::new(),
                    iterations: 0,
                    converged: false,
                    ridge_retries: 0,
                    wall_time_s: 0.0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let head = members[0].clone();
    let ensemble = (cfg.ensemble > 1).then(|| EnsembleStats::from_members(&members));
    Ok(ExperimentResult {
        version: VERSION.to_string(),
        rng: crate::RNG_NAME.to_string(),
        config: cfg.clone(),
        missing_fraction: obs.missing_fraction(),
        metrics: head.metrics,
        improvements: head.improvements,
        iterations: head.iterations,
        converged: head.converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        members,
        ensemble,
        reconstruction: first_y_r.map(|y_r| Reconstruction {
            y_star: truth.y.clone(),
            mask: obs.mask().clone(),
            y_r,
            y_lin,
            y_csp,
            dt: truth.dt,
        }),
    })
}

/// Jacobian diagnostics at the ground-truth trajectory, with θ fitted on the
/// complete series (in normalized units when the config normalizes).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JacobianDiagnostics {
    pub version: String,
    pub config: ExperimentConfig,
    pub diag_bound: DiagBoundCheck,
    pub targets: Vec<JacobianReport>,
}

pub fn run_jacobian(cfg: &ExperimentConfig) -> Result<JacobianDiagnostics> {
    cfg.validate()?;
    let truth = generate_truth(cfg)?;
    let res = Reservoir::build(&cfg.reservoir_spec(0))?;
    let complete = ObservationSet::fully_observed(truth.y.clone(), truth.u.clone(), truth.dt)?;
    let scaler = if cfg.normalize_inputs() {
        crate::fixed_point::Standardizer::fit(&complete)
    } else {
        crate::fixed_point::Standardizer::identity(complete.n_target(), complete.n_exo())
    };
    let y = scaler.forward_y(&truth.y);
    let u = scaler.forward_u(&truth.u);
    let states = res.run_teacher_forced(
        &y.rows(0, cfg.t_len).into_owned(),
        &u.rows(0, cfg.t_len).into_owned(),
        &LatentState::zeros(res.n_latent()),
    )?;
    let fitted = cfg.t_len + 1 - cfg.fixed_point.washout.max(1);
    let beta = cfg.fixed_point.ridge_scaling.effective(cfg.beta(), fitted, fitted);
    let theta = fit_ridge_full(&states, &y, beta, cfg.fixed_point.washout)?;
    let targets = (0..y.ncols())
        .map(|j| l1_report(&res, &theta, &y, &u, &cfg.jacobian_config(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(JacobianDiagnostics {
        version: VERSION.to_string(),
        config: cfg.clone(),
        diag_bound: diag_bound_check(&res),
        targets,
    })
}
