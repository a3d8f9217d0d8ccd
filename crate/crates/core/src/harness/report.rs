//! Experiment results and their JSON / CSV renderings.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::io::{write_atomic, write_columns};
use crate::error::Result;
use crate::sparsity::MetricReport;

/// Metrics over the whole series and over `t > T_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub all: MetricReport,
    pub after_washout: MetricReport,
}

/// Outcome for one reservoir realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberResult {
    pub reservoir_seed: u64,
    pub metrics: Option<MetricSummary>,
    pub improvements: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Readout factorizations that needed the 10x ridge retry (last iteration).
    pub ridge_retries: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

/// Statistics over converged ensemble members; the rest are counted only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub members: usize,
    pub included: usize,
    pub excluded_nonconverged: usize,
    pub failed: usize,
    pub sigma_lin: Option<Stat>,
    pub sigma_csp: Option<Stat>,
    pub nrmse: Option<Stat>,
}

impl EnsembleStats {
    pub fn from_members(members: &[MemberResult]) -> Self {
        let ok: Vec<&MetricSummary> = members
            .iter()
            .filter(|m| m.converged)
            .filter_map(|m| m.metrics.as_ref())
            .collect();
        let pick = |f: fn(&MetricSummary) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        let failed = members.iter().filter(|m| m.error.is_some()).count();
        Self {
            members: members.len(),
            included: ok.len(),
            excluded_nonconverged: members.len() - ok.len() - failed,
            failed,
            sigma_lin: pick(|m| m.all.sigma_lin_intp),
            sigma_csp: pick(|m| m.all.sigma_csp_intp),
            nrmse: pick(|m| m.all.nrmse),
        }
    }
}

/// Series kept in memory for the per-timestep table; not serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub y_star: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub y_r: DMatrix<f64>,
    pub y_lin: DMatrix<f64>,
    pub y_csp: DMatrix<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: String,
    pub rng: String,
    pub config: ExperimentConfig,
    /// Missing fraction of the realized mask.
    pub missing_fraction: f64,
    /// First ensemble member.
    pub metrics: Option<MetricSummary>,
    pub improvements: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub members: Vec<MemberResult>,
    pub ensemble: Option<EnsembleStats>,
    #[serde(skip)]
    pub reconstruction: Option<Reconstruction>,
}

impl ExperimentResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn emit_report(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_atomic(path, result.to_json()?.as_bytes())
}

/// Per-timestep table `t, y*, observed, y^R, y^lin, y^csp` for every variable.
pub fn write_plot_table(rec: &Reconstruction, path: &Path) -> Result<()> {
    let rows = rec.y_star.nrows();
    let mut names = vec!["t".to_string()];
    let mut cols = vec![(0..rows).map(|t| t as f64 * rec.dt).collect::<Vec<_>>()];
    for j in 0..rec.y_star.ncols() {
        let k = j + 1;
        for (name, m) in [("y_star", &rec.y_star), ("y_r", &rec.y_r), ("y_lin", &rec.y_lin), ("y_csp", &rec.y_csp)] {
            names.push(format!("{name}_{k}"));
            cols.push(m.column(j).iter().copied().collect());
        }
        names.push(format!("observed_{k}"));
        cols.push(rec.mask.column(j).iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());
    }
    write_columns(path, &names, &cols)
}
