//! Parameter sweeps over a cartesian grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepGrid};
use super::report::ExperimentResult;
use super::run_experiment;

/// One grid point. A failed cell keeps its error and the sweep moves on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub params: BTreeMap<String, f64>,
    pub result: Option<ExperimentResult>,
    pub error: Option<String>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.leak.is_empty()
            && self.scale_b.is_empty()
            && self.sparsity.is_empty()
            && self.n_latent.is_empty()
            && self.omega.is_empty()
            && self.alpha.is_empty()
            && self.beta.is_empty()
    }

    /// Every combination of the listed values; an empty axis is left at the
    /// base value.
    pub fn cells(&self) -> Vec<BTreeMap<String, f64>> {
        let axes: Vec<(&str, Vec<f64>)> = vec![
            ("leak", self.leak.clone()),
            ("scale_b", self.scale_b.clone()),
            ("sparsity", self.sparsity.clone()),
            ("n_latent", self.n_latent.iter().map(|&n| n as f64).collect()),
            ("omega", self.omega.clone()),
            ("alpha", self.alpha.clone()),
            ("beta", self.beta.clone()),
        ];
        let mut cells = vec![BTreeMap::new()];
        for (name, values) in axes.into_iter().filter(|(_, v)| !v.is_empty()) {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.insert(name.to_string(), v);
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

/// Base config with one cell's values substituted.
pub fn apply_cell(base: &ExperimentConfig, params: &BTreeMap<String, f64>) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.sweep = SweepGrid::default();
    for (k, &v) in params {
        match k.as_str() {
            "leak" => cfg.reservoir.leak = v,
            "scale_b" => cfg.reservoir.scale_b = v,
            "sparsity" => cfg.reservoir.sparsity = v,
            "n_latent" => cfg.reservoir.n_latent = v as usize,
            "omega" => cfg.omega = v,
            "alpha" => cfg.alpha = Some(v),
            "beta" => cfg.beta = Some(v),
            _ => unreachable!("unknown sweep axis {k}"),
        }
    }
    cfg
}

/// Runs every cell of `grid` (in parallel on the current rayon pool).
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Vec<SweepCell> {
    grid.cells()
        .into_par_iter()
        .map(|params| {
            let cfg = apply_cell(base, &params);
            match run_experiment(&cfg) {
                Ok(mut r) => {
                    r.reconstruction = None;
                    SweepCell {
                        params,
                        result: Some(r),
                        error: None,
                    }
                }
                Err(e) => {
                    log::warn!("sweep cell {params:?} failed: {e}");
                    SweepCell {
                        params,
                        result: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// Summary rows: the cell parameters, then convergence and metric columns.
pub fn summary_table(cells: &[SweepCell]) -> (Vec<String>, Vec<Vec<String>>) {
    let keys: Vec<String> = cells
        .first()
        .map(|c| c.params.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = keys.clone();
    header.extend(
        [
            "converged",
            "iterations",
            "members_converged",
            "sigma_lin",
            "sigma_csp",
            "nrmse",
            "sigma_lin_mean",
            "sigma_lin_std",
            "error",
        ]
        .map(String::from),
    );
    let rows = cells
        .iter()
        .map(|c| {
            let mut row: Vec<String> = keys.iter().map(|k| format!("{}", c.params[k])).collect();
            match &c.result {
                Some(r) => {
                    let m = r.metrics.map(|m| m.all);
                    let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
                    let converged_members = r.members.iter().filter(|m| m.converged).count();
                    let stat = r.ensemble.as_ref().and_then(|e| e.sigma_lin);
                    row.extend([
                        r.converged.to_string(),
                        r.iterations.to_string(),
                        format!("{converged_members}/{}", r.members.len()),
                        f(m.map(|m| m.sigma_lin_intp)),
                        f(m.map(|m| m.sigma_csp_intp)),
                        f(m.map(|m| m.nrmse)),
                        f(stat.map(|s| s.mean)),
                        f(stat.map(|s| s.std)),
                        String::new(),
                    ]);
                }
                None => {
                    row.extend(std::iter::repeat_n(String::new(), 8));
                    row.push(c.error.clone().unwrap_or_default());
                }
            }
            row
        })
        .collect();
    (header, rows)
}
