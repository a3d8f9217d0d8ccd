//! Linear readout `y_t = θᵀ S_t`, fitted by (masked) ridge regression.
//!
//! Time indexing follows the reconstruction loop: `states[t - 1]` holds the
//! augmented state `S_t` for `t = 1..=T`, and target matrices have `T + 1`
//! rows indexed by `t` (row 0 is the initial condition and never fitted).
//! Sums run over `t ≥ max(T_s, 1)`.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::fixed_point::ObservationSet;

/// Rows buffered before a rank-k Gram update.
const CHUNK: usize = 256;

/// How β enters the normal equations. `Total` solves `(G + βI)θ = r` with
/// the raw sums. `PerSample` uses `β n` where `n` is the number of observed
/// samples behind `G`. `PerStep` uses `β T_fit`, the number of fitted time
/// steps whether observed or not, so the sums act as time averages over the
/// whole window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeScaling {
    Total,
    PerSample,
    #[default]
    PerStep,
}

impl RidgeScaling {
    /// Ridge added to a Gram matrix built from `samples` observations out of
    /// `steps` fitted time steps.
    pub fn effective(self, beta: f64, samples: usize, steps: usize) -> f64 {
        match self {
            Self::Total => beta,
            Self::PerSample => beta * samples.max(1) as f64,
            Self::PerStep => beta * steps.max(1) as f64,
        }
    }
}

/// Fitted readout: `theta` is `(N_s + 1) x N_y`, row 0 multiplies the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutMap {
    pub theta: DMatrix<f64>,
    /// Requested ridge parameter β.
    pub ridge: f64,
    /// Targets whose system needed the one-time `10 β` retry.
    pub retried_targets: Vec<usize>,
}

impl ReadoutMap {
    pub fn zeros(n_latent: usize, n_target: usize) -> Self {
        Self {
            theta: DMatrix::zeros(n_latent + 1, n_target),
            ridge: 0.0,
            retried_targets: Vec::new(),
        }
    }

    pub fn n_target(&self) -> usize {
        self.theta.ncols()
    }

    /// `θᵀ S` for an augmented state.
    pub fn predict(&self, state: &[f64]) -> Result<DVector<f64>> {
        ensure_len("augmented state", self.theta.nrows(), state.len())?;
        let mut out = DVector::zeros(self.theta.ncols());
        self.predict_into(state, out.as_mut_slice());
        Ok(out)
    }

    #[inline]
    pub(crate) fn predict_into(&self, state: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self
                .theta
                .column(j)
                .iter()
                .zip(state)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

/// Running Gram matrices `Σ m_tj S_t S_tᵀ` and moments `Σ m_tj y_tj S_t`.
///
/// With a shared mask one Gram serves every target; otherwise each target
/// keeps its own. Rows are buffered and folded in with a matrix product.
#[derive(Debug, Clone)]
pub struct NormalEquationAccumulator {
    dim: usize,
    shared: bool,
    grams: Vec<DMatrix<f64>>,
    moments: Vec<DVector<f64>>,
    counts: Vec<usize>,
    rows: usize,
    buffers: Vec<DMatrix<f64>>,
    fill: Vec<usize>,
}

impl NormalEquationAccumulator {
    /// Every target observed at every pushed row.
    pub fn shared(dim: usize, n_target: usize) -> Self {
        Self::new(dim, n_target, true)
    }

    /// Independent observation pattern per target.
    pub fn per_target(dim: usize, n_target: usize) -> Self {
        Self::new(dim, n_target, false)
    }

    fn new(dim: usize, n_target: usize, shared: bool) -> Self {
        let n_gram = if shared { 1 } else { n_target };
        Self {
            dim,
            shared,
            grams: vec![DMatrix::zeros(dim, dim); n_gram],
            moments: vec![DVector::zeros(dim); n_target],
            counts: vec![0; n_target],
            rows: 0,
            buffers: vec![DMatrix::zeros(dim, CHUNK.min(dim.max(8))); n_gram],
            fill: vec![0; n_gram],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_target(&self) -> usize {
        self.moments.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Rows pushed so far, observed or not.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Adds `S_t` with targets `y_t`; `observed[j]` selects which targets see it.
    pub fn push(&mut self, state: &[f64], target: &[f64], observed: &[bool]) {
        debug_assert_eq!(state.len(), self.dim);
        self.rows += 1;
        if self.shared {
            debug_assert!(observed.iter().all(|&o| o), "shared accumulator needs full rows");
            self.buffer_row(0, state);
        }
        for j in 0..self.moments.len() {
            if !observed[j] {
                continue;
            }
            if !self.shared {
                self.buffer_row(j, state);
            }
            self.counts[j] += 1;
            let yj = target[j];
            for (m, s) in self.moments[j].iter_mut().zip(state) {
                *m += yj * s;
            }
        }
    }

    fn buffer_row(&mut self, g: usize, state: &[f64]) {
        let k = self.fill[g];
        self.buffers[g].column_mut(k).copy_from_slice(state);
        self.fill[g] += 1;
        if self.fill[g] == self.buffers[g].ncols() {
            self.flush(g);
        }
    }

    fn flush(&mut self, g: usize) {
        let k = self.fill[g];
        if k == 0 {
            return;
        }
        let x = self.buffers[g].columns(0, k);
        let xt = x.transpose();
        self.grams[g].gemm(1.0, &x, &xt, 1.0);
        self.fill[g] = 0;
    }

    /// Folds any buffered rows into the Gram matrices.
    pub fn finish(&mut self) {
        for g in 0..self.grams.len() {
            self.flush(g);
        }
    }

    /// Gram matrix seen by target `j` (call [`finish`](Self::finish) first).
    pub fn gram(&self, j: usize) -> &DMatrix<f64> {
        &self.grams[if self.shared { 0 } else { j }]
    }

    pub fn moment(&self, j: usize) -> &DVector<f64> {
        &self.moments[j]
    }

    /// Solves `(G_j + βI) θ_j = r_j` for every target. A failed factorization
    /// is retried once at `10 β` with a warning.
    pub fn solve(&mut self, beta: f64) -> Result<ReadoutMap> {
        self.solve_scaled(beta, RidgeScaling::Total)
    }

    /// [`solve`](Self::solve) with the ridge of target `j` taken as
    /// `scaling.effective(β, n_j, rows)`.
    pub fn solve_scaled(&mut self, beta: f64, scaling: RidgeScaling) -> Result<ReadoutMap> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge must be positive, got {beta}")));
        }
        self.finish();
        let n_target = self.n_target();
        let mut theta = DMatrix::zeros(self.dim, n_target);
        let mut retried = Vec::new();
        let mut shared_factor: Option<(Cholesky<f64, Dyn>, bool)> = None;

        for j in 0..n_target {
            let b = scaling.effective(beta, self.counts[j], self.rows);
            let (factor, was_retried) = if self.shared {
                if shared_factor.is_none() {
                    shared_factor = Some(self.factor(0, j, b)?);
                }
                let (f, r) = shared_factor.as_ref().unwrap();
                (f.clone(), *r)
            } else {
                self.factor(j, j, b)?
            };
            if was_retried {
                retried.push(j);
            }
            theta.set_column(j, &factor.solve(&self.moments[j]));
        }
        Ok(ReadoutMap {
            theta,
            ridge: beta,
            retried_targets: retried,
        })
    }

    fn factor(&self, g: usize, target: usize, beta: f64) -> Result<(Cholesky<f64, Dyn>, bool)> {
        let gram = &self.grams[g];
        let attempt = |b: f64| {
            let mut m = gram.clone();
            for i in 0..self.dim {
                m[(i, i)] += b;
            }
            Cholesky::new(m)
        };
        if let Some(c) = attempt(beta) {
            return Ok((c, false));
        }
        warn!("ridge system for target {target} not positive definite at beta = {beta:e}; retrying at {:e}", 10.0 * beta);
        if let Some(c) = attempt(10.0 * beta) {
            return Ok((c, true));
        }
        let max_diag = gram.diagonal().iter().cloned().fold(0.0, f64::max);
        Err(Error::Factorization {
            target,
            beta,
            condition: (max_diag + beta) / beta,
        })
    }
}

fn check_states(states: &[DVector<f64>], rows: usize, washout: usize) -> Result<usize> {
    ensure_len("states (one per t = 1..=T)", rows.saturating_sub(1), states.len())?;
    let t_len = states.len();
    if t_len <= washout {
        return Err(Error::InvalidConfig(format!(
            "series length T = {t_len} must exceed the washout {washout}"
        )));
    }
    Ok(states.first().map_or(0, |s| s.len()))
}

/// Unmasked ridge fit: `θ = (Σ S_t S_tᵀ + βI)⁻¹ Σ S_t y_tᵀ` over `t ≥ T_s`.
pub fn fit_ridge_full(
    states: &[DVector<f64>],
    targets: &DMatrix<f64>,
    beta: f64,
    washout: usize,
) -> Result<ReadoutMap> {
    let dim = check_states(states, targets.nrows(), washout)?;
    let n_target = targets.ncols();
    let mut acc = NormalEquationAccumulator::shared(dim, n_target);
    let observed = vec![true; n_target];
    let mut row = vec![0.0; n_target];
    for t in washout.max(1)..=states.len() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = targets[(t, j)];
        }
        acc.push(states[t - 1].as_slice(), &row, &observed);
    }
    acc.solve(beta)
}

/// Masked ridge fit: target `j` only sees the samples where it is observed.
pub fn fit_ridge_masked(
    states: &[DVector<f64>],
    obs: &ObservationSet,
    beta: f64,
    washout: usize,
) -> Result<ReadoutMap> {
    let dim = check_states(states, obs.len(), washout)?;
    let n_target = obs.n_target();
    let mut acc = NormalEquationAccumulator::per_target(dim, n_target);
    let mut row = vec![0.0; n_target];
    let mut seen = vec![false; n_target];
    for t in washout.max(1)..=states.len() {
        for j in 0..n_target {
            seen[j] = obs.mask()[(t, j)];
            row[j] = if seen[j] { obs.y_obs()[(t, j)] } else { 0.0 };
        }
        acc.push(states[t - 1].as_slice(), &row, &seen);
    }
    if let Some(j) = acc.counts().iter().position(|&c| c == 0) {
        return Err(Error::InsufficientObservations {
            variable: j,
            after_washout: true,
        });
    }
    acc.solve(beta)
}
