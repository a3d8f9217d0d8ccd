//! Under-relaxed fixed-point iteration for trajectory reconstruction.
//!
//! Starting from a linear interpolation `Y⁰` of the observations, each
//! iteration
//!
//! 1. drives the reservoir with the current iterate `Yᵏ` (teacher forcing),
//! 2. fits the readout `θᵏ` on the observed samples only,
//! 3. re-synthesizes `E(Yᵏ)`: `E_0 = y_0`, `E_t = θᵏᵀ S_t`,
//! 4. blends `Yᵏ⁺¹ = α Yᵏ + (1 - α) E(Yᵏ)` at missing entries and
//!    re-imposes the observations,
//! 5. measures the l2-improvement `eᵏ = rms(Yᵏ⁺¹ - Yᵏ)` over `t > T_s`,
//!
//! until `eᵏ ≤ ε` or `k = k_max`. Steps 1 and 3 are separate reservoir passes,
//! so the `N_s x T` state history is never stored.

use std::borrow::Cow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::readout::{NormalEquationAccumulator, ReadoutMap, RidgeScaling};
use crate::reservoir::{LatentState, Reservoir};
use crate::sparsity::interp_linear;

/// Sampled series with missing entries.
///
/// Rows are time indices `t = 0..=T`. Missing entries of `y_obs` hold `NaN`
/// but are never inspected numerically: the mask is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    y_obs: DMatrix<f64>,
    mask: DMatrix<bool>,
    u: DMatrix<f64>,
    dt: f64,
}

impl ObservationSet {
    /// `y` may hold anything at unobserved entries; they are replaced by the
    /// missing marker. Row 0 must be fully observed.
    pub fn new(y: DMatrix<f64>, mask: DMatrix<bool>, u: DMatrix<f64>, dt: f64) -> Result<Self> {
        ensure_len("mask rows", y.nrows(), mask.nrows())?;
        ensure_len("mask columns", y.ncols(), mask.ncols())?;
        if u.ncols() > 0 {
            ensure_len("exogenous rows", y.nrows(), u.nrows())?;
        }
        if y.nrows() < 2 {
            return Err(Error::InvalidConfig("a series needs at least two samples".into()));
        }
        if y.ncols() == 0 {
            return Err(Error::InvalidConfig("a series needs at least one target variable".into()));
        }
        if let Some(j) = (0..y.ncols()).find(|&j| !mask[(0, j)]) {
            return Err(Error::InvalidConfig(format!(
                "variable {j} is unobserved at t = 0; the initial sample must be observed"
            )));
        }
        let mut y_obs = y;
        for (v, &m) in y_obs.iter_mut().zip(mask.iter()) {
            if !m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::InvalidConfig("observed values must be finite".into()));
            }
        }
        let u = if u.ncols() == 0 {
            DMatrix::zeros(y_obs.nrows(), 0)
        } else {
            u
        };
        Ok(Self { y_obs, mask, u, dt })
    }

    pub fn fully_observed(y: DMatrix<f64>, u: DMatrix<f64>, dt: f64) -> Result<Self> {
        let mask = DMatrix::from_element(y.nrows(), y.ncols(), true);
        Self::new(y, mask, u, dt)
    }

    pub fn y_obs(&self) -> &DMatrix<f64> {
        &self.y_obs
    }
    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// Number of rows, `T + 1`.
    pub fn len(&self) -> usize {
        self.y_obs.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `T`, the index of the last sample.
    pub fn t_len(&self) -> usize {
        self.len() - 1
    }
    pub fn n_target(&self) -> usize {
        self.y_obs.ncols()
    }
    pub fn n_exo(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_observed(&self, t: usize, j: usize) -> bool {
        self.mask[(t, j)]
    }

    /// `ω = (1 / (T N_y)) Σ_{t=1..T} Σ_j (1 - m_tj)`.
    pub fn missing_fraction(&self) -> f64 {
        let missing = self.mask.rows(1, self.t_len()).iter().filter(|&&m| !m).count();
        missing as f64 / (self.t_len() * self.n_target()) as f64
    }

    pub fn observed_count(&self, j: usize) -> usize {
        self.mask.column(j).iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Under-relaxation α in `(0, 1)`.
    pub relaxation: f64,
    /// Ridge parameter β.
    pub ridge: f64,
    #[serde(default)]
    pub ridge_scaling: RidgeScaling,
    /// Washout `T_s`.
    pub washout: usize,
    /// Stop once the l2-improvement drops to this level.
    pub tol: f64,
    pub max_iter: usize,
    /// Standardize every variable (from observed entries) around the ESN.
    pub normalize_inputs: bool,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            relaxation: 0.2,
            ridge: 1e-8,
            ridge_scaling: RidgeScaling::PerStep,
            washout: 200,
            tol: 1e-6,
            max_iter: 500,
            normalize_inputs: false,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.relaxation > 0.0 && self.relaxation < 1.0) {
            return bad(format!("relaxation must lie in (0, 1), got {}", self.relaxation));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge must be positive, got {}", self.ridge));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }
}

/// Result of [`reconstruct`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointRun {
    /// Reconstruction `Y^R`, equal to the observations where observed.
    pub y_r: DMatrix<f64>,
    /// Readout fitted in the final iteration (in normalized units when
    /// `normalize_inputs` is on).
    pub theta: ReadoutMap,
    /// `eᵏ` for every iteration performed.
    pub improvements: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Snapshot handed to the observer of [`reconstruct_with`] after each iteration.
pub struct IterationRecord<'a> {
    /// Iteration count after the update (1 for the first update).
    pub iteration: usize,
    pub improvement: f64,
    pub y_r: &'a DMatrix<f64>,
    pub theta: &'a ReadoutMap,
}

/// Initial iterate: per-variable linear interpolation of the observations.
pub fn initialize_linear(obs: &ObservationSet) -> Result<DMatrix<f64>> {
    interp_linear(obs.y_obs(), obs.mask())
}

/// `E(Y, U)`: row 0 copies `y_0`, row `t ≥ 1` is `θᵀ S_t` with `S_t` driven
/// by `y_0 … y_{t-1}`.
pub fn esn_operator(
    res: &Reservoir,
    theta: &ReadoutMap,
    y_r: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    ensure_len("readout rows", res.n_latent() + 1, theta.theta.nrows())?;
    ensure_len("readout columns", y_r.ncols(), theta.theta.ncols())?;
    let rows = y_r.nrows();
    let ny = y_r.ncols();
    let mut e = DMatrix::zeros(rows, ny);
    e.row_mut(0).copy_from(&y_r.row(0));
    let mut pred = vec![0.0; ny];
    res.for_each_state(
        y_r,
        u,
        &LatentState::zeros(res.n_latent()),
        rows - 1,
        |t, s| {
            theta.predict_into(s, &mut pred);
            for (j, &p) in pred.iter().enumerate() {
                e[(t, j)] = p;
            }
        },
    )?;
    Ok(e)
}

/// Blends `α y_prev + (1 - α) e_out` at missing entries and copies the
/// observations elsewhere.
pub fn relax_update(
    y_prev: &DMatrix<f64>,
    e_out: &DMatrix<f64>,
    obs: &ObservationSet,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    ensure_len("operator output rows", y_prev.nrows(), e_out.nrows())?;
    ensure_len("operator output columns", y_prev.ncols(), e_out.ncols())?;
    ensure_len("observation rows", y_prev.nrows(), obs.len())?;
    ensure_len("observation columns", y_prev.ncols(), obs.n_target())?;
    let mut next = DMatrix::zeros(y_prev.nrows(), y_prev.ncols());
    for (k, out) in next.iter_mut().enumerate() {
        *out = if obs.mask.as_slice()[k] {
            obs.y_obs.as_slice()[k]
        } else {
            alpha * y_prev.as_slice()[k] + (1.0 - alpha) * e_out.as_slice()[k]
        };
    }
    Ok(next)
}

/// `eᵏ = sqrt( Σ_{t > T_s} Σ_j (y_next - y_prev)² / (N_y (T - T_s)) )`.
pub fn l2_improvement(y_next: &DMatrix<f64>, y_prev: &DMatrix<f64>, washout: usize) -> Result<f64> {
    ensure_len("rows", y_prev.nrows(), y_next.nrows())?;
    ensure_len("columns", y_prev.ncols(), y_next.ncols())?;
    let t_len = y_next.nrows().saturating_sub(1);
    if t_len <= washout {
        return Err(Error::InvalidConfig(format!(
            "series length T = {t_len} must exceed the washout {washout}"
        )));
    }
    let mut sum = 0.0;
    for j in 0..y_next.ncols() {
        for t in washout + 1..=t_len {
            let d = y_next[(t, j)] - y_prev[(t, j)];
            sum += d * d;
        }
    }
    Ok((sum / (y_next.ncols() * (t_len - washout)) as f64).sqrt())
}

/// Per-variable affine standardization, fitted on observed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub y_mean: Vec<f64>,
    pub y_scale: Vec<f64>,
    pub u_mean: Vec<f64>,
    pub u_scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(obs: &ObservationSet) -> Self {
        let (y_mean, y_scale) = (0..obs.n_target())
            .map(|j| {
                let vals: Vec<f64> = (0..obs.len())
                    .filter(|&t| obs.mask[(t, j)])
                    .map(|t| obs.y_obs[(t, j)])
                    .collect();
                mean_and_scale(&vals)
            })
            .unzip();
        let (u_mean, u_scale) = (0..obs.n_exo())
            .map(|j| mean_and_scale(obs.u.column(j).as_slice()))
            .unzip();
        Self {
            y_mean,
            y_scale,
            u_mean,
            u_scale,
        }
    }

    pub fn identity(n_target: usize, n_exo: usize) -> Self {
        Self {
            y_mean: vec![0.0; n_target],
            y_scale: vec![1.0; n_target],
            u_mean: vec![0.0; n_exo],
            u_scale: vec![1.0; n_exo],
        }
    }

    pub fn forward_y(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        apply(y, &self.y_mean, &self.y_scale, false)
    }
    pub fn inverse_y(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        apply(y, &self.y_mean, &self.y_scale, true)
    }
    pub fn forward_u(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        apply(u, &self.u_mean, &self.u_scale, false)
    }
}

fn mean_and_scale(vals: &[f64]) -> (f64, f64) {
    let n = vals.len().max(1) as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

fn apply(m: &DMatrix<f64>, mean: &[f64], scale: &[f64], inverse: bool) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        for v in col.iter_mut() {
            *v = if inverse {
                *v * scale[j] + mean[j]
            } else {
                (*v - mean[j]) / scale[j]
            };
        }
    }
    out
}

/// Largest state history (in f64 entries) kept between the two passes of an
/// iteration; longer runs drive the reservoir twice.
pub const STATE_CACHE_LIMIT: usize = 1 << 26;

/// Runs the fixed-point iteration to convergence or `max_iter`.
pub fn reconstruct(res: &Reservoir, obs: &ObservationSet, cfg: &FixedPointConfig) -> Result<FixedPointRun> {
    reconstruct_with(res, obs, cfg, |_| {})
}

/// [`reconstruct`] with a callback after every iteration.
pub fn reconstruct_with<F>(
    res: &Reservoir,
    obs: &ObservationSet,
    cfg: &FixedPointConfig,
    mut observer: F,
) -> Result<FixedPointRun>
where
    F: FnMut(&IterationRecord<'_>),
{
    cfg.validate()?;
    ensure_len("reservoir target inputs", obs.n_target(), res.n_target())?;
    ensure_len("reservoir exogenous inputs", obs.n_exo(), res.n_exo())?;
    let t_len = obs.t_len();
    if t_len <= cfg.washout {
        return Err(Error::InvalidConfig(format!(
            "series length T = {t_len} must exceed the washout {}",
            cfg.washout
        )));
    }
    let ny = obs.n_target();
    let first_fit = cfg.washout.max(1);
    for j in 0..ny {
        if !(first_fit..=t_len).any(|t| obs.mask[(t, j)]) {
            return Err(Error::InsufficientObservations {
                variable: j,
                after_washout: true,
            });
        }
    }

    let scaler = if cfg.normalize_inputs {
        Standardizer::fit(obs)
    } else {
        Standardizer::identity(ny, obs.n_exo())
    };
    let u_in: Cow<'_, DMatrix<f64>> = if cfg.normalize_inputs {
        Cow::Owned(scaler.forward_u(&obs.u))
    } else {
        Cow::Borrowed(&obs.u)
    };
    let y_obs_in: Cow<'_, DMatrix<f64>> = if cfg.normalize_inputs {
        Cow::Owned(scaler.forward_y(&obs.y_obs))
    } else {
        Cow::Borrowed(&obs.y_obs)
    };

    let dim = res.n_latent() + 1;
    let s0 = LatentState::zeros(res.n_latent());
    let mut y_r = initialize_linear(obs)?;
    let mut improvements = Vec::new();
    let mut theta = ReadoutMap::zeros(res.n_latent(), ny);
    let mut converged = false;

    let mut cache = (dim * t_len <= STATE_CACHE_LIMIT).then(|| DMatrix::zeros(dim, t_len));
    let mut target = vec![0.0; ny];
    let mut seen = vec![false; ny];
    for k in 0..cfg.max_iter {
        let y_in: Cow<'_, DMatrix<f64>> = if cfg.normalize_inputs {
            Cow::Owned(scaler.forward_y(&y_r))
        } else {
            Cow::Borrowed(&y_r)
        };

        // Pass 1: masked normal equations from the teacher-forced states.
        let mut acc = NormalEquationAccumulator::per_target(dim, ny);
        res.for_each_state(&y_in, &u_in, &s0, t_len, |t, s| {
            if let Some(c) = cache.as_mut() {
                c.column_mut(t - 1).copy_from_slice(s);
            }
            if t < first_fit {
                return;
            }
            for j in 0..ny {
                seen[j] = obs.mask[(t, j)];
                target[j] = if seen[j] { y_obs_in[(t, j)] } else { 0.0 };
            }
            acc.push(s, &target, &seen);
        })?;
        theta = acc.solve_scaled(cfg.ridge, cfg.ridge_scaling)?;

        // Pass 2: re-synthesis and relaxation.
        let e_in = match &cache {
            Some(c) => {
                let mut e = DMatrix::zeros(t_len + 1, ny);
                e.row_mut(0).copy_from(&y_in.row(0));
                let pred = theta.theta.tr_mul(c);
                e.rows_mut(1, t_len).copy_from(&pred.transpose());
                e
            }
            None => esn_operator(res, &theta, &y_in, &u_in)?,
        };
        drop(y_in);
        let e_out = if cfg.normalize_inputs {
            let mut e = scaler.inverse_y(&e_in);
            e.row_mut(0).copy_from(&y_r.row(0));
            e
        } else {
            e_in
        };
        // The readout is not fitted before `first_fit`; those rows keep
        // their initial values.
        let mut e_out = e_out;
        e_out.rows_mut(0, first_fit).copy_from(&y_r.rows(0, first_fit));
        let y_next = relax_update(&y_r, &e_out, obs, cfg.relaxation)?;
        let improvement = l2_improvement(&y_next, &y_r, cfg.washout)?;
        y_r = y_next;
        improvements.push(improvement);
        observer(&IterationRecord {
            iteration: k + 1,
            improvement,
            y_r: &y_r,
            theta: &theta,
        });
        if improvement <= cfg.tol {
            converged = true;
            break;
        }
        if !improvement.is_finite() {
            log::warn!("fixed-point iteration diverged at iteration {}", k + 1);
            break;
        }
    }

    Ok(FixedPointRun {
        y_r,
        theta,
        iterations: improvements.len(),
        improvements,
        converged,
    })
}
