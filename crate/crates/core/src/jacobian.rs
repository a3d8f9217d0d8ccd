//! Jacobian of the fixed-point map at a candidate trajectory.
//!
//! For a single target variable and a frozen readout θ the map
//! `G(Y)_i = α y_i + (1 - α) θᵀ S_i(Y)` has the lower-triangular Jacobian
//!
//! ```text
//! J_ij = 0                                      i < j
//!      = α                                      i = j
//!      = (1-α)(1-λ) θ̃ᵀ K_{j+1}^{i-1} Z_j B_y   i > j
//! ```
//!
//! with `Z_k = diag(cosh⁻²(A s_k + B_y y_k + B_u u_k))`, `F_k = λI + (1-λ) Z_k A`
//! and `K_l^m = F_m ⋯ F_l` (identity when `m < l`). Multivariate series are
//! handled one target column at a time with the other inputs frozen.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::readout::ReadoutMap;
use crate::reservoir::{MatVec, Reservoir};

/// Windows longer than this get a warning: the cost is quadratic in length.
pub const LONG_WINDOW: usize = 2000;

/// Diagonal of `Z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhGainDiag {
    pub z: DVector<f64>,
}

/// `cosh⁻²` of the same pre-activation the forward step feeds to tanh.
pub fn tanh_gain(res: &Reservoir, s: &[f64], y: &[f64], u: &[f64]) -> Result<TanhGainDiag> {
    ensure_len("latent state", res.n_latent(), s.len())?;
    ensure_len("target input", res.n_target(), y.len())?;
    ensure_len("exogenous input", res.n_exo(), u.len())?;
    let mut pre = vec![0.0; res.n_latent()];
    res.preactivation(s, y, u, &mut pre);
    Ok(TanhGainDiag {
        z: DVector::from_iterator(pre.len(), pre.iter().map(|&x| sech2(x))),
    })
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// `Z_0 … Z_{n-1}` along the teacher-forced run from `s_0 = 0` driven by the
/// rows of `y`/`u`, where `Z_k` belongs to the update `s_k → s_{k+1}`.
pub fn gains_along(res: &Reservoir, y: &DMatrix<f64>, u: &DMatrix<f64>, n: usize) -> Result<Vec<TanhGainDiag>> {
    ensure_len("target columns", res.n_target(), y.ncols())?;
    ensure_len("exogenous columns", res.n_exo(), u.ncols())?;
    if y.nrows() < n || (res.n_exo() > 0 && u.nrows() < n) {
        return Err(Error::DimensionMismatch {
            context: "trajectory rows",
            expected: n,
            got: y.nrows(),
        });
    }
    let ns = res.n_latent();
    let lam = res.leak();
    let mut s = vec![0.0; ns];
    let mut pre = vec![0.0; ns];
    let mut yk = vec![0.0; res.n_target()];
    let mut uk = vec![0.0; res.n_exo()];
    let mut gains = Vec::with_capacity(n);
    for k in 0..n {
        for (j, v) in yk.iter_mut().enumerate() {
            *v = y[(k, j)];
        }
        for (j, v) in uk.iter_mut().enumerate() {
            *v = u[(k, j)];
        }
        res.preactivation(&s, &yk, &uk, &mut pre);
        gains.push(TanhGainDiag {
            z: DVector::from_iterator(ns, pre.iter().map(|&x| sech2(x))),
        });
        for (si, &p) in s.iter_mut().zip(&pre) {
            *si = lam * *si + (1.0 - lam) * crate::reservoir::tanh(p);
        }
    }
    Ok(gains)
}

/// `w ← F_k w = λ w + (1-λ) Z_k A w`.
fn apply_factor(res: &Reservoir, gain: &TanhGainDiag, w: &mut [f64], scratch: &mut [f64]) {
    let lam = res.leak();
    res.a().mul_vec(w, scratch);
    for ((wi, &ai), &zi) in w.iter_mut().zip(scratch.iter()).zip(gain.z.iter()) {
        *wi = lam * *wi + (1.0 - lam) * zi * ai;
    }
}

/// Dense `K_l^m = F_m ⋯ F_l`; identity when `m < l`.
pub fn k_product(res: &Reservoir, gains: &[TanhGainDiag], l: usize, m: usize) -> Result<DMatrix<f64>> {
    let n = res.n_latent();
    let mut k = DMatrix::identity(n, n);
    if m < l {
        return Ok(k);
    }
    if m >= gains.len() {
        return Err(Error::DimensionMismatch {
            context: "gain sequence",
            expected: m + 1,
            got: gains.len(),
        });
    }
    let mut scratch = vec![0.0; n];
    for c in 0..n {
        let mut col: Vec<f64> = k.column(c).iter().copied().collect();
        for gain in &gains[l..=m] {
            apply_factor(res, gain, &mut col, &mut scratch);
        }
        k.set_column(c, &DVector::from_vec(col));
    }
    Ok(k)
}

fn theta_tilde(res: &Reservoir, theta: &ReadoutMap, target: usize) -> Result<Vec<f64>> {
    ensure_len("readout rows", res.n_latent() + 1, theta.theta.nrows())?;
    if target >= theta.theta.ncols() || target >= res.n_target() {
        return Err(Error::InvalidConfig(format!("target column {target} out of range")));
    }
    Ok(theta.theta.column(target).iter().skip(1).copied().collect())
}

/// Values `θ̃ᵀ K_{j+1}^{i-1} (1-λ) Z_j B_y` for `i = j+1 ..= last`.
fn column_tail(res: &Reservoir, tt: &[f64], gains: &[TanhGainDiag], j: usize, last: usize, target: usize) -> Vec<f64> {
    let lam = res.leak();
    let mut w: Vec<f64> = res
        .b_y()
        .column(target)
        .iter()
        .zip(gains[j].z.iter())
        .map(|(&b, &z)| (1.0 - lam) * z * b)
        .collect();
    let mut scratch = vec![0.0; w.len()];
    let mut out = Vec::with_capacity(last.saturating_sub(j));
    for i in j + 1..=last {
        out.push(tt.iter().zip(&w).map(|(a, b)| a * b).sum());
        if i < last {
            apply_factor(res, &gains[i], &mut w, &mut scratch);
        }
    }
    out
}

/// Single entry `J_ij`.
pub fn jacobian_entry(
    res: &Reservoir,
    theta: &ReadoutMap,
    gains: &[TanhGainDiag],
    i: usize,
    j: usize,
    alpha: f64,
    target: usize,
) -> Result<f64> {
    if i < j {
        return Ok(0.0);
    }
    if i == j {
        return Ok(alpha);
    }
    if i > gains.len() {
        return Err(Error::DimensionMismatch {
            context: "gain sequence",
            expected: i,
            got: gains.len(),
        });
    }
    let tt = theta_tilde(res, theta, target)?;
    let tail = column_tail(res, &tt, gains, j, i, target);
    Ok((1.0 - alpha) * tail[i - j - 1])
}

/// Dense block of `J` over rows and columns `first ..= last`.
pub fn jacobian_matrix(
    res: &Reservoir,
    theta: &ReadoutMap,
    gains: &[TanhGainDiag],
    first: usize,
    last: usize,
    alpha: f64,
    target: usize,
) -> Result<DMatrix<f64>> {
    let tt = theta_tilde(res, theta, target)?;
    check_window(gains, first, last)?;
    let n = last - first + 1;
    let mut jm = DMatrix::zeros(n, n);
    for j in first..=last {
        jm[(j - first, j - first)] = alpha;
        for (k, v) in column_tail(res, &tt, gains, j, last, target).into_iter().enumerate() {
            jm[(j - first + 1 + k, j - first)] = (1.0 - alpha) * v;
        }
    }
    Ok(jm)
}

fn check_window(gains: &[TanhGainDiag], first: usize, last: usize) -> Result<()> {
    if first > last {
        return Err(Error::InvalidConfig(format!("empty window {first}..={last}")));
    }
    if last >= gains.len() {
        return Err(Error::DimensionMismatch {
            context: "gain sequence",
            expected: last + 1,
            got: gains.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianConfig {
    pub alpha: f64,
    pub target: usize,
    /// First column of the diagnostic window (at least 1).
    pub first: usize,
    /// Last row/column of the window; defaults to the end of the trajectory.
    pub last: Option<usize>,
}

impl Default for JacobianConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            target: 0,
            first: 1,
            last: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub target: usize,
    pub l1_norm: f64,
    /// Column `J` attaining the l1 norm.
    pub argmax_column: usize,
    /// `Σ_{i>J} |θ̃ᵀ K_{J+1}^{i-1} Z_J B_y|`.
    pub sufficient_condition_lhs: f64,
    /// `lhs < 1 / (1 - λ)`.
    pub sufficient_condition_satisfied: bool,
    /// `(1 - λ^{T-J}) |θ̃ᵀ B_y|`, the `Z = I` heuristic (compare against 1).
    pub simplified_bound: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub first: usize,
    pub last: usize,
    pub column_sums: Vec<f64>,
}

/// Column sums of `|J|` over a window of the trajectory `y` (rows `0..=T`),
/// propagating `F_i w` instead of forming `K`.
pub fn l1_report(
    res: &Reservoir,
    theta: &ReadoutMap,
    y: &DMatrix<f64>,
    u: &DMatrix<f64>,
    cfg: &JacobianConfig,
) -> Result<JacobianReport> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let t_len = y.nrows().saturating_sub(1);
    let last = cfg.last.unwrap_or(t_len).min(t_len);
    let first = cfg.first.max(1);
    if first > last {
        return Err(Error::InvalidConfig(format!("empty window {first}..={last}")));
    }
    if last - first + 1 > LONG_WINDOW {
        log::warn!(
            "Jacobian window of {} samples; cost grows quadratically",
            last - first + 1
        );
    }
    let tt = theta_tilde(res, theta, cfg.target)?;
    let gains = gains_along(res, y, u, last + 1)?;
    let lam = res.leak();
    let alpha = cfg.alpha;

    let tails: Vec<f64> = (first..=last)
        .into_par_iter()
        .map(|j| {
            column_tail(res, &tt, &gains, j, last, cfg.target)
                .iter()
                .map(|v| v.abs())
                .sum::<f64>()
        })
        .collect();
    let column_sums: Vec<f64> = tails.iter().map(|s| alpha + (1.0 - alpha) * s).collect();
    let (k, &l1_norm) = column_sums
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty window");
    let argmax_column = first + k;
    let lhs = tails[k] / (1.0 - lam);
    let tb: f64 = tt
        .iter()
        .zip(res.b_y().column(cfg.target).iter())
        .map(|(a, b)| a * b)
        .sum();
    let simplified_bound = (1.0 - lam.powi((last - argmax_column) as i32)) * tb.abs();

    Ok(JacobianReport {
        target: cfg.target,
        l1_norm,
        argmax_column,
        sufficient_condition_lhs: lhs,
        sufficient_condition_satisfied: lhs < 1.0 / (1.0 - lam),
        simplified_bound,
        lambda: lam,
        alpha,
        first,
        last,
        column_sums,
    })
}

/// Range of `diag(A)` against the decay requirement `(λ+1)/(λ-1) < diag(A)_i < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagBoundCheck {
    pub lower: f64,
    pub upper: f64,
    pub min_diag: f64,
    pub max_diag: f64,
    pub satisfied: bool,
}

pub fn diag_bound_check(res: &Reservoir) -> DiagBoundCheck {
    let lam = res.leak();
    let lower = (lam + 1.0) / (lam - 1.0);
    let d = res.a().diagonal();
    let min_diag = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max_diag = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    DiagBoundCheck {
        lower,
        upper: 1.0,
        min_diag,
        max_diag,
        satisfied: min_diag > lower && max_diag < 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::ReservoirSpec;

    fn small() -> Reservoir {
        Reservoir::build(&ReservoirSpec { n_latent: 6, sparsity: 0.5, seed: 2, ..ReservoirSpec::default() }).unwrap()
    }

    #[test]
    fn gain_is_one_at_zero() {
        let res = small();
        let g = tanh_gain(&res, &[0.0; 6], &[0.0], &[]).unwrap();
        assert!(g.z.iter().all(|&z| z == 1.0));
    }

    #[test]
    fn gain_saturates_without_nan() {
        let res = small();
        let g = tanh_gain(&res, &[0.0; 6], &[1e4], &[]).unwrap();
        assert!(g.z.iter().all(|&z| z.is_finite() && (0.0..1e-6).contains(&z)));
    }

    #[test]
    fn k_product_empty_and_single() {
        let res = small();
        let y = DMatrix::from_fn(5, 1, |t, _| (t as f64).sin());
        let gains = gains_along(&res, &y, &DMatrix::zeros(5, 0), 5).unwrap();
        assert_eq!(k_product(&res, &gains, 3, 2).unwrap(), DMatrix::identity(6, 6));
        let k = k_product(&res, &gains, 2, 2).unwrap();
        let lam = res.leak();
        let a = res.a().to_dense();
        let direct = DMatrix::identity(6, 6) * lam + DMatrix::from_diagonal(&gains[2].z) * a * (1.0 - lam);
        assert!((k - direct).abs().max() < 1e-14);
    }

    #[test]
    fn triangular_with_alpha_diagonal() {
        let res = small();
        let y = DMatrix::from_fn(9, 1, |t, _| (0.7 * t as f64).cos());
        let gains = gains_along(&res, &y, &DMatrix::zeros(9, 0), 9).unwrap();
        let theta = ReadoutMap { theta: DMatrix::from_element(7, 1, 0.3), ridge: 1.0, retried_targets: vec![] };
        let j = jacobian_matrix(&res, &theta, &gains, 1, 8, 0.35, 0).unwrap();
        for r in 0..8 {
            assert_eq!(j[(r, r)], 0.35);
            for c in r + 1..8 {
                assert_eq!(j[(r, c)], 0.0);
            }
        }
        assert_eq!(jacobian_entry(&res, &theta, &gains, 3, 5, 0.35, 0).unwrap(), 0.0);
        let e = jacobian_entry(&res, &theta, &gains, 6, 2, 0.35, 0).unwrap();
        assert!((e - j[(5, 1)]).abs() < 1e-15);
    }

    #[test]
    fn zero_theta_gives_alpha_norm() {
        let res = small();
        let y = DMatrix::from_fn(30, 1, |t, _| (0.3 * t as f64).sin());
        let cfg = JacobianConfig { alpha: 0.999, ..JacobianConfig::default() };
        let r = l1_report(&res, &ReadoutMap::zeros(6, 1), &y, &DMatrix::zeros(30, 0), &cfg).unwrap();
        assert_eq!(r.l1_norm, 0.999);
        assert!(r.sufficient_condition_satisfied);
    }

    #[test]
    fn diag_lower_bound_at_default_leak() {
        let check = diag_bound_check(&small());
        assert!((check.lower + 4.0).abs() < 1e-12);
        assert_eq!(check.upper, 1.0);
    }
}
