//! Random observation masks, interpolation baselines and error metrics.

use nalgebra::DMatrix;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::SeedRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    /// Missing fraction ω in `[0, 1)`.
    pub omega: f64,
    /// Independent masks per variable; otherwise every variable shares one.
    pub per_variable: bool,
    pub seed: u64,
    /// Draw the missing indices from `1..=T` only.
    pub protect_t0: bool,
}

impl MaskSpec {
    pub fn new(omega: f64, seed: u64) -> Self {
        Self {
            omega,
            per_variable: true,
            seed,
            protect_t0: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.omega) {
            return Err(Error::InvalidConfig(format!(
                "missing fraction must lie in [0, 1), got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

const MASK_REROLLS: usize = 64;

/// Observation mask with `rows = T + 1` rows and exactly `round(ω T)`
/// missing entries per column, none at `t = 0`.
pub fn make_mask(rows: usize, n_vars: usize, spec: &MaskSpec) -> Result<DMatrix<bool>> {
    spec.validate()?;
    if rows < 2 {
        return Err(Error::InvalidConfig("a mask needs at least two rows".into()));
    }
    let t_len = rows - 1;
    let mut rng = SeedRng::seed_from_u64(spec.seed);
    let mut mask = DMatrix::from_element(rows, n_vars, true);
    let mut shared: Option<Vec<usize>> = None;
    for j in 0..n_vars {
        let hidden = match (&shared, spec.per_variable) {
            (Some(h), false) => h.clone(),
            _ => {
                let h = draw_hidden(&mut rng, t_len, spec);
                if !spec.per_variable {
                    shared = Some(h.clone());
                }
                h
            }
        };
        for t in hidden {
            mask[(t, j)] = false;
        }
    }
    Ok(mask)
}

fn draw_hidden(rng: &mut SeedRng, t_len: usize, spec: &MaskSpec) -> Vec<usize> {
    if spec.protect_t0 {
        let count = (spec.omega * t_len as f64).round() as usize;
        return rand::seq::index::sample(rng, t_len, count)
            .into_iter()
            .map(|i| i + 1)
            .collect();
    }
    let rows = t_len + 1;
    let count = ((spec.omega * rows as f64).round() as usize).min(t_len);
    let mut hidden = Vec::new();
    for _ in 0..MASK_REROLLS {
        hidden = rand::seq::index::sample(rng, rows, count).into_vec();
        if !hidden.contains(&0) {
            return hidden;
        }
    }
    // Still hiding t = 0: move that slot to the first visible index.
    let visible = (1..rows).find(|t| !hidden.contains(t)).unwrap_or(1);
    for h in hidden.iter_mut().filter(|h| **h == 0) {
        *h = visible;
    }
    hidden
}

fn observed_points(y_obs: &DMatrix<f64>, mask: &DMatrix<bool>, j: usize) -> Vec<(usize, f64)> {
    (0..y_obs.nrows())
        .filter(|&t| mask[(t, j)])
        .map(|t| (t, y_obs[(t, j)]))
        .collect()
}

fn check_shapes(y_obs: &DMatrix<f64>, mask: &DMatrix<bool>) -> Result<()> {
    ensure_len("mask rows", y_obs.nrows(), mask.nrows())?;
    ensure_len("mask columns", y_obs.ncols(), mask.ncols())
}

/// Piecewise-linear interpolation through the observed samples of each
/// column, held constant before the first and after the last observation.
pub fn interp_linear(y_obs: &DMatrix<f64>, mask: &DMatrix<bool>) -> Result<DMatrix<f64>> {
    check_shapes(y_obs, mask)?;
    let rows = y_obs.nrows();
    let mut out = DMatrix::zeros(rows, y_obs.ncols());
    for j in 0..y_obs.ncols() {
        let pts = observed_points(y_obs, mask, j);
        if pts.is_empty() {
            return Err(Error::InsufficientObservations {
                variable: j,
                after_washout: false,
            });
        }
        let (first_t, first_v) = pts[0];
        let (last_t, last_v) = pts[pts.len() - 1];
        for t in 0..=first_t {
            out[(t, j)] = first_v;
        }
        for w in pts.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            out[(t0, j)] = v0;
            let span = (t1 - t0) as f64;
            for t in t0 + 1..t1 {
                let r = (t - t0) as f64 / span;
                out[(t, j)] = v0 + r * (v1 - v0);
            }
        }
        for t in last_t..rows {
            out[(t, j)] = last_v;
        }
    }
    Ok(out)
}

/// Natural cubic spline through the observed samples of each column,
/// clamped to the end values outside the observed range. Columns with fewer
/// than three observations fall back to [`interp_linear`].
pub fn interp_cubic_spline(y_obs: &DMatrix<f64>, mask: &DMatrix<bool>) -> Result<DMatrix<f64>> {
    check_shapes(y_obs, mask)?;
    let rows = y_obs.nrows();
    let mut out = DMatrix::zeros(rows, y_obs.ncols());
    for j in 0..y_obs.ncols() {
        let pts = observed_points(y_obs, mask, j);
        match pts.len() {
            0 => {
                return Err(Error::InsufficientObservations {
                    variable: j,
                    after_washout: false,
                })
            }
            1 | 2 => {
                if pts.len() == 1 {
                    log::warn!("variable {j} has a single observation; spline falls back to a constant");
                }
                let col = interp_linear(&y_obs.columns(j, 1).into_owned(), &mask.columns(j, 1).into_owned())?;
                out.set_column(j, &col.column(0));
            }
            _ => {
                let spline = NaturalSpline::fit(&pts);
                for t in 0..rows {
                    out[(t, j)] = spline.eval(t as f64);
                }
                for &(t, v) in &pts {
                    out[(t, j)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Natural cubic spline on strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    /// Needs at least two knots.
    pub fn fit(points: &[(usize, f64)]) -> Self {
        let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let mut sub = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut sup = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                sub[i] = h[i];
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                sup[i] = h[i + 1];
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
            m[1..n - 1].copy_from_slice(&inner);
        }
        Self { x, y, m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&xk| xk <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Thomas algorithm; `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let w = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / w;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / w;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn sq_err_sum(a: &DMatrix<f64>, b: &DMatrix<f64>, j: usize, from: usize) -> f64 {
    (from..a.nrows()).map(|t| (a[(t, j)] - b[(t, j)]).powi(2)).sum()
}

/// `sqrt( Σ (y_r - y*)² / Σ y*² )` over all entries.
pub fn nrmse(y_r: &DMatrix<f64>, y_star: &DMatrix<f64>) -> Result<f64> {
    nrmse_from(y_r, y_star, 0)
}

/// [`nrmse`] restricted to rows `from..`.
pub fn nrmse_from(y_r: &DMatrix<f64>, y_star: &DMatrix<f64>, from: usize) -> Result<f64> {
    same_shape(y_r, y_star)?;
    let zero = DMatrix::zeros(y_star.nrows(), y_star.ncols());
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..y_star.ncols() {
        num += sq_err_sum(y_r, y_star, j, from);
        den += sq_err_sum(&zero, y_star, j, from);
    }
    Ok((num / den).sqrt())
}

/// Error normalized by the ground truth's spread around its per-variable mean.
pub fn nrmse_std_from(y_r: &DMatrix<f64>, y_star: &DMatrix<f64>, from: usize) -> Result<f64> {
    same_shape(y_r, y_star)?;
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..y_star.ncols() {
        num += sq_err_sum(y_r, y_star, j, from);
        let n = (y_star.nrows() - from) as f64;
        let mean = (from..y_star.nrows()).map(|t| y_star[(t, j)]).sum::<f64>() / n;
        den += (from..y_star.nrows()).map(|t| (y_star[(t, j)] - mean).powi(2)).sum::<f64>();
    }
    Ok((num / den).sqrt())
}

/// `sqrt( Σ (y_r - y*)² / Σ (y_base - y*)² )`, pooled over all variables.
pub fn sigma_vs_baseline(y_r: &DMatrix<f64>, y_base: &DMatrix<f64>, y_star: &DMatrix<f64>) -> Result<f64> {
    sigma_vs_baseline_from(y_r, y_base, y_star, 0)
}

pub fn sigma_vs_baseline_from(
    y_r: &DMatrix<f64>,
    y_base: &DMatrix<f64>,
    y_star: &DMatrix<f64>,
    from: usize,
) -> Result<f64> {
    same_shape(y_r, y_star)?;
    same_shape(y_base, y_star)?;
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..y_star.ncols() {
        num += sq_err_sum(y_r, y_star, j, from);
        den += sq_err_sum(y_base, y_star, j, from);
    }
    Ok((num / den).sqrt())
}

/// Multivariate form: the squared per-variable ratios are averaged, then
/// square-rooted. Equals [`sigma_vs_baseline`] for one variable.
pub fn sigma_intp(y_r: &DMatrix<f64>, y_base: &DMatrix<f64>, y_star: &DMatrix<f64>) -> Result<f64> {
    sigma_intp_from(y_r, y_base, y_star, 0)
}

pub fn sigma_intp_from(
    y_r: &DMatrix<f64>,
    y_base: &DMatrix<f64>,
    y_star: &DMatrix<f64>,
    from: usize,
) -> Result<f64> {
    same_shape(y_r, y_star)?;
    same_shape(y_base, y_star)?;
    let ny = y_star.ncols();
    let sum: f64 = (0..ny)
        .map(|j| sq_err_sum(y_r, y_star, j, from) / sq_err_sum(y_base, y_star, j, from))
        .sum();
    Ok((sum / ny as f64).sqrt())
}

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    ensure_len("rows", b.nrows(), a.nrows())?;
    ensure_len("columns", b.ncols(), a.ncols())
}

/// Reconstruction quality against the ground truth.
///
/// `sigma_lin` / `sigma_csp` pool the squared errors over all variables;
/// the `_intp` fields average the per-variable squared ratios instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nrmse: f64,
    pub nrmse_std: f64,
    pub sigma_lin: f64,
    pub sigma_csp: f64,
    pub sigma_lin_intp: f64,
    pub sigma_csp_intp: f64,
}

impl MetricReport {
    /// Metrics over rows `from..`.
    pub fn compute(
        y_r: &DMatrix<f64>,
        y_lin: &DMatrix<f64>,
        y_csp: &DMatrix<f64>,
        y_star: &DMatrix<f64>,
        from: usize,
    ) -> Result<Self> {
        Ok(Self {
            nrmse: nrmse_from(y_r, y_star, from)?,
            nrmse_std: nrmse_std_from(y_r, y_star, from)?,
            sigma_lin: sigma_vs_baseline_from(y_r, y_lin, y_star, from)?,
            sigma_csp: sigma_vs_baseline_from(y_r, y_csp, y_star, from)?,
            sigma_lin_intp: sigma_intp_from(y_r, y_lin, y_star, from)?,
            sigma_csp_intp: sigma_intp_from(y_r, y_csp, y_star, from)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }
    fn mcol(v: &[bool]) -> DMatrix<bool> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn zero_omega_is_all_observed() {
        let m = make_mask(101, 3, &MaskSpec::new(0.0, 1)).unwrap();
        assert!(m.iter().all(|&b| b));
    }

    #[test]
    fn exact_missing_count_and_t0_kept() {
        let m = make_mask(50_001, 2, &MaskSpec::new(0.95, 9)).unwrap();
        for j in 0..2 {
            assert!(m[(0, j)]);
            assert_eq!(m.column(j).iter().filter(|&&b| !b).count(), 47_500);
        }
        assert_ne!(m.column(0), m.column(1));
    }

    #[test]
    fn shared_mask_and_unprotected_draw() {
        let spec = MaskSpec { per_variable: false, protect_t0: false, ..MaskSpec::new(0.5, 3) };
        let m = make_mask(41, 3, &spec).unwrap();
        assert_eq!(m.column(0), m.column(2));
        assert!(m[(0, 0)]);
        assert_eq!(m.column(0).iter().filter(|&&b| !b).count(), 21);
    }

    #[test]
    fn mask_is_seeded() {
        let a = make_mask(500, 2, &MaskSpec::new(0.7, 42)).unwrap();
        let b = make_mask(500, 2, &MaskSpec::new(0.7, 42)).unwrap();
        let c = make_mask(500, 2, &MaskSpec::new(0.7, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn linear_holds_ends_and_keeps_constant() {
        let y = col(&[0.0, 3.0, 0.0, 5.0, 0.0, 0.0]);
        let m = mcol(&[false, true, false, true, false, false]);
        let out = interp_linear(&y, &m).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 3.0, 4.0, 5.0, 5.0, 5.0]);
        let c = interp_linear(&col(&[2.0; 5]), &mcol(&[true, false, false, true, false])).unwrap();
        assert!(c.iter().all(|&v| v == 2.0));
        let one = interp_linear(&col(&[0.0, 7.0, 0.0]), &mcol(&[false, true, false])).unwrap();
        assert!(one.iter().all(|&v| v == 7.0));
    }

    #[test]
    fn linear_fails_without_observations() {
        let r = interp_linear(&col(&[0.0; 4]), &mcol(&[false; 4]));
        assert!(matches!(r, Err(Error::InsufficientObservations { variable: 0, .. })));
    }

    #[test]
    fn spline_reproduces_a_line() {
        let y: Vec<f64> = (0..20).map(|t| 0.5 * t as f64 - 2.0).collect();
        let mut m = vec![false; 20];
        for t in [0, 3, 4, 9, 15, 19] {
            m[t] = true;
        }
        let out = interp_cubic_spline(&col(&y), &mcol(&m)).unwrap();
        for t in 0..20 {
            assert!((out[(t, 0)] - y[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_keeps_odd_symmetry_of_a_cubic() {
        let f = |t: f64| (t - 10.0).powi(3) - 300.0 * (t - 10.0);
        let pts: Vec<(usize, f64)> = [0usize, 5, 10, 15, 20].iter().map(|&t| (t, f(t as f64))).collect();
        let s = NaturalSpline::fit(&pts);
        for &(t, v) in &pts {
            assert!((s.eval(t as f64) - v).abs() < 1e-9);
        }
        for d in 1..10 {
            let d = d as f64 * 0.9;
            assert!((s.eval(10.0 + d) + s.eval(10.0 - d)).abs() < 1e-9);
        }
    }

    #[test]
    fn spline_clamps_outside_range() {
        let y = col(&[0.0, 1.0, 4.0, 9.0, 0.0]);
        let m = mcol(&[false, true, true, true, false]);
        let out = interp_cubic_spline(&y, &m).unwrap();
        assert_eq!(out[(0, 0)], 1.0);
        assert_eq!(out[(4, 0)], 9.0);
    }

    #[test]
    fn nrmse_cases() {
        let y = col(&[1.0, -2.0, 3.0]);
        assert_eq!(nrmse(&y, &y).unwrap(), 0.0);
        assert_eq!(nrmse(&DMatrix::zeros(3, 1), &y).unwrap(), 1.0);
    }

    #[test]
    fn sigma_cases() {
        let mut rng = crate::SeedRng::seed_from_u64(5);
        let ys = DMatrix::from_fn(30, 2, |_, _| rng.random::<f64>());
        let base = DMatrix::from_fn(30, 2, |_, _| rng.random::<f64>());
        assert!((sigma_vs_baseline(&base, &base, &ys).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sigma_vs_baseline(&ys, &base, &ys).unwrap(), 0.0);
        assert!((sigma_intp(&base, &base, &ys).unwrap() - 1.0).abs() < 1e-15);
    }
}
