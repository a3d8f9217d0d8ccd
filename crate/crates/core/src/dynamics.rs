//! Ground-truth trajectories for the benchmark systems.
//!
//! Every generator integrates with fixed-step RK4 on an inner grid and emits
//! `T + 1` equidistant samples after discarding a transient.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SeedRng;

const BLOW_UP: f64 = 1e6;

/// Sampled trajectory: rows are `t = 0, δt, …, T δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: DMatrix<f64>,
    /// Exogenous samples; zero columns for autonomous systems.
    pub u: DMatrix<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn inner_step(dt_sample: f64, inner_steps: usize) -> Result<f64> {
    check_positive("dt_sample", dt_sample)?;
    if inner_steps == 0 {
        return Err(Error::InvalidConfig("inner_steps must be positive".into()));
    }
    Ok(dt_sample / inner_steps as f64)
}

fn guard(system: &'static str, time: f64, state: &[f64]) -> Result<()> {
    if state.iter().all(|v| v.is_finite() && v.abs() <= BLOW_UP) {
        Ok(())
    } else {
        Err(Error::BlowUp { system, time })
    }
}

/// Classic RK4 on an autonomous vector field with preallocated stages.
struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, f: impl Fn(&[f64], &mut [f64]), y: &mut [f64], h: f64) {
        let n = y.len();
        let [k1, k2, k3, k4] = &mut self.k;
        f(y, k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&self.tmp, k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&self.tmp, k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * k3[i];
        }
        f(&self.tmp, k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Runs `transient + T` sample intervals of `inner` RK4 steps each and
/// records the state at every sample after the transient.
fn sample_ode(
    system: &'static str,
    f: impl Fn(&[f64], &mut [f64]),
    y0: &[f64],
    h: f64,
    inner: usize,
    transient: usize,
    n_samples: usize,
) -> Result<DMatrix<f64>> {
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut rk = Rk4::new(n);
    let mut out = DMatrix::zeros(n_samples + 1, n);
    for k in 0..transient + n_samples + 1 {
        if k >= transient {
            for i in 0..n {
                out[(k - transient, i)] = y[i];
            }
        }
        if k == transient + n_samples {
            break;
        }
        for _ in 0..inner {
            rk.step(&f, &mut y, h);
        }
        guard(system, (k + 1) as f64 * h * inner as f64, &y)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MackeyGlassParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub delay: f64,
    pub dt_sample: f64,
    pub inner_steps_per_sample: usize,
    /// Constant value of the history on `t ≤ 0`.
    pub history: f64,
    pub transient: usize,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            gamma1: 0.2,
            gamma2: 10.0,
            gamma3: 0.1,
            delay: 17.0,
            dt_sample: 1.0,
            inner_steps_per_sample: 10,
            history: 1.2,
            transient: 1000,
        }
    }
}

/// Dense history of the DDE solution on the inner grid, with derivatives for
/// cubic Hermite evaluation between grid points.
struct DelayHistory {
    h: f64,
    before: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl DelayHistory {
    fn at(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.before;
        }
        let x = s / self.h;
        let k = x.floor() as usize;
        let r = x - k as f64;
        if r == 0.0 || k + 1 >= self.y.len() {
            return self.y[k.min(self.y.len() - 1)];
        }
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (d0, d1) = (self.dy[k] * self.h, self.dy[k + 1] * self.h);
        let r2 = r * r;
        let r3 = r2 * r;
        (2.0 * r3 - 3.0 * r2 + 1.0) * y0
            + (r3 - 2.0 * r2 + r) * d0
            + (-2.0 * r3 + 3.0 * r2) * y1
            + (r3 - r2) * d1
    }
}

pub fn gen_mackey_glass(p: &MackeyGlassParams, n_samples: usize) -> Result<Trajectory> {
    let h = inner_step(p.dt_sample, p.inner_steps_per_sample)?;
    check_positive("delay", p.delay)?;
    if p.delay < h {
        return Err(Error::InvalidConfig(format!(
            "delay {} must be at least the inner step {h}",
            p.delay
        )));
    }
    let rhs = |y: f64, yd: f64| p.gamma1 * yd / (1.0 + yd.powf(p.gamma2)) - p.gamma3 * y;
    let inner = p.inner_steps_per_sample;
    let total = (p.transient + n_samples) * inner;
    let mut hist = DelayHistory {
        h,
        before: p.history,
        y: Vec::with_capacity(total + 1),
        dy: Vec::with_capacity(total + 1),
    };
    let mut y = p.history;
    let mut out = DMatrix::zeros(n_samples + 1, 1);
    for n in 0..=total {
        let t = n as f64 * h;
        hist.y.push(y);
        hist.dy.push(rhs(y, hist.at(t - p.delay)));
        if n % inner == 0 && n / inner >= p.transient {
            out[(n / inner - p.transient, 0)] = y;
        }
        if n == total {
            break;
        }
        let k1 = hist.dy[n];
        let yd_mid = hist.at(t + 0.5 * h - p.delay);
        let k2 = rhs(y + 0.5 * h * k1, yd_mid);
        let k3 = rhs(y + 0.5 * h * k2, yd_mid);
        let k4 = rhs(y + h * k3, hist.at(t + h - p.delay));
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        guard("mackey_glass", t + h, &[y])?;
    }
    Ok(Trajectory {
        y: out,
        u: DMatrix::zeros(n_samples + 1, 0),
        dt: p.dt_sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lorenz63Params {
    pub sigma: f64,
    pub rho: f64,
    pub beta_l: f64,
    pub dt_sample: f64,
    pub inner_steps: usize,
    pub transient: usize,
    pub initial: [f64; 3],
}

impl Default for Lorenz63Params {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta_l: 8.0 / 3.0,
            dt_sample: 0.02,
            inner_steps: 10,
            transient: 1000,
            initial: [1.0, 1.0, 1.0],
        }
    }
}

/// Columns `x, y, z`.
pub fn gen_lorenz63(p: &Lorenz63Params, n_samples: usize) -> Result<Trajectory> {
    let h = inner_step(p.dt_sample, p.inner_steps)?;
    let f = |s: &[f64], d: &mut [f64]| {
        d[0] = p.sigma * (s[1] - s[0]);
        d[1] = s[0] * (p.rho - s[2]) - s[1];
        d[2] = s[0] * s[1] - p.beta_l * s[2];
    };
    let y = sample_ode("lorenz63", f, &p.initial, h, p.inner_steps, p.transient, n_samples)?;
    Ok(Trajectory {
        y,
        u: DMatrix::zeros(n_samples + 1, 0),
        dt: p.dt_sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lorenz96Params {
    pub n_nodes: usize,
    pub forcing: f64,
    pub dt_sample: f64,
    pub inner_steps: usize,
    pub transient: usize,
    /// Defaults to `F` everywhere plus `perturbation` on the first node.
    pub initial: Option<Vec<f64>>,
    pub perturbation: f64,
}

impl Default for Lorenz96Params {
    fn default() -> Self {
        Self {
            n_nodes: 6,
            forcing: 8.0,
            dt_sample: 0.02,
            inner_steps: 10,
            transient: 1000,
            initial: None,
            perturbation: 0.01,
        }
    }
}

impl Lorenz96Params {
    pub fn initial_state(&self) -> Vec<f64> {
        self.initial.clone().unwrap_or_else(|| {
            let mut x = vec![self.forcing; self.n_nodes];
            if let Some(first) = x.first_mut() {
                *first += self.perturbation;
            }
            x
        })
    }
}

/// `dy_i/dt = -y_{i-2} y_{i-1} + y_{i-1} y_{i+1} - y_i + F`, periodic in `i`.
pub fn gen_lorenz96(p: &Lorenz96Params, n_samples: usize) -> Result<Trajectory> {
    let h = inner_step(p.dt_sample, p.inner_steps)?;
    let n = p.n_nodes;
    if n < 4 {
        return Err(Error::InvalidConfig(format!("Lorenz-96 needs at least 4 nodes, got {n}")));
    }
    let y0 = p.initial_state();
    if y0.len() != n {
        return Err(Error::InvalidConfig(format!(
            "initial state has {} entries for {n} nodes",
            y0.len()
        )));
    }
    let f = |s: &[f64], d: &mut [f64]| {
        for i in 0..n {
            let m2 = s[(i + n - 2) % n];
            let m1 = s[(i + n - 1) % n];
            let p1 = s[(i + 1) % n];
            d[i] = -m2 * m1 + m1 * p1 - s[i] + p.forcing;
        }
    };
    let y = sample_ode("lorenz96", f, &y0, h, p.inner_steps, p.transient, n_samples)?;
    Ok(Trajectory {
        y,
        u: DMatrix::zeros(n_samples + 1, 0),
        dt: p.dt_sample,
    })
}

/// Ornstein-Uhlenbeck path `u_0 = 0, …, u_{n_inner}` by exact discretization.
pub fn gen_ou(theta: f64, sigma: f64, dt_inner: f64, n_inner: usize, seed: u64) -> Result<Vec<f64>> {
    check_positive("ou_theta", theta)?;
    check_positive("dt_inner", dt_inner)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("ou_sigma must be nonnegative, got {sigma}")));
    }
    let decay = (-theta * dt_inner).exp();
    let spread = sigma * ((1.0 - (-2.0 * theta * dt_inner).exp()) / (2.0 * theta)).sqrt();
    let mut rng = SeedRng::seed_from_u64(seed);
    let mut u = Vec::with_capacity(n_inner + 1);
    let mut x = 0.0;
    u.push(x);
    for _ in 0..n_inner {
        let xi: f64 = StandardNormal.sample(&mut rng);
        x = x * decay + spread * xi;
        u.push(x);
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VdpParams {
    pub mu: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub dt_inner: f64,
    pub dt_sample: f64,
    pub transient: usize,
    pub initial: [f64; 2],
    /// RK4 steps per forcing interval (the forcing is held over the interval).
    pub rk4_substeps: usize,
    /// Set to false for the unforced oscillator.
    pub forced: bool,
}

impl Default for VdpParams {
    fn default() -> Self {
        Self {
            mu: 2.0,
            ou_theta: 0.2,
            ou_sigma: 5.0 * (2.0f64 * 0.2).sqrt(),
            dt_inner: 2.5e-3,
            dt_sample: 0.5,
            transient: 200,
            initial: [2.0, 0.0],
            rk4_substeps: 1,
            forced: true,
        }
    }
}

/// Forced van der Pol oscillator. `y` holds `y₁` only; `u` is the forcing
/// sampled at `δt`.
pub fn gen_vdp(p: &VdpParams, n_samples: usize, seed: u64) -> Result<Trajectory> {
    let full = gen_vdp_state(p, n_samples, seed)?;
    Ok(Trajectory {
        y: full.y.columns(0, 1).into_owned(),
        u: full.u,
        dt: full.dt,
    })
}

/// As [`gen_vdp`] but keeps both state columns `y₁, y₂`.
pub fn gen_vdp_state(p: &VdpParams, n_samples: usize, seed: u64) -> Result<Trajectory> {
    check_positive("dt_inner", p.dt_inner)?;
    check_positive("dt_sample", p.dt_sample)?;
    let per_sample = (p.dt_sample / p.dt_inner).round() as usize;
    if per_sample == 0 || ((per_sample as f64) * p.dt_inner - p.dt_sample).abs() > 1e-9 * p.dt_sample {
        return Err(Error::InvalidConfig(format!(
            "dt_sample {} must be a whole multiple of dt_inner {}",
            p.dt_sample, p.dt_inner
        )));
    }
    if p.rk4_substeps == 0 {
        return Err(Error::InvalidConfig("rk4_substeps must be positive".into()));
    }
    let n_inner = (p.transient + n_samples) * per_sample;
    let forcing = if p.forced {
        gen_ou(p.ou_theta, p.ou_sigma, p.dt_inner, n_inner, seed)?
    } else {
        vec![0.0; n_inner + 1]
    };
    let h = p.dt_inner / p.rk4_substeps as f64;
    let mut state = p.initial.to_vec();
    let mut rk = Rk4::new(2);
    let mut y = DMatrix::zeros(n_samples + 1, 2);
    let mut u = DMatrix::zeros(n_samples + 1, 1);
    for n in 0..=n_inner {
        if n % per_sample == 0 && n / per_sample >= p.transient {
            let row = n / per_sample - p.transient;
            y[(row, 0)] = state[0];
            y[(row, 1)] = state[1];
            u[(row, 0)] = forcing[n];
        }
        if n == n_inner {
            break;
        }
        let un = forcing[n];
        let f = |s: &[f64], d: &mut [f64]| {
            d[0] = s[1];
            d[1] = p.mu * (1.0 - s[0] * s[0]) * s[1] - s[0] + un;
        };
        for _ in 0..p.rk4_substeps {
            rk.step(f, &mut state, h);
        }
        guard("van_der_pol", (n + 1) as f64 * p.dt_inner, &state)?;
    }
    Ok(Trajectory { y, u, dt: p.dt_sample })
}
