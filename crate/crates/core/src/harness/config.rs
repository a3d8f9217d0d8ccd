//! Experiment configuration files (TOML).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Lorenz63Params, Lorenz96Params, MackeyGlassParams, VdpParams};
use crate::error::{Error, Result};
use crate::fixed_point::FixedPointConfig;
use crate::jacobian::JacobianConfig;
use crate::readout::RidgeScaling;
use crate::reservoir::ReservoirSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    MackeyGlass,
    /// `x` is the masked target, `z` a fully known exogenous input.
    Lorenz63Partial,
    /// `x, y, z` all masked.
    Lorenz63Full,
    Lorenz96,
    /// `y₁` masked, the forcing known.
    Vdp,
}

impl System {
    pub const ALL: [System; 5] = [
        System::MackeyGlass,
        System::Lorenz63Partial,
        System::Lorenz63Full,
        System::Lorenz96,
        System::Vdp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::MackeyGlass => "mackey_glass",
            System::Lorenz63Partial => "lorenz63_partial",
            System::Lorenz63Full => "lorenz63_full",
            System::Lorenz96 => "lorenz96",
            System::Vdp => "vdp",
        }
    }

    /// `(N_y, N_u)` of the reconstruction problem.
    pub fn dims(self, lorenz96_nodes: usize) -> (usize, usize) {
        match self {
            System::MackeyGlass => (1, 0),
            System::Lorenz63Partial => (1, 1),
            System::Lorenz63Full => (3, 0),
            System::Lorenz96 => (lorenz96_nodes, 0),
            System::Vdp => (1, 1),
        }
    }

    /// Relaxation and ridge parameters used for this system at `omega`.
    pub fn paper_alpha_beta(self, omega: f64) -> (f64, f64) {
        match self {
            System::MackeyGlass if omega >= 0.95 => (0.4, 1e-8),
            System::MackeyGlass => (0.2, 1e-9),
            System::Lorenz63Partial if omega >= 0.95 => (0.4, 1e-6),
            System::Lorenz63Partial => (0.2, 1e-7),
            System::Lorenz63Full if omega > 0.9 => (0.4, 1e-6),
            System::Lorenz63Full => (0.2, 1e-6),
            System::Lorenz96 => (0.2, 1e-7),
            System::Vdp => (0.2, 1e-6),
        }
    }

    /// Whether inputs are standardized unless the config says otherwise.
    pub fn default_normalize(self) -> bool {
        !matches!(self, System::MackeyGlass)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown system `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSet {
    pub dynamics: u64,
    pub reservoir: u64,
    pub mask: u64,
}

impl Default for SeedSet {
    fn default() -> Self {
        Self {
            dynamics: 1,
            reservoir: 2,
            mask: 3,
        }
    }
}

/// Iteration settings; α and β live at the top level of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointSection {
    pub washout: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub ridge_scaling: RidgeScaling,
    /// Unset means the per-system default.
    pub normalize_inputs: Option<bool>,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            washout: d.washout,
            tol: d.tol,
            max_iter: d.max_iter,
            ridge_scaling: d.ridge_scaling,
            normalize_inputs: None,
        }
    }
}

/// Per-system integrator settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsSection {
    pub mackey_glass: MackeyGlassParams,
    pub lorenz63: Lorenz63Params,
    pub lorenz96: Lorenz96Params,
    pub vdp: VdpParams,
}

/// Window settings for the `jacobian` diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JacobianSection {
    /// First column; unset means just after the washout.
    pub first: Option<usize>,
    /// Number of columns in the window.
    pub window: usize,
}

impl Default for JacobianSection {
    fn default() -> Self {
        Self {
            first: None,
            window: 1000,
        }
    }
}

/// Grid for `sweep`; every listed value is crossed with every other.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub leak: Vec<f64>,
    pub scale_b: Vec<f64>,
    pub sparsity: Vec<f64>,
    pub n_latent: Vec<usize>,
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub system: System,
    /// `T`; the series has `T + 1` samples.
    pub t_len: usize,
    pub omega: f64,
    /// Unset means the per-system value for `omega`.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Independent reservoir realizations (reservoir seeds `seed, seed+1, …`).
    pub ensemble: usize,
    pub seeds: SeedSet,
    pub reservoir: ReservoirSpec,
    pub fixed_point: FixedPointSection,
    pub dynamics: DynamicsSection,
    pub jacobian: JacobianSection,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: System::MackeyGlass,
            t_len: 20_000,
            omega: 0.9,
            alpha: None,
            beta: None,
            ensemble: 1,
            seeds: SeedSet::default(),
            reservoir: ReservoirSpec::default(),
            fixed_point: FixedPointSection::default(),
            dynamics: DynamicsSection::default(),
            jacobian: JacobianSection::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(system: System, t_len: usize, omega: f64) -> Self {
        Self {
            system,
            t_len,
            omega,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| self.system.paper_alpha_beta(self.omega).0)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| self.system.paper_alpha_beta(self.omega).1)
    }

    pub fn normalize_inputs(&self) -> bool {
        self.fixed_point
            .normalize_inputs
            .unwrap_or_else(|| self.system.default_normalize())
    }

    /// `(N_y, N_u)`.
    pub fn dims(&self) -> (usize, usize) {
        self.system.dims(self.dynamics.lorenz96.n_nodes)
    }

    pub fn fixed_point_config(&self) -> FixedPointConfig {
        FixedPointConfig {
            relaxation: self.alpha(),
            ridge: self.beta(),
            ridge_scaling: self.fixed_point.ridge_scaling,
            washout: self.fixed_point.washout,
            tol: self.fixed_point.tol,
            max_iter: self.fixed_point.max_iter,
            normalize_inputs: self.normalize_inputs(),
        }
    }

    /// Reservoir spec of ensemble member `member`.
    pub fn reservoir_spec(&self, member: usize) -> ReservoirSpec {
        let (ny, nu) = self.dims();
        ReservoirSpec {
            n_target: ny,
            n_exo: nu,
            seed: self.seeds.reservoir.wrapping_add(member as u64),
            ..self.reservoir.clone()
        }
    }

    pub fn jacobian_config(&self, target: usize) -> JacobianConfig {
        let first = self.jacobian.first.unwrap_or(self.fixed_point.washout + 1).max(1);
        JacobianConfig {
            alpha: self.alpha(),
            target,
            first,
            last: Some((first + self.jacobian.window.max(1) - 1).min(self.t_len)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.omega) {
            return Err(Error::InvalidConfig(format!(
                "omega must lie in [0, 1), got {}",
                self.omega
            )));
        }
        if self.t_len <= self.fixed_point.washout {
            return Err(Error::InvalidConfig(format!(
                "t_len = {} must exceed the washout {}",
                self.t_len, self.fixed_point.washout
            )));
        }
        if self.ensemble == 0 {
            return Err(Error::InvalidConfig("ensemble must be at least 1".into()));
        }
        self.reservoir_spec(0).validate()?;
        self.fixed_point_config().validate()
    }
}
