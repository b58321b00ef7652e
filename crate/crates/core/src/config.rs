//! Run configuration read from TOML.
//!
//! A file has top-level `name` and `seed`, sections `[grid]`, `[kernels]`,
//! `[frequencies]`, `[initial]`, `[time]`, optional solver sections
//! `[kinetic]`, `[macro]`, `[particles]`, and any number of `[[runs]]`
//! entries that override the model, end time or mean speed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::grid::VelocityGrid;
use crate::kernels::{Frequencies, KernelSet, MeanSpeed};
use crate::kinetic::{Boundary, CollisionModel, Scaling, TransportScheme, VelocityInit};
use crate::macroscopic::{DriftScheme, MacroVariant};
use crate::spatial::{gaussian, SpatialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub n_s: usize,
    pub n_theta: usize,
    pub u_max: f64,
    #[serde(default = "unit_box")]
    pub x: [f64; 2],
    #[serde(default = "unit_box")]
    pub y: [f64; 2],
    /// Domain enlargement factor around the centre, keeping the cell size.
    #[serde(default = "one")]
    pub padding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub k_psi: f64,
    pub k_q: f64,
    pub theta_q: f64,
    pub mean_speed: MeanSpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    #[serde(default = "one")]
    pub mu_tilde: f64,
    #[serde(default = "one")]
    pub mu_hat: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub scaling: Scaling,
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        Self {
            mu_tilde: 1.0,
            mu_hat: 1.0,
            mu: 1.0,
            epsilon: 1.0,
            scaling: Scaling::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub r0: f64,
    pub sigma2: f64,
    pub x0: [f64; 2],
    #[serde(default)]
    pub velocity: VelocityInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Extra output times before `t_end`.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticOptions {
    #[serde(default)]
    pub scheme: TransportScheme,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

impl Default for KineticOptions {
    fn default() -> Self {
        Self {
            scheme: TransportScheme::Upwind,
            boundary: Boundary::ZeroInflow,
            cfl: default_cfl(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroOptions {
    #[serde(default)]
    pub scheme: DriftScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleScheme {
    #[default]
    EventDriven,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleOptions {
    #[serde(default = "default_particles")]
    pub n: usize,
    #[serde(default)]
    pub scheme: ParticleScheme,
    #[serde(default = "default_particle_dt")]
    pub dt: f64,
}

impl Default for ParticleOptions {
    fn default() -> Self {
        Self {
            n: default_particles(),
            scheme: ParticleScheme::EventDriven,
            dt: default_particle_dt(),
        }
    }
}

/// Model selected by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunModel {
    Bgk,
    TwoOperator,
    M1,
    M2,
    M3,
    M4,
}

impl RunModel {
    pub fn collision(self) -> Option<CollisionModel> {
        match self {
            RunModel::Bgk => Some(CollisionModel::Bgk),
            RunModel::TwoOperator => Some(CollisionModel::TwoOperator),
            _ => None,
        }
    }

    pub fn variant(self) -> Option<MacroVariant> {
        match self {
            RunModel::M1 => Some(MacroVariant::M1),
            RunModel::M2 => Some(MacroVariant::M2),
            RunModel::M3 => Some(MacroVariant::M3),
            RunModel::M4 => Some(MacroVariant::M4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub model: RunModel,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub mean_speed: Option<MeanSpeed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub kernels: KernelConfig,
    #[serde(default)]
    pub frequencies: FrequencyConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub kinetic: KineticOptions,
    #[serde(default, rename = "macro")]
    pub macro_opts: MacroOptions,
    #[serde(default)]
    pub particles: ParticleOptions,
    #[serde(default)]
    pub runs: Vec<RunSpec>,
}

fn one() -> f64 {
    1.0
}

fn unit_box() -> [f64; 2] {
    [0.0, 2.5]
}

fn default_cfl() -> f64 {
    0.9
}

fn default_particles() -> usize {
    100_000
}

fn default_particle_dt() -> f64 {
    0.01
}

const TEST1: &str = include_str!("../../../presets/test1.toml");
const TEST2_1: &str = include_str!("../../../presets/test2_1.toml");
const TEST2_2: &str = include_str!("../../../presets/test2_2.toml");

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 3] = ["test1", "test2_1", "test2_2"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse_named(text, "<string>")
    }

    fn parse_named(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_named(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "test1" => TEST1,
            "test2_1" => TEST2_1,
            "test2_2" => TEST2_2,
            _ => {
                return Err(invalid(format!(
                    "unknown preset '{name}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Self::parse_named(text, name)
    }

    /// Source text of a shipped preset.
    pub fn preset_source(name: &str) -> Option<&'static str> {
        match name {
            "test1" => Some(TEST1),
            "test2_1" => Some(TEST2_1),
            "test2_2" => Some(TEST2_2),
            _ => None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        VelocityGrid::new(g.n_s, g.n_theta, g.u_max)?;
        self.space()?;
        if !(g.padding >= 1.0) {
            return Err(invalid("padding must be at least 1"));
        }
        let k = &self.kernels;
        if !(k.k_psi >= 0.0 && k.k_q >= 0.0 && k.theta_q.is_finite()) {
            return Err(invalid("kernel concentrations must be nonnegative"));
        }
        let f = &self.frequencies;
        Frequencies { mu_tilde: f.mu_tilde, mu_hat: f.mu_hat, mu: f.mu }.validate()?;
        if !(f.epsilon > 0.0 && f.epsilon <= 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1], got {}", f.epsilon)));
        }
        let i = &self.initial;
        if !(i.r0 >= 0.0 && i.sigma2 > 0.0 && i.x0.iter().all(|x| x.is_finite())) {
            return Err(invalid("initial condition needs r0 >= 0 and sigma2 > 0"));
        }
        let t = &self.time;
        if !(t.t_end > 0.0) {
            return Err(invalid("t_end must be positive"));
        }
        if t.snapshots.iter().any(|&s| !(s > 0.0 && s <= t.t_end)) {
            return Err(invalid("snapshot times must lie in (0, t_end]"));
        }
        if !(self.kinetic.cfl > 0.0 && self.kinetic.cfl <= 1.0) {
            return Err(invalid("cfl must lie in (0, 1]"));
        }
        let p = &self.particles;
        if p.n == 0 || !(p.dt > 0.0) {
            return Err(invalid("particle count and dt must be positive"));
        }
        for r in &self.runs {
            if r.t_end.is_some_and(|t| !(t > 0.0)) {
                return Err(invalid(format!("run '{}' has a nonpositive t_end", r.name)));
            }
        }
        let mut names: Vec<&str> = self.runs.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("run names must be unique"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Frequencies {
        let f = &self.frequencies;
        Frequencies {
            mu_tilde: f.mu_tilde,
            mu_hat: f.mu_hat,
            mu: f.mu,
        }
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.grid.n_s, self.grid.n_theta, self.grid.u_max)
    }

    pub fn space(&self) -> Result<SpatialGrid> {
        let g = &self.grid;
        SpatialGrid::padded(g.nx, g.ny, g.x, g.y, g.padding)
    }

    /// Kernels with an optional mean-speed override.
    pub fn kernel_set(&self, mean: Option<&MeanSpeed>) -> Result<KernelSet> {
        let k = &self.kernels;
        KernelSet::von_mises(
            self.velocity_grid()?,
            k.k_psi,
            mean.unwrap_or(&k.mean_speed),
            k.k_q,
            k.theta_q,
            self.frequencies(),
        )
    }

    pub fn initial_density(&self, space: &SpatialGrid) -> Vec<f64> {
        let i = &self.initial;
        space.sample(gaussian(i.r0, i.sigma2, i.x0))
    }

    /// Runs to execute; a config without `[[runs]]` runs the two-operator model once.
    pub fn resolved_runs(&self) -> Vec<RunSpec> {
        if self.runs.is_empty() {
            return vec![RunSpec {
                name: self.name.clone(),
                model: RunModel::TwoOperator,
                t_end: None,
                mean_speed: None,
            }];
        }
        self.runs.clone()
    }

    /// Sorted output times of a run ending at `t_end`.
    pub fn output_times(&self, t_end: f64) -> Vec<f64> {
        let mut ts: Vec<f64> = self.time.snapshots.iter().copied().filter(|&t| t < t_end).collect();
        ts.push(t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}
