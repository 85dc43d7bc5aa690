//! Versioned run configuration: every model, solver, and analysis parameter
//! in one strictly parsed JSON document, revalidated against the upstream
//! invariants at load time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::da::{BlowupProfile, DaError, DaMap, DaMode};
use crate::plug::{PlugError, PlugModel, TubeModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("config violates invariant: {0}")]
    Invariant(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Da(#[from] DaError),
    #[error(transparent)]
    Plug(#[from] PlugError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub matrix: [[i64; 2]; 2],
    pub r1: f64,
    pub r2: f64,
    pub theta0: f64,
    pub ramp: f64,
    pub r_tube: f64,
    pub collar_thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub grid_h: f64,
    pub fine_h: f64,
    pub t_max: f64,
    pub e4_t_grid: Vec<f64>,
    pub key_t_grid: Vec<f64>,
    pub mesh_n_theta: usize,
    pub mesh_n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub delta: f64,
    pub delta_prime: f64,
    pub angle_floor: f64,
    pub seed: u64,
    pub n_boundary_samples: usize,
    pub a3: f64,
    pub a4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        // lambda for [[2,1],[1,1]] is (3 + sqrt 5)/2; theta0 = 1.2 lambda.
        let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelConfig {
                matrix: [[2, 1], [1, 1]],
                r1: 0.06,
                r2: 0.40,
                theta0: 1.2 * lambda,
                ramp: 0.2,
                r_tube: 0.05,
                collar_thickness: 1.0,
            },
            solver: SolverConfig {
                grid_h: 0.05,
                fine_h: 0.02,
                t_max: 50.0,
                e4_t_grid: vec![1.0, 2.0, 3.0, 5.0, 8.0, 10.0, 12.0, 15.0, 20.0, 24.0, 27.0, 30.0],
                key_t_grid: vec![1.0, 5.0, 10.0, 20.0],
                mesh_n_theta: 192,
                mesh_n_t: 48,
            },
            analysis: AnalysisConfig {
                delta: 0.05,
                delta_prime: 0.05,
                angle_floor: 0.02,
                seed: 7,
                n_boundary_samples: 50,
                a3: 1.5,
                a4: 2.0,
            },
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema_version));
        }
        let m = &self.model;
        if !(m.r1 > 0.0 && m.r1 < m.r2) {
            return Err(ConfigError::Invariant(format!(
                "blow-up radii must satisfy 0 < r1 < r2, got r1 = {}, r2 = {}",
                m.r1, m.r2
            )));
        }
        if !(m.r_tube > 0.0 && m.r_tube < m.r1) {
            return Err(ConfigError::Invariant(format!(
                "tube radius must satisfy 0 < r_tube < r1, got r_tube = {}, r1 = {}",
                m.r_tube, m.r1
            )));
        }
        if m.collar_thickness <= 0.0 {
            return Err(ConfigError::Invariant(
                "collar thickness must be positive".into(),
            ));
        }
        let s = &self.solver;
        if !(s.grid_h > 0.0 && s.fine_h > 0.0) {
            return Err(ConfigError::Invariant("grid steps must be positive".into()));
        }
        if s.t_max <= 0.0 || s.e4_t_grid.is_empty() || s.key_t_grid.is_empty() {
            return Err(ConfigError::Invariant(
                "time grids must be nonempty with t_max > 0".into(),
            ));
        }
        if s.mesh_n_theta < 8 || s.mesh_n_t < 4 {
            return Err(ConfigError::Invariant(
                "boundary mesh must be at least 8 x 4".into(),
            ));
        }
        let a = &self.analysis;
        if a.delta <= 0.0 || a.delta_prime <= 0.0 {
            return Err(ConfigError::Invariant(
                "bad-region widths delta, delta_prime must be positive".into(),
            ));
        }
        if a.angle_floor <= 0.0 {
            return Err(ConfigError::Invariant("angle floor must be positive".into()));
        }
        if a.a3 < 1.0 || a.a4 < 0.0 {
            return Err(ConfigError::Invariant(
                "composition constants need a3 >= 1 and a4 >= 0".into(),
            ));
        }
        // Full model validation (hyperbolicity, profile injectivity, disk
        // disjointness) through the constructors themselves.
        self.da_map(DaMode::Source)?;
        Ok(())
    }

    pub fn profile(&self) -> BlowupProfile {
        BlowupProfile {
            r1: self.model.r1,
            r2: self.model.r2,
            theta0: self.model.theta0,
            ramp: self.model.ramp,
        }
    }

    pub fn da_map(&self, mode: DaMode) -> Result<DaMap, ConfigError> {
        Ok(DaMap::new(self.model.matrix, self.profile(), mode)?)
    }

    pub fn plug(&self, mode: DaMode) -> Result<PlugModel, ConfigError> {
        let tube = TubeModel::new(self.da_map(mode)?, self.model.r_tube)?;
        Ok(PlugModel::new(tube, self.model.collar_thickness)?)
    }
}
