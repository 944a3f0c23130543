//! File-level run configuration shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::{ActionSpace, Environment, GridSpec, ObstacleMask, ScalarMeanField};
use crate::error::{Error, Result};
use crate::model::{compute_subgrid, Objective, Problem, RewardConfig, SubGridSpec};
use crate::solver::SolverConfig;
use crate::synthesis::{
    generate_double_gyre, generate_obstacles, generate_radiation, DoubleGyreConfig, ObstacleConfig, RadiationConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: PathsConfig,
    /// Worker threads; 0 or absent means one per hardware thread.
    #[serde(default)]
    pub threads: Option<usize>,
    pub grid: GridSpec,
    pub double_gyre: DoubleGyreConfig,
    #[serde(default)]
    pub radiation: Option<RadiationConfig>,
    #[serde(default)]
    pub obstacles: Option<ObstacleConfig>,
    pub actions: ActionSpace,
    pub mission: MissionConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub reduce: ReduceSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub environment: PathBuf,
    pub ensemble: PathBuf,
    pub model: PathBuf,
    pub policy: PathBuf,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            environment: "out/environment".into(),
            ensemble: "out/ensemble".into(),
            model: "out/model.omdp".into(),
            policy: "out/policy.opol".into(),
            output: "out/rollout".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub objective: Objective,
    #[serde(default = "one")]
    pub c_f: f64,
    #[serde(default)]
    pub c_r: f64,
    pub r_term: f64,
    pub r_outbound: f64,
    /// `[i, j]` cell indices.
    pub start: [usize; 2],
    pub target: [usize; 2],
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub subgrid_buffer: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { subgrid_buffer: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceSection {
    /// Modes kept by `reduce`; defaults to the generator's mode count.
    pub n_modes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub first_seed: u64,
    pub oracle_seeds: u64,
    pub theorem_seeds: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            first_seed: 0,
            oracle_seeds: 20,
            theorem_seeds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// `[nx, ny, nt]` per row; empty means the configured grid.
    pub sizes: Vec<[usize; 3]>,
    /// Empty means `[1, hardware threads]`.
    pub threads: Vec<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.double_gyre.validate(&self.grid)?;
        if let Some(r) = &self.radiation {
            r.validate()?;
        }
        if let Some(o) = &self.obstacles {
            o.validate()?;
        }
        self.actions.validate()?;
        self.reward_config()?;
        let m = &self.mission;
        for (name, [i, j]) in [("start", m.start), ("target", m.target)] {
            if i >= self.grid.nx || j >= self.grid.ny {
                return Err(Error::Config(format!(
                    "{name} cell ({i}, {j}) outside the {}x{} grid",
                    self.grid.nx, self.grid.ny
                )));
            }
        }
        if m.start == m.target {
            return Err(Error::Config("start and target must differ".into()));
        }
        self.solver_config().validate()?;
        if self.model.subgrid_buffer == 0 {
            return Err(Error::Config("model.subgrid_buffer must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reward_config(&self) -> Result<RewardConfig> {
        let m = &self.mission;
        RewardConfig::new(m.objective, m.c_f, m.c_r, m.r_term, m.r_outbound)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut s = SolverConfig::for_horizon(self.grid.nt);
        if let Some(e) = self.solver.epsilon {
            s.epsilon = e;
        }
        if let Some(k) = self.solver.max_iterations {
            s.max_iterations = k;
        }
        s
    }

    pub fn start_cell(&self) -> usize {
        self.grid.cell(self.mission.start[0], self.mission.start[1])
    }

    pub fn target_cell(&self) -> usize {
        self.grid.cell(self.mission.target[0], self.mission.target[1])
    }

    pub fn with_objective(&self, objective: Objective) -> Self {
        let mut c = self.clone();
        c.mission.objective = objective;
        c
    }

    /// Same configuration on a different grid; mission cells and obstacle
    /// positions are scaled proportionally.
    pub fn resized(&self, nx: usize, ny: usize, nt: usize) -> Result<Self> {
        let mut c = self.clone();
        let (sx, sy) = (nx as f64 / self.grid.nx as f64, ny as f64 / self.grid.ny as f64);
        c.grid = GridSpec::new(nx, ny, nt, self.grid.dx, self.grid.dt, self.grid.origin)?;
        let scale = |[i, j]: [usize; 2]| {
            [
                ((i as f64 * sx) as usize).min(nx - 1),
                ((j as f64 * sy) as usize).min(ny - 1),
            ]
        };
        c.mission.start = scale(self.mission.start);
        c.mission.target = scale(self.mission.target);
        if c.mission.start == c.mission.target {
            c.mission.target = [(c.mission.start[0] + 1) % nx, c.mission.start[1]];
        }
        if let Some(o) = &mut c.obstacles {
            for p in &mut o.initial_positions {
                *p = [p[0] * sx, p[1] * sy];
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Synthesizes the flow, radiation and obstacle fields.
    pub fn generate_environment(&self) -> Result<Environment> {
        let velocity = generate_double_gyre(&self.grid, &self.double_gyre)?;
        let scalar = match &self.radiation {
            Some(r) => generate_radiation(&self.grid, r)?,
            None => ScalarMeanField::zeros(self.grid),
        };
        let obstacles = match &self.obstacles {
            Some(o) => generate_obstacles(&self.grid, o)?,
            None => ObstacleMask::empty(self.grid),
        };
        Environment::new(velocity, scalar, obstacles)
    }

    /// The planning problem on `env`, which must share this grid.
    pub fn problem<'a>(&self, env: &'a Environment) -> Result<Problem<'a>> {
        if *env.grid() != self.grid {
            return Err(Error::Config(format!(
                "environment grid {:?} does not match the configured grid {:?}",
                env.grid(),
                self.grid
            )));
        }
        Problem::new(env, self.actions, self.reward_config()?, self.target_cell())
    }

    pub fn subgrid(&self, env: &Environment) -> Result<SubGridSpec> {
        compute_subgrid(&env.velocity, &self.actions, env.grid(), self.model.subgrid_buffer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [grid]
        nx = 9
        ny = 9
        nt = 10
        dx = 1.0
        dt = 1.0

        [double_gyre]
        amplitude = 0.1
        eps = 0.05
        n_modes = 2
        n_realizations = 8
        rng_seed = 1

        [actions]
        n_headings = 8
        n_speeds = 2
        f_max = 1.0

        [mission]
        objective = "time"
        r_term = 50.0
        r_outbound = -100.0
        start = [1, 1]
        target = [7, 7]
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.model.subgrid_buffer, 1);
        assert_eq!(c.solver_config().max_iterations, 12);
        assert_eq!(c.verify.oracle_seeds, 20);
        assert_eq!(c.start_cell(), 10);
        assert_eq!(c.target_cell(), 70);
        let env = c.generate_environment().unwrap();
        assert_eq!(env.obstacles.count_at(0), 0);
        c.problem(&env).unwrap();
    }

    #[test]
    fn rejects_bad_missions() {
        let same = MINIMAL.replace("target = [7, 7]", "target = [1, 1]");
        assert!(matches!(RunConfig::from_toml(&same), Err(Error::Config(_))));
        let outside = MINIMAL.replace("target = [7, 7]", "target = [9, 0]");
        assert!(matches!(RunConfig::from_toml(&outside), Err(Error::Config(_))));
        let typo = MINIMAL.replace("r_term", "r_terminal");
        assert!(matches!(RunConfig::from_toml(&typo), Err(Error::Config(_))));
    }

    #[test]
    fn resizing_keeps_the_mission_inside() {
        let c = RunConfig::from_toml(MINIMAL).unwrap().resized(4, 3, 5).unwrap();
        assert_eq!(c.mission.start, [0, 0]);
        assert_eq!(c.mission.target, [3, 2]);
    }
}
