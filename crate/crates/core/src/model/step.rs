//! The single kinematic step shared by model building, the dense oracle and
//! rollouts.

use serde::{Deserialize, Serialize};

use crate::environment::{Action, ActionSpace, Environment, GridSpec};
use crate::error::{contract, Error, Result};

/// Mission objective selecting the one-step reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `-dt` per step.
    Time,
    /// `-c_f F^2 dt` per step.
    Energy,
    /// `(-c_f F^2 + c_r (g(s) + g(s'))/2) dt` per step, `g` the mean energy field.
    NetEnergy,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Time, Objective::Energy, Objective::NetEnergy];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Time => "time",
            Objective::Energy => "energy",
            Objective::NetEnergy => "net_energy",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Objective::Time),
            "energy" => Ok(Objective::Energy),
            "net_energy" => Ok(Objective::NetEnergy),
            other => Err(Error::Config(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub objective: Objective,
    #[serde(default)]
    pub c_f: f64,
    #[serde(default)]
    pub c_r: f64,
    pub r_term: f64,
    pub r_outbound: f64,
}

impl RewardConfig {
    pub fn new(objective: Objective, c_f: f64, c_r: f64, r_term: f64, r_outbound: f64) -> Result<Self> {
        let cfg = Self {
            objective,
            c_f,
            c_r,
            r_term,
            r_outbound,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn time(r_term: f64, r_outbound: f64) -> Result<Self> {
        Self::new(Objective::Time, 0.0, 0.0, r_term, r_outbound)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_term > 0.0 && self.r_term.is_finite()) {
            return Err(Error::Config(format!("r_term must be positive, got {}", self.r_term)));
        }
        if !(self.r_outbound < 0.0 && self.r_outbound.is_finite()) {
            return Err(Error::Config(format!(
                "r_outbound must be negative, got {}",
                self.r_outbound
            )));
        }
        if !self.c_f.is_finite() || !self.c_r.is_finite() {
            return Err(Error::Config("c_f and c_r must be finite".into()));
        }
        Ok(())
    }

    /// Objective-specific reward of one legitimate move (no terminal bonus).
    #[inline]
    pub fn move_reward(&self, speed: f64, dt: f64, g_here: f64, g_next: f64) -> f64 {
        match self.objective {
            Objective::Time => -dt,
            Objective::Energy => -self.c_f * speed * speed * dt,
            Objective::NetEnergy => {
                (-self.c_f * speed * speed + 0.5 * self.c_r * g_here + 0.5 * self.c_r * g_next) * dt
            }
        }
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Landed in a free in-domain cell at `t + 1`.
    Moved,
    /// Landed in the target cell; reward includes `r_term`.
    ReachedTarget,
    LeftDomain,
    /// The step would end at or past the last time layer.
    HorizonExceeded,
    LandedOnObstacle,
    CrossedObstacle,
    /// Source is the target: absorbed into the sink with zero reward.
    FromTarget,
    /// Source is a restricted cell: absorbed with `r_outbound`.
    FromObstacle,
}

impl Outcome {
    pub fn hits_obstacle(self) -> bool {
        matches!(self, Outcome::LandedOnObstacle | Outcome::CrossedObstacle)
    }

    pub fn is_sink(self) -> bool {
        !matches!(self, Outcome::Moved | Outcome::ReachedTarget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Spatial successor cell at `t + 1`, `None` when the step ends in the sink.
    pub next_cell: Option<usize>,
    pub reward: f64,
    pub outcome: Outcome,
}

impl Transition {
    /// Global successor index (`grid.sink()` for sink transitions).
    pub fn successor(&self, grid: &GridSpec, t: usize) -> usize {
        match self.next_cell {
            Some(c) => grid.state(c, t + 1),
            None => grid.sink(),
        }
    }
}

/// An environment together with an action space, reward structure and target.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    env: &'a Environment,
    actions: ActionSpace,
    rewards: RewardConfig,
    target: usize,
    table: Vec<Action>,
}

impl<'a> Problem<'a> {
    pub fn new(env: &'a Environment, actions: ActionSpace, rewards: RewardConfig, target: usize) -> Result<Self> {
        actions.validate()?;
        rewards.validate()?;
        contract!(
            target < env.grid().n_cells(),
            "target cell {target} outside the {}x{} grid",
            env.grid().nx,
            env.grid().ny
        );
        Ok(Self {
            env,
            actions,
            rewards,
            target,
            table: actions.iter().collect(),
        })
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    pub fn grid(&self) -> &'a GridSpec {
        self.env.grid()
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn action(&self, a: usize) -> &Action {
        &self.table[a]
    }

    pub fn rewards(&self) -> &RewardConfig {
        &self.rewards
    }

    /// Target spatial cell (terminal at every time layer).
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn n_realizations(&self) -> usize {
        self.env.n_realizations()
    }

    /// One step of realization `r` from cell `cell` at layer `t` under action `a`.
    #[inline]
    pub fn step(&self, cell: usize, t: usize, a: usize, r: usize) -> Transition {
        let v = self.env.velocity.velocity(cell, t, r);
        self.step_with_velocity(cell, t, a, v)
    }

    /// [`Problem::step`] with the flow velocity at the source already known.
    #[inline]
    pub fn step_with_velocity(&self, cell: usize, t: usize, a: usize, v: [f64; 2]) -> Transition {
        self.step_from(cell, self.env.grid().center(cell), t, a, v)
    }

    /// The step routine proper; `x0` must be the center of `cell`.
    #[inline]
    pub(crate) fn step_from(&self, cell: usize, x0: [f64; 2], t: usize, a: usize, v: [f64; 2]) -> Transition {
        let grid = self.env.grid();
        let rc = &self.rewards;
        let sink = |reward, outcome| Transition {
            next_cell: None,
            reward,
            outcome,
        };

        if cell == self.target {
            return sink(0.0, Outcome::FromTarget);
        }
        let obstacles = &self.env.obstacles;
        if obstacles.is_blocked(cell, t) {
            return sink(rc.r_outbound, Outcome::FromObstacle);
        }
        let act = &self.table[a];
        let x1 = [
            x0[0] + (v[0] + act.vector[0]) * grid.dt,
            x0[1] + (v[1] + act.vector[1]) * grid.dt,
        ];
        let t1 = t + 1;
        if t1 >= grid.nt {
            return sink(rc.r_outbound, Outcome::HorizonExceeded);
        }
        let Some(next) = grid.spatial_cell(x1) else {
            return sink(rc.r_outbound, Outcome::LeftDomain);
        };
        if obstacles.is_blocked(next, t1) {
            return sink(rc.r_outbound, Outcome::LandedOnObstacle);
        }
        if obstacles.segment_blocked(x0, x1, t) {
            return sink(rc.r_outbound, Outcome::CrossedObstacle);
        }
        let scalar = &self.env.scalar;
        let (g_here, g_next) = match rc.objective {
            Objective::NetEnergy => (scalar.at(cell, t), scalar.at(next, t1)),
            _ => (0.0, 0.0),
        };
        let mut reward = rc.move_reward(act.speed, grid.dt, g_here, g_next);
        let outcome = if next == self.target {
            reward += rc.r_term;
            Outcome::ReachedTarget
        } else {
            Outcome::Moved
        };
        Transition {
            next_cell: Some(next),
            reward,
            outcome,
        }
    }
}
