//! Applying a policy to each flow realization.
//!
//! Trajectories use [`Problem::step`], the same routine that builds the
//! model, so a rollout sees exactly the successors and rewards the model
//! was counted from.

pub mod export;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{contract, Result};
use crate::model::{Outcome, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    ReachedTarget,
    /// Left the domain or ran into a restricted region.
    Outbound,
    /// Ran out of time layers before reaching the target.
    Horizon,
}

impl TerminalStatus {
    pub fn name(self) -> &'static str {
        match self {
            TerminalStatus::ReachedTarget => "reached_target",
            TerminalStatus::Outbound => "outbound",
            TerminalStatus::Horizon => "horizon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    /// Grid state at the start of the step.
    pub state: usize,
    /// Center of the departure cell.
    pub position: [f64; 2],
    pub action: u16,
    pub reward: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub realization: usize,
    pub steps: Vec<TrajectoryStep>,
    pub status: TerminalStatus,
    pub cumulative_reward: f64,
}

impl Trajectory {
    /// Elapsed time on arrival, `None` unless the target was reached.
    pub fn arrival_time(&self, dt: f64) -> Option<f64> {
        (self.status == TerminalStatus::ReachedTarget).then(|| self.steps.len() as f64 * dt)
    }

    pub fn last_step(&self) -> &TrajectoryStep {
        self.steps.last().expect("trajectories take at least one step")
    }
}

/// Follows `policy` for realization `r` from `start_cell` at `t = 0` until
/// the step ends in the target or the sink.
pub fn simulate_trajectory(problem: &Problem<'_>, policy: &[u16], r: usize, start_cell: usize) -> Result<Trajectory> {
    let grid = problem.grid();
    contract!(
        policy.len() == grid.n_states(),
        "policy has {} entries, grid has {} states",
        policy.len(),
        grid.n_states()
    );
    contract!(start_cell < grid.n_cells(), "start cell {start_cell} outside the grid");
    contract!(r < problem.n_realizations(), "realization {r} out of range");

    let mut cell = start_cell;
    let mut steps = Vec::new();
    let mut total = 0.0;
    for t in 0..grid.nt {
        let state = grid.state(cell, t);
        let action = policy[state];
        contract!(
            (action as usize) < problem.actions().len(),
            "policy action {action} at state {state} out of range"
        );
        let tr = problem.step(cell, t, action as usize, r);
        total += tr.reward;
        steps.push(TrajectoryStep {
            t,
            state,
            position: grid.center(cell),
            action,
            reward: tr.reward,
            outcome: tr.outcome,
        });
        let status = match tr.outcome {
            Outcome::Moved => {
                cell = tr.next_cell.expect("moves land in a cell");
                continue;
            }
            Outcome::ReachedTarget | Outcome::FromTarget => TerminalStatus::ReachedTarget,
            Outcome::HorizonExceeded => TerminalStatus::Horizon,
            Outcome::LeftDomain | Outcome::LandedOnObstacle | Outcome::CrossedObstacle | Outcome::FromObstacle => {
                TerminalStatus::Outbound
            }
        };
        return Ok(Trajectory {
            realization: r,
            steps,
            status,
            cumulative_reward: total,
        });
    }
    unreachable!("the last layer always ends in the sink")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Quantiles {
    /// Linear interpolation between order statistics.
    pub fn of(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            p05: q(0.05),
            p25: q(0.25),
            p50: q(0.5),
            p75: q(0.75),
            p95: q(0.95),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct StatusCounts {
    pub reached_target: usize,
    pub outbound: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalStats {
    pub count: usize,
    pub mean: f64,
    pub quantiles: Quantiles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub mean_cumulative_reward: f64,
    pub std_cumulative_reward: f64,
    /// Standard error of the mean cumulative reward.
    pub std_error: f64,
    pub cumulative_reward_quantiles: Quantiles,
    pub status_counts: StatusCounts,
    pub mean_steps: f64,
    pub arrival_time: Option<ArrivalStats>,
}

impl EnsembleSummary {
    pub fn from_trajectories(trajectories: &[Trajectory], dt: f64) -> Self {
        let n = trajectories.len();
        let rewards: Vec<f64> = trajectories.iter().map(|t| t.cumulative_reward).collect();
        let mean = rewards.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        let mut counts = StatusCounts::default();
        for t in trajectories {
            match t.status {
                TerminalStatus::ReachedTarget => counts.reached_target += 1,
                TerminalStatus::Outbound => counts.outbound += 1,
                TerminalStatus::Horizon => counts.horizon += 1,
            }
        }
        let arrivals: Vec<f64> = trajectories.iter().filter_map(|t| t.arrival_time(dt)).collect();
        let arrival_time = Quantiles::of(&arrivals).map(|quantiles| ArrivalStats {
            count: arrivals.len(),
            mean: arrivals.iter().sum::<f64>() / arrivals.len() as f64,
            quantiles,
        });
        Self {
            n_trajectories: n,
            mean_cumulative_reward: mean,
            std_cumulative_reward: std,
            std_error: std / (n as f64).sqrt(),
            cumulative_reward_quantiles: Quantiles::of(&rewards).expect("non-empty ensemble"),
            status_counts: counts,
            mean_steps: trajectories.iter().map(|t| t.steps.len()).sum::<usize>() as f64 / n as f64,
            arrival_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    /// One trajectory per realization, in realization order.
    pub trajectories: Vec<Trajectory>,
    pub summary: EnsembleSummary,
}

impl TrajectoryEnsemble {
    /// Fraction of all recorded steps whose action uses speed index `speed_idx`.
    pub fn speed_fraction(&self, problem: &Problem<'_>, speed_idx: usize) -> f64 {
        let (hits, total) = self
            .trajectories
            .iter()
            .flat_map(|t| &t.steps)
            .fold((0usize, 0usize), |(h, n), s| {
                let same = problem.action(s.action as usize).speed_idx == speed_idx;
                (h + same as usize, n + 1)
            });
        hits as f64 / total.max(1) as f64
    }
}

/// Simulates every realization in parallel, collected in realization order.
pub fn ensemble_rollout(problem: &Problem<'_>, policy: &[u16], start_cell: usize) -> Result<TrajectoryEnsemble> {
    let trajectories = (0..problem.n_realizations())
        .into_par_iter()
        .map(|r| simulate_trajectory(problem, policy, r, start_cell))
        .collect::<Result<Vec<_>>>()?;
    let summary = EnsembleSummary::from_trajectories(&trajectories, problem.grid().dt);
    Ok(TrajectoryEnsemble { trajectories, summary })
}

/// Trajectories that ended on an obstacle from a state where some action
/// avoids every obstacle for every realization. Returns
/// `(realization, state)` pairs.
pub fn avoidable_obstacle_hits(problem: &Problem<'_>, ensemble: &TrajectoryEnsemble) -> Vec<(usize, usize)> {
    let grid = problem.grid();
    let safe_exists = |state: usize| {
        let (cell, t) = grid.split_state(state);
        (0..problem.actions().len()).any(|a| {
            (0..problem.n_realizations()).all(|r| {
                let o = problem.step(cell, t, a, r).outcome;
                !o.hits_obstacle() && o != Outcome::FromObstacle
            })
        })
    };
    ensemble
        .trajectories
        .iter()
        .filter(|t| t.last_step().outcome.hits_obstacle())
        .filter(|t| safe_exists(t.last_step().state))
        .map(|t| (t.realization, t.last_step().state))
        .collect()
}
