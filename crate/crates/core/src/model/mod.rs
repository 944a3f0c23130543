//! Building the sparse MDP: transition blocks `P_{a,t}` and expected
//! one-step rewards `R_{a,t}` for every action and time layer.

mod coo;
pub mod io;
mod step;
mod subgrid;
mod sweep;

pub use coo::CooBlock;
pub use step::{Objective, Outcome, Problem, RewardConfig, Transition};
pub use subgrid::{compute_subgrid, SubGridSpec};
pub use sweep::{assemble_coo, count_nnz, finalize_rewards, transition_sweep, NnzCount, SubGridAccumulator};

use crate::error::{contract, Result};

/// The appended model: blocks per `(action, time)`, rewards in action-major
/// then state order. State `n_states() - 1` is the absorbing sink with an
/// implicit self-loop and zero reward.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    n_cells: usize,
    nt: usize,
    n_actions: usize,
    blocks: Vec<CooBlock>,
    rewards: Vec<f64>,
}

impl SparseModel {
    pub fn from_parts(n_cells: usize, nt: usize, n_actions: usize, blocks: Vec<CooBlock>, rewards: Vec<f64>) -> Result<Self> {
        contract!(
            blocks.len() == n_actions * nt,
            "{} blocks for {n_actions} actions x {nt} layers",
            blocks.len()
        );
        contract!(
            rewards.len() == n_actions * n_cells * nt,
            "{} rewards, expected {}",
            rewards.len(),
            n_actions * n_cells * nt
        );
        Ok(Self {
            n_cells,
            nt,
            n_actions,
            blocks,
            rewards,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Grid states `N_g` (sink excluded).
    pub fn n_grid_states(&self) -> usize {
        self.n_cells * self.nt
    }

    /// All states including the sink.
    pub fn n_states(&self) -> usize {
        self.n_grid_states() + 1
    }

    pub fn sink(&self) -> usize {
        self.n_grid_states()
    }

    pub fn block(&self, a: usize, t: usize) -> &CooBlock {
        &self.blocks[a * self.nt + t]
    }

    pub fn blocks(&self) -> &[CooBlock] {
        &self.blocks
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    #[inline]
    pub fn reward(&self, a: usize, s: usize) -> f64 {
        self.rewards[a * self.n_grid_states() + s]
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(CooBlock::nnz).sum()
    }

    /// Checks the structural invariants: canonical order, rows confined to
    /// their layer with every row present, successors in the next layer or
    /// the sink, values in `(0, 1]`, row sums within `tol` of one and finite
    /// rewards. Returns the name of the first broken invariant.
    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        let nc = self.n_cells;
        let sink = self.sink() as u32;
        for a in 0..self.n_actions {
            for t in 0..self.nt {
                let b = self.block(a, t);
                let at = format!("block (a={a}, t={t})");
                if !b.is_canonical() {
                    return Err(format!("canonical_order: {at}"));
                }
                let first = (t * nc) as u32;
                if b.row_offsets(first, nc).is_none() {
                    return Err(format!("row_coverage: {at} does not hold exactly the rows of layer {t}"));
                }
                let next = if t + 1 < self.nt {
                    ((t + 1) * nc) as u32..((t + 2) * nc) as u32
                } else {
                    0..0
                };
                if let Some((r, c, _)) = b.iter().find(|&(_, c, _)| c != sink && !next.contains(&c)) {
                    return Err(format!("layered_successors: {at} row {r} -> col {c}"));
                }
                if let Some((r, c, v)) = b.iter().find(|&(_, _, v)| !(v > 0.0 && v <= 1.0)) {
                    return Err(format!("probability_range: {at} ({r},{c}) = {v}"));
                }
                for (r, sum) in b.row_sums() {
                    if (sum - 1.0).abs() > tol {
                        return Err(format!("row_normalization: {at} row {r} sums to {sum}"));
                    }
                }
            }
        }
        if let Some(k) = self.rewards.iter().position(|r| !r.is_finite()) {
            return Err(format!("finite_rewards: reward {k} is {}", self.rewards[k]));
        }
        Ok(())
    }
}

/// Runs the four stages for every `(t, a)`, time-major, and appends the
/// blocks per action.
pub fn build_model(problem: &Problem<'_>, subgrid: SubGridSpec) -> Result<SparseModel> {
    build_model_with(problem, subgrid, |_, _| {})
}

/// [`build_model`] that also hands every `(a, t)` accumulator to `inspect`
/// before it is discarded.
pub fn build_model_with(
    problem: &Problem<'_>,
    subgrid: SubGridSpec,
    mut inspect: impl FnMut(usize, &SubGridAccumulator),
) -> Result<SparseModel> {
    let grid = *problem.grid();
    let na = problem.actions().len();
    let nr = problem.n_realizations();
    let nc = grid.n_cells();
    let ng = grid.n_states();

    let mut blocks: Vec<CooBlock> = vec![CooBlock::default(); na * grid.nt];
    let mut rewards = vec![0.0; na * ng];
    let mut acc = SubGridAccumulator::new(grid, subgrid, 0);
    for t in 0..grid.nt {
        let velocities = problem.env().velocity.time_slice(t);
        for a in 0..na {
            acc.reset(t);
            sweep::sweep_into(problem, a, &velocities, &mut acc)?;
            inspect(a, &acc);
            let r = finalize_rewards(&acc, nr);
            rewards[a * ng + t * nc..a * ng + (t + 1) * nc].copy_from_slice(&r);
            let nnz = count_nnz(&acc);
            blocks[a * grid.nt + t] = assemble_coo(&acc, &nnz, nr);
        }
    }
    SparseModel::from_parts(nc, grid.nt, na, blocks, rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ActionSpace, DoVelocityField, Environment, GridSpec};

    #[test]
    fn deterministic_drift_chain_has_one_entry_per_state() {
        let g = GridSpec::unit(4, 2, 3).unwrap();
        let mean = (0..g.n_states()).flat_map(|_| [1.0f32, 0.0]).collect();
        let env = Environment::flow_only(DoVelocityField::deterministic(g, 3, mean).unwrap());
        let p = Problem::new(&env, ActionSpace::new(1, 1, 0.2).unwrap(), RewardConfig::time(4.0, -8.0).unwrap(), 3)
            .unwrap();
        let sg = compute_subgrid(&env.velocity, p.actions(), &g, 1).unwrap();
        let m = build_model(&p, sg).unwrap();
        for t in 0..g.nt {
            assert_eq!(m.block(0, t).nnz(), g.n_cells());
        }
        m.check(1e-9).unwrap();
        assert_eq!(m.n_states(), g.n_states() + 1);
        // reward layout: cell 2 at t=0 moves into target 3
        assert_eq!(m.reward(0, 2), -1.0 + 4.0);
        assert_eq!(m.reward(0, 3), 0.0);
        assert_eq!(m.reward(0, g.state(0, 2)), -8.0);
    }

    #[test]
    fn check_names_broken_invariants() {
        let good = CooBlock::from_parts(vec![0, 1], vec![2, 2], vec![1.0, 1.0]);
        let m = SparseModel::from_parts(2, 1, 1, vec![good], vec![0.0; 2]).unwrap();
        assert_eq!(m.check(1e-9), Ok(()));
        let bad = CooBlock::from_parts(vec![0, 1], vec![2, 2], vec![0.5, 1.0]);
        let m = SparseModel::from_parts(2, 1, 1, vec![bad], vec![0.0; 2]).unwrap();
        assert!(m.check(1e-9).unwrap_err().starts_with("row_normalization"));
        let m = SparseModel::from_parts(2, 1, 1, vec![CooBlock::default()], vec![0.0; 2]).unwrap();
        assert!(m.check(1e-9).unwrap_err().starts_with("row_coverage"));
    }
}
