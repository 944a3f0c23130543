//! Sparse value iteration over the appended model.
//!
//! The update is
//!
//! ```text
//! v_{k+1}(s) = max_a [ R(a, s) + sum_{s'} P(s' | s, a) v_k(s') ]
//! ```
//!
//! with the expected reward outside the successor sum (rows sum to one) and
//! the sink pinned at zero. Every state is updated every iteration from the
//! previous iterate. Because transitions only go from layer `t` to `t + 1`
//! or the sink, the iterate is exact after `nt` sweeps and the next sweep
//! changes nothing.

pub mod io;

use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::model::SparseModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Always 1: the problem is an undiscounted finite-horizon total-reward MDP.
    pub gamma: f64,
}

impl SolverConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    /// Defaults for a model with `nt` layers: `epsilon = 1e-8`,
    /// `max_iterations = nt + 2`.
    pub fn for_horizon(nt: usize) -> Self {
        Self {
            epsilon: Self::DEFAULT_EPSILON,
            max_iterations: nt + 2,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if self.gamma != 1.0 {
            return Err(Error::Config(format!(
                "only undiscounted problems are supported (gamma = 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Value function over all states (sink last, always zero) and the greedy
/// action per grid state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub values: Vec<f64>,
    pub actions: Vec<u16>,
    pub iterations_run: usize,
    pub residual: f64,
}

/// Per-block row pointers, so each state's entries are a contiguous slice.
struct RowIndex {
    ptrs: Vec<Vec<u32>>,
}

impl RowIndex {
    fn new(model: &SparseModel) -> Result<Self> {
        let nc = model.n_cells();
        let mut ptrs = Vec::with_capacity(model.blocks().len());
        for a in 0..model.n_actions() {
            for t in 0..model.nt() {
                let p = model.block(a, t).row_offsets((t * nc) as u32, nc).ok_or_else(|| {
                    Error::Contract(format!(
                        "block (a={a}, t={t}) does not hold exactly one or more entries for each state of layer {t}"
                    ))
                })?;
                ptrs.push(p);
            }
        }
        Ok(Self { ptrs })
    }

    /// `R(a, s) + sum P v` for grid state `s`.
    #[inline]
    fn backup(&self, model: &SparseModel, values: &[f64], a: usize, s: usize) -> f64 {
        let nc = model.n_cells();
        let t = s / nc;
        let local = s % nc;
        let k = a * model.nt() + t;
        let b = model.block(a, t);
        let ptr = &self.ptrs[k];
        let (lo, hi) = (ptr[local] as usize, ptr[local + 1] as usize);
        let mut acc = 0.0;
        for (c, p) in b.cols()[lo..hi].iter().zip(&b.vals()[lo..hi]) {
            acc += p * values[*c as usize];
        }
        model.reward(a, s) + acc
    }

    /// Best backed-up value and its lowest-index maximizer.
    #[inline]
    fn best(&self, model: &SparseModel, values: &[f64], s: usize) -> (f64, usize) {
        let mut best = (self.backup(model, values, 0, s), 0);
        for a in 1..model.n_actions() {
            let q = self.backup(model, values, a, s);
            if q > best.0 {
                best = (q, a);
            }
        }
        best
    }
}

/// Iterates the Bellman optimality update from `v_0 = 0` until the largest
/// change is below `epsilon`. Fails with [`Error::NotConverged`] (carrying
/// the residual) if `max_iterations` is reached first.
pub fn value_iteration(model: &SparseModel, cfg: &SolverConfig) -> Result<PolicyValue> {
    cfg.validate()?;
    let index = RowIndex::new(model)?;
    let ng = model.n_grid_states();
    let mut values = vec![0.0; ng + 1];
    let mut next = vec![0.0; ng + 1];
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        next[..ng]
            .par_iter_mut()
            .enumerate()
            .for_each(|(s, out)| *out = index.best(model, &values, s).0);
        residual = next[..ng]
            .par_iter()
            .zip(&values[..ng])
            .map(|(a, b)| (a - b).abs())
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut values, &mut next);
        if residual < cfg.epsilon {
            return Ok(PolicyValue {
                values,
                actions: Vec::new(),
                iterations_run: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Greedy policy with respect to `pv.values`; ties go to the lowest action
/// index.
pub fn extract_policy(model: &SparseModel, pv: &PolicyValue) -> Result<PolicyValue> {
    contract!(
        pv.values.len() == model.n_states(),
        "value vector has {} entries, model has {} states",
        pv.values.len(),
        model.n_states()
    );
    let index = RowIndex::new(model)?;
    let actions = (0..model.n_grid_states())
        .into_par_iter()
        .map(|s| index.best(model, &pv.values, s).1 as u16)
        .collect();
    Ok(PolicyValue {
        actions,
        ..pv.clone()
    })
}

/// Value iteration followed by policy extraction.
pub fn solve(model: &SparseModel, cfg: &SolverConfig) -> Result<PolicyValue> {
    extract_policy(model, &value_iteration(model, cfg)?)
}

/// Exact value of a fixed policy, by one backward pass over time layers.
pub fn policy_value(model: &SparseModel, policy: &[u16]) -> Result<Vec<f64>> {
    contract!(
        policy.len() == model.n_grid_states(),
        "policy has {} entries, model has {} grid states",
        policy.len(),
        model.n_grid_states()
    );
    if let Some(s) = policy.iter().position(|&a| a as usize >= model.n_actions()) {
        return Err(Error::Contract(format!("policy action {} at state {s} out of range", policy[s])));
    }
    let index = RowIndex::new(model)?;
    let nc = model.n_cells();
    let sink = model.sink() as u32;
    for a in 0..model.n_actions() {
        for t in 0..model.nt() {
            let lo = ((t + 1) * nc) as u32;
            let hi = if t + 1 < model.nt() { lo + nc as u32 } else { lo };
            contract!(
                model.block(a, t).cols().iter().all(|&c| c == sink || (lo..hi).contains(&c)),
                "block (a={a}, t={t}) has successors outside layer {} and the sink",
                t + 1
            );
        }
    }
    let mut values = vec![0.0; model.n_states()];
    for t in (0..model.nt()).rev() {
        let (layer, later) = values[t * nc..].split_at_mut(nc);
        // successor values are all in `later` (the sink is its last entry)
        let later_offset = (t + 1) * nc;
        layer.par_iter_mut().enumerate().for_each(|(local, out)| {
            let s = t * nc + local;
            let a = policy[s] as usize;
            let b = model.block(a, t);
            let ptr = &index.ptrs[a * model.nt() + t];
            let (lo, hi) = (ptr[local] as usize, ptr[local + 1] as usize);
            let mut acc = 0.0;
            for (c, p) in b.cols()[lo..hi].iter().zip(&b.vals()[lo..hi]) {
                acc += p * later[*c as usize - later_offset];
            }
            *out = model.reward(a, s) + acc;
        });
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CooBlock;

    /// Deterministic three-cell line 0 -> 1 -> 2 (target) with time rewards.
    fn chain() -> SparseModel {
        let nc = 3;
        let nt = 4;
        let sink = (nc * nt) as u32;
        let mut blocks = Vec::new();
        let mut rewards = Vec::new();
        for t in 0..nt {
            let mut rows = Vec::new();
            let mut cols = Vec::new();
            for c in 0..nc {
                rows.push((t * nc + c) as u32);
                let last = t + 1 == nt;
                cols.push(if c == 2 || last { sink } else { ((t + 1) * nc + c + 1) as u32 });
                rewards.push(match (c, last) {
                    (2, _) => 0.0,
                    (_, true) => -100.0,
                    (1, false) => -1.0 + 10.0,
                    _ => -1.0,
                });
            }
            blocks.push(CooBlock::from_parts(rows, cols, vec![1.0; nc]));
        }
        SparseModel::from_parts(nc, nt, 1, blocks, rewards).unwrap()
    }

    #[test]
    fn chain_value() {
        let m = chain();
        let pv = solve(&m, &SolverConfig::for_horizon(m.nt())).unwrap();
        assert_eq!(pv.values[0], 8.0);
        assert_eq!(pv.values[1], 9.0);
        assert_eq!(pv.values[m.sink()], 0.0);
        assert!(pv.iterations_run <= m.nt() + 1);
        assert_eq!(pv.residual, 0.0);
        assert_eq!(pv.actions, vec![0; m.n_grid_states()]);
    }

    #[test]
    fn everything_to_sink() {
        let nc = 2;
        let blocks = vec![CooBlock::from_parts(vec![0, 1], vec![2, 2], vec![1.0, 1.0])];
        let m = SparseModel::from_parts(nc, 1, 1, blocks, vec![-50.0, -50.0]).unwrap();
        let pv = value_iteration(&m, &SolverConfig::for_horizon(1)).unwrap();
        assert_eq!(&pv.values, &[-50.0, -50.0, 0.0]);
        assert_eq!(policy_value(&m, &[0, 0]).unwrap(), vec![-50.0, -50.0, 0.0]);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let blocks = vec![
            CooBlock::from_parts(vec![0], vec![1], vec![1.0]),
            CooBlock::from_parts(vec![0], vec![1], vec![1.0]),
            CooBlock::from_parts(vec![0], vec![1], vec![1.0]),
        ];
        let m = SparseModel::from_parts(1, 1, 3, blocks, vec![1.0, 3.0, 3.0]).unwrap();
        let pv = solve(&m, &SolverConfig::for_horizon(1)).unwrap();
        assert_eq!(pv.actions, vec![1]);
        let same = SparseModel::from_parts(1, 1, 3, m.blocks().to_vec(), vec![2.0; 3]).unwrap();
        assert_eq!(solve(&same, &SolverConfig::for_horizon(1)).unwrap().actions, vec![0]);
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        let m = chain();
        let cfg = SolverConfig {
            max_iterations: 2,
            ..SolverConfig::for_horizon(m.nt())
        };
        match value_iteration(&m, &cfg) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn evaluating_the_optimal_policy_returns_the_optimal_values() {
        let m = chain();
        let pv = solve(&m, &SolverConfig::for_horizon(m.nt())).unwrap();
        let v = policy_value(&m, &pv.actions).unwrap();
        for (a, b) in v.iter().zip(&pv.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_discounting() {
        let cfg = SolverConfig {
            gamma: 0.9,
            ..SolverConfig::for_horizon(3)
        };
        assert!(matches!(value_iteration(&chain(), &cfg), Err(Error::Config(_))));
    }
}
