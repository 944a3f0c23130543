//! Slow reference implementations: dense model building by brute-force
//! counting, explicit backward induction, and a Monte-Carlo net-energy
//! reward over a sampled scalar field.
//!
//! Everything here is single-threaded and written for clarity, so it can
//! serve as ground truth for the parallel pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::environment::{
    ActionSpace, DoVelocityField, Environment, GridSpec, ObstacleMask, ScalarMeanField,
};
use crate::error::{contract, Error, Result};
use crate::model::{build_model, compute_subgrid, Objective, Outcome, Problem, RewardConfig, SparseModel};
use crate::solver::{solve, SolverConfig};

/// Largest dense tensor (`A * nt * N_c * (N_c + 1)` counts) the oracle accepts.
pub const MAX_DENSE_ENTRIES: usize = 1 << 24;

/// A small random planning problem.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub env: Environment,
    pub actions: ActionSpace,
    pub rewards: RewardConfig,
    pub target: usize,
}

impl RandomInstance {
    pub fn problem(&self) -> Problem<'_> {
        Problem::new(&self.env, self.actions, self.rewards, self.target).expect("random instance is valid")
    }
}

/// Random instance with `N_c <= 64`, `|A| <= 16`, `N_r <= 64`, `nt <= 10`,
/// random flow, obstacles, radiation and objective.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(2..=8usize);
    let ny = rng.random_range(2..=(64 / nx).min(8));
    let nt = rng.random_range(2..=10usize);
    let dx = [1.0, 0.5, 2.0][rng.random_range(0..3)];
    let dt = [1.0, 0.5, 0.75][rng.random_range(0..3)];
    let grid = GridSpec::new(nx, ny, nt, dx, dt, [rng.random_range(-3.0..3.0), 0.0]).unwrap();
    let ng = grid.n_states();
    let nr = rng.random_range(1..=64usize);
    let nm = rng.random_range(0..=3usize);

    // speeds in grid cells per step stay around one cell so sub-grids stay small
    let scale = dx / dt;
    let mean: Vec<f32> = (0..2 * ng).map(|_| (rng.random_range(-0.6..0.6) * scale) as f32).collect();
    let modes: Vec<f32> = (0..2 * ng * nm).map(|_| rng.random_range(-0.5..0.5) as f32).collect();
    let coeffs: Vec<f32> = (0..nt * nr * nm).map(|_| (rng.random_range(-0.8..0.8) * scale) as f32).collect();
    let velocity = DoVelocityField::new(grid, nm, nr, mean, modes, coeffs).unwrap();

    let scalar = ScalarMeanField::new(grid, (0..ng).map(|_| rng.random_range(0.0..3.0) as f32).collect()).unwrap();
    let density = rng.random_range(0.0..0.2);
    let mask = ObstacleMask::new(grid, (0..ng).map(|_| rng.random_bool(density)).collect()).unwrap();
    let env = Environment::new(velocity, scalar, mask).unwrap();

    let actions = ActionSpace::new(
        [1, 2, 4, 8][rng.random_range(0..4)],
        rng.random_range(1..=2usize),
        rng.random_range(0.3..1.5) * scale,
    )
    .unwrap();
    let objective = Objective::ALL[rng.random_range(0..3)];
    let rewards = RewardConfig::new(
        objective,
        rng.random_range(0.1..2.0),
        rng.random_range(0.0..2.0),
        rng.random_range(1.0..50.0),
        -rng.random_range(1.0..100.0),
    )
    .unwrap();
    let target = rng.random_range(0..grid.n_cells());
    RandomInstance {
        seed,
        env,
        actions,
        rewards,
        target,
    }
}

/// Full `N_c x (N_c + 1)` count matrices per `(a, t)`; column `N_c` is the
/// sink. Rewards are realization means, `[a][grid state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseModel {
    pub n_cells: usize,
    pub nt: usize,
    pub n_actions: usize,
    pub n_realizations: usize,
    /// `[a][t][source cell][successor cell or sink]`
    pub counts: Vec<u32>,
    pub rewards: Vec<f64>,
}

impl DenseModel {
    fn zeros(n_cells: usize, nt: usize, n_actions: usize, n_realizations: usize) -> Result<Self> {
        let entries = n_actions * nt * n_cells * (n_cells + 1);
        if entries > MAX_DENSE_ENTRIES {
            return Err(Error::Contract(format!(
                "dense model of {entries} entries exceeds the oracle limit {MAX_DENSE_ENTRIES}"
            )));
        }
        Ok(Self {
            n_cells,
            nt,
            n_actions,
            n_realizations,
            counts: vec![0; entries],
            rewards: vec![0.0; n_actions * nt * n_cells],
        })
    }

    fn index(&self, a: usize, t: usize, from: usize, to: usize) -> usize {
        ((a * self.nt + t) * self.n_cells + from) * (self.n_cells + 1) + to
    }

    pub fn count(&self, a: usize, t: usize, from: usize, to: usize) -> u32 {
        self.counts[self.index(a, t, from, to)]
    }

    pub fn probability(&self, a: usize, t: usize, from: usize, to: usize) -> f64 {
        self.count(a, t, from, to) as f64 / self.n_realizations as f64
    }

    pub fn reward(&self, a: usize, s: usize) -> f64 {
        self.rewards[a * self.nt * self.n_cells + s]
    }
}

/// Counts every `(t, a, cell, r)` step into dense matrices.
pub fn dense_build(problem: &Problem<'_>) -> Result<DenseModel> {
    let grid = problem.grid();
    let nc = grid.n_cells();
    let nr = problem.n_realizations();
    let na = problem.actions().len();
    let mut dense = DenseModel::zeros(nc, grid.nt, na, nr)?;
    for t in 0..grid.nt {
        for a in 0..na {
            for cell in 0..nc {
                let mut sum = 0.0;
                for r in 0..nr {
                    let tr = problem.step(cell, t, a, r);
                    let to = tr.next_cell.unwrap_or(nc);
                    let k = dense.index(a, t, cell, to);
                    dense.counts[k] += 1;
                    sum += tr.reward;
                }
                dense.rewards[a * grid.nt * nc + t * nc + cell] = sum / nr as f64;
            }
        }
    }
    Ok(dense)
}

/// Rebuilds dense counts from a sparse model by multiplying probabilities by
/// the realization count. Fails if a probability is not a count ratio or a
/// successor is outside the next layer.
pub fn dense_counts_from_coo(model: &SparseModel, n_realizations: usize) -> Result<DenseModel> {
    let nc = model.n_cells();
    let nt = model.nt();
    let mut dense = DenseModel::zeros(nc, nt, model.n_actions(), n_realizations)?;
    let sink = model.sink();
    for a in 0..model.n_actions() {
        for t in 0..nt {
            for (row, col, p) in model.block(a, t).iter() {
                let (row, col) = (row as usize, col as usize);
                contract!(row / nc == t, "row {row} of block (a={a}, t={t}) outside its layer");
                let to = if col == sink {
                    nc
                } else {
                    contract!(col / nc == t + 1, "column {col} of block (a={a}, t={t}) skips a layer");
                    col % nc
                };
                let c = p * n_realizations as f64;
                contract!((c - c.round()).abs() < 1e-6, "probability {p} is not a multiple of 1/{n_realizations}");
                let k = dense.index(a, t, row % nc, to);
                dense.counts[k] += c.round() as u32;
            }
        }
        let ng = nt * nc;
        for s in 0..ng {
            dense.rewards[a * ng + s] = model.reward(a, s);
        }
    }
    Ok(dense)
}

/// Values and action values from explicit backward induction.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleValues {
    /// Grid states, then the sink.
    pub values: Vec<f64>,
    /// `[a][grid state]`
    pub q: Vec<f64>,
}

impl OracleValues {
    /// Every action within `tol` of the best, ascending.
    pub fn maximizers(&self, s: usize, n_actions: usize, tol: f64) -> Vec<usize> {
        let ng = self.values.len() - 1;
        let best = (0..n_actions).map(|a| self.q[a * ng + s]).fold(f64::NEG_INFINITY, f64::max);
        (0..n_actions).filter(|&a| self.q[a * ng + s] >= best - tol).collect()
    }
}

/// Exact finite-horizon DP over the dense model, last layer first.
pub fn naive_vi(dense: &DenseModel) -> OracleValues {
    let nc = dense.n_cells;
    let ng = nc * dense.nt;
    let mut values = vec![0.0; ng + 1];
    let mut q = vec![0.0; dense.n_actions * ng];
    for t in (0..dense.nt).rev() {
        for from in 0..nc {
            let s = t * nc + from;
            let mut best = f64::NEG_INFINITY;
            for a in 0..dense.n_actions {
                let mut expect = 0.0;
                for to in 0..=nc {
                    let p = dense.probability(a, t, from, to);
                    if p == 0.0 {
                        continue;
                    }
                    let v_next = if to == nc { 0.0 } else { values[(t + 1) * nc + to] };
                    expect += p * v_next;
                }
                let qa = dense.reward(a, s) + expect;
                q[a * ng + s] = qa;
                best = best.max(qa);
            }
            values[s] = best;
        }
    }
    OracleValues { values, q }
}

/// Samples of a random scalar field, `[k][t][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEnsemble {
    grid: GridSpec,
    n_samples: usize,
    samples: Vec<f64>,
}

impl ScalarEnsemble {
    /// `n` samples whose per-cell mean is `mean`: random perturbations of
    /// size up to `spread`, centered across samples.
    pub fn around_mean(mean: &ScalarMeanField, n: usize, spread: f64, seed: u64) -> Result<Self> {
        contract!(n > 0, "scalar ensemble needs at least one sample");
        let grid = *mean.grid();
        let ng = grid.n_states();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = vec![0.0; n * ng];
        for s in 0..ng {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..=spread)).collect();
            let mu = d.iter().sum::<f64>() / n as f64;
            let (cell, t) = (s % grid.n_cells(), s / grid.n_cells());
            for (k, dk) in d.iter().enumerate() {
                samples[k * ng + s] = mean.at(cell, t) + (dk - mu);
            }
        }
        Ok(Self { grid, n_samples: n, samples })
    }

    /// The two samples `mean + delta` and `mean - delta`.
    pub fn symmetric_pair(mean: &ScalarMeanField, delta: &[f64]) -> Result<Self> {
        let grid = *mean.grid();
        let ng = grid.n_states();
        contract!(delta.len() == ng, "delta has {} entries, expected {ng}", delta.len());
        let mut samples = vec![0.0; 2 * ng];
        for s in 0..ng {
            let g = mean.at(s % grid.n_cells(), s / grid.n_cells());
            samples[s] = g + delta[s];
            samples[ng + s] = g - delta[s];
        }
        Ok(Self {
            grid,
            n_samples: 2,
            samples,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample(&self, k: usize, s: usize) -> f64 {
        self.samples[k * self.grid.n_states() + s]
    }

    /// Per-state sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let ng = self.grid.n_states();
        (0..ng)
            .map(|s| (0..self.n_samples).map(|k| self.sample(k, s)).sum::<f64>() / self.n_samples as f64)
            .collect()
    }
}

/// Expected net-energy reward of `(s, a)` under the joint empirical law of
/// flow realizations and independent scalar samples, evaluated sample by
/// sample as `[-c_f F^2 + c_r (g(s) + g(s')) / 2] dt`.
pub fn mc_net_energy_reward(ensemble: &ScalarEnsemble, problem: &Problem<'_>, s: usize, a: usize) -> Result<f64> {
    let grid = problem.grid();
    contract!(ensemble.grid == *grid, "scalar ensemble grid differs from the environment grid");
    contract!(s < grid.n_states(), "state {s} outside the grid");
    let rc = problem.rewards();
    contract!(
        rc.objective == Objective::NetEnergy,
        "the problem's objective is {}, not net_energy",
        rc.objective.name()
    );
    let (cell, t) = grid.split_state(s);
    let speed = problem.action(a).speed;
    let nr = problem.n_realizations();
    let nk = ensemble.n_samples();
    let mut total = 0.0;
    for r in 0..nr {
        let tr = problem.step(cell, t, a, r);
        match (tr.outcome, tr.next_cell) {
            (Outcome::Moved | Outcome::ReachedTarget, Some(next)) => {
                let s_next = grid.state(next, t + 1);
                let bonus = if tr.outcome == Outcome::ReachedTarget { rc.r_term } else { 0.0 };
                for k in 0..nk {
                    let g_here = ensemble.sample(k, s);
                    let g_next = ensemble.sample(k, s_next);
                    total += (-rc.c_f * speed * speed + rc.c_r * (g_here + g_next) / 2.0) * grid.dt + bonus;
                }
            }
            // terminal rewards do not see the scalar field
            _ => total += nk as f64 * tr.reward,
        }
    }
    Ok(total / (nr * nk) as f64)
}

/// Outcome of comparing the pipeline with the oracle on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub seed: u64,
    pub n_cells: usize,
    pub nt: usize,
    pub n_actions: usize,
    pub n_realizations: usize,
    /// First `(a, t, from, to)` whose counts differ.
    pub count_mismatch: Option<(usize, usize, usize, usize)>,
    pub max_reward_diff: f64,
    pub max_value_diff: f64,
    /// States whose chosen action is outside the oracle's maximizer set
    /// (actions within 1e-9 of the best).
    pub policy_mismatches: usize,
    pub iterations_run: usize,
    pub invariants: std::result::Result<(), String>,
}

impl EquivalenceReport {
    pub fn model_ok(&self) -> bool {
        self.count_mismatch.is_none() && self.max_reward_diff <= 1e-12 && self.invariants.is_ok()
    }

    pub fn solver_ok(&self) -> bool {
        self.max_value_diff <= 1e-9 && self.policy_mismatches == 0 && self.iterations_run <= self.nt + 1
    }
}

/// Builds and solves `random_instance(seed)` both ways and compares.
pub fn equivalence(seed: u64) -> Result<EquivalenceReport> {
    let inst = random_instance(seed);
    let p = inst.problem();
    let grid = *p.grid();
    let nr = p.n_realizations();
    let sg = compute_subgrid(&inst.env.velocity, p.actions(), &grid, 1)?;
    let model = build_model(&p, sg)?;
    let dense = dense_build(&p)?;
    let rebuilt = dense_counts_from_coo(&model, nr)?;

    let count_mismatch = dense
        .counts
        .iter()
        .zip(&rebuilt.counts)
        .position(|(x, y)| x != y)
        .map(|k| {
            let nc = dense.n_cells;
            let to = k % (nc + 1);
            let from = (k / (nc + 1)) % nc;
            let at = k / ((nc + 1) * nc);
            (at / dense.nt, at % dense.nt, from, to)
        });
    let max_reward_diff = dense
        .rewards
        .iter()
        .zip(&rebuilt.rewards)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);

    let pv = solve(&model, &SolverConfig::for_horizon(grid.nt))?;
    let oracle = naive_vi(&dense);
    let max_value_diff = pv
        .values
        .iter()
        .zip(&oracle.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let na = p.actions().len();
    let policy_mismatches = (0..grid.n_states())
        .filter(|&s| !oracle.maximizers(s, na, 1e-9).contains(&(pv.actions[s] as usize)))
        .count();

    Ok(EquivalenceReport {
        seed,
        n_cells: grid.n_cells(),
        nt: grid.nt,
        n_actions: na,
        n_realizations: nr,
        count_mismatch,
        max_reward_diff,
        max_value_diff,
        policy_mismatches,
        iterations_run: pv.iterations_run,
        invariants: model.check(1e-9),
    })
}

/// Largest `|mc_net_energy_reward - R(s, a)|` over every state and action
/// of `random_instance(seed)` under the net-energy objective, with `n`
/// scalar samples matched to the instance's mean field.
pub fn mean_field_gap(seed: u64, n: usize) -> Result<f64> {
    let mut inst = random_instance(seed);
    inst.rewards.objective = Objective::NetEnergy;
    let p = inst.problem();
    let grid = *p.grid();
    let sg = compute_subgrid(&inst.env.velocity, p.actions(), &grid, 1)?;
    let model = build_model(&p, sg)?;
    let ens = ScalarEnsemble::around_mean(&inst.env.scalar, n, 1.0, seed ^ 0x5ca1a2)?;
    let mut gap = 0.0f64;
    for a in 0..p.actions().len() {
        for s in 0..grid.n_states() {
            gap = gap.max((mc_net_energy_reward(&ens, &p, s, a)? - model.reward(a, s)).abs());
        }
    }
    Ok(gap)
}
