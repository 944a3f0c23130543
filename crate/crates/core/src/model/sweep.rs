//! The four stages run for every `(t, a)`: transition counting, reward
//! normalization, nonzero census and COO assembly.
//!
//! Work is split into contiguous ranges of source cells. A worker owns the
//! count and reward slots of its cells outright and walks realizations in
//! index order, so the accumulated sums do not depend on the thread count.

use rayon::prelude::*;

use super::coo::CooBlock;
use super::step::Problem;
use super::subgrid::SubGridSpec;
use crate::environment::GridSpec;
use crate::error::{Error, Result};

const CELLS_PER_TASK: usize = 16;

/// Per-state successor counts (`S2_count`) and reward sums (`sum_R`) for one
/// `(t, a)` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGridAccumulator {
    grid: GridSpec,
    subgrid: SubGridSpec,
    t: usize,
    s2_count: Vec<u32>,
    sum_r: Vec<f64>,
}

impl SubGridAccumulator {
    pub fn new(grid: GridSpec, subgrid: SubGridSpec, t: usize) -> Self {
        let nc = grid.n_cells();
        Self {
            grid,
            subgrid,
            t,
            s2_count: vec![0; nc * subgrid.slots_per_state()],
            sum_r: vec![0.0; nc],
        }
    }

    pub(crate) fn reset(&mut self, t: usize) {
        self.t = t;
        self.s2_count.iter_mut().for_each(|c| *c = 0);
        self.sum_r.iter_mut().for_each(|r| *r = 0.0);
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn subgrid(&self) -> &SubGridSpec {
        &self.subgrid
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn s2_count(&self) -> &[u32] {
        &self.s2_count
    }

    pub fn sum_r(&self) -> &[f64] {
        &self.sum_r
    }

    /// Slot counts of one source cell, out slot last.
    pub fn counts(&self, cell: usize) -> &[u32] {
        let k = self.subgrid.slots_per_state();
        &self.s2_count[cell * k..(cell + 1) * k]
    }
}

/// Runs the counting sweep for layer `t` and action `a` over every source
/// cell and realization.
pub fn transition_sweep(problem: &Problem<'_>, t: usize, a: usize, subgrid: SubGridSpec) -> Result<SubGridAccumulator> {
    let grid = *problem.grid();
    if t >= grid.nt || a >= problem.actions().len() {
        return Err(Error::Contract(format!("sweep at t={t}, a={a} out of range")));
    }
    let slice = problem.env().velocity.time_slice(t);
    let mut acc = SubGridAccumulator::new(grid, subgrid, t);
    sweep_into(problem, a, &slice, &mut acc)?;
    Ok(acc)
}

/// Sweep with the layer's velocities precomputed as `[cell][r]`. The
/// accumulator must be zeroed and carry the layer index.
pub(crate) fn sweep_into(
    problem: &Problem<'_>,
    a: usize,
    velocities: &[[f64; 2]],
    acc: &mut SubGridAccumulator,
) -> Result<()> {
    let grid = acc.grid;
    let sg = acc.subgrid;
    let t = acc.t;
    let nr = problem.n_realizations();
    let k = sg.slots_per_state();
    let out = sg.out_slot();
    debug_assert_eq!(velocities.len(), grid.n_cells() * nr);

    acc.s2_count
        .par_chunks_mut(k * CELLS_PER_TASK)
        .zip(acc.sum_r.par_chunks_mut(CELLS_PER_TASK))
        .enumerate()
        .try_for_each(|(chunk, (counts, sums))| {
            for (local, sum) in sums.iter_mut().enumerate() {
                let cell = chunk * CELLS_PER_TASK + local;
                let row = &mut counts[local * k..(local + 1) * k];
                let vs = &velocities[cell * nr..(cell + 1) * nr];
                let x0 = grid.center(cell);
                let (i0, j0) = grid.cell_coords(cell);
                for v in vs {
                    let tr = problem.step_from(cell, x0, t, a, *v);
                    let slot = match tr.next_cell {
                        Some(next) => {
                            let (i1, j1) = grid.cell_coords(next);
                            sg.slot(i1 as isize - i0 as isize, j1 as isize - j0 as isize)
                        }
                        .ok_or_else(|| {
                            Error::Contract(format!(
                                "successor {next} of cell {cell} at t={t} lies outside the \
                                 {}x{} sub-grid",
                                sg.side_x(),
                                sg.side_y()
                            ))
                        })?,
                        None => out,
                    };
                    row[slot] += 1;
                    *sum += tr.reward;
                }
            }
            Ok(())
        })
}

/// Sample-mean expected reward per source cell.
pub fn finalize_rewards(acc: &SubGridAccumulator, n_realizations: usize) -> Vec<f64> {
    let n = n_realizations as f64;
    acc.sum_r.iter().map(|s| s / n).collect()
}

/// Nonzero slot counts per source cell and their total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NnzCount {
    pub total: usize,
    pub per_state: Vec<u32>,
}

pub fn count_nnz(acc: &SubGridAccumulator) -> NnzCount {
    let k = acc.subgrid.slots_per_state();
    let per_state: Vec<u32> = acc
        .s2_count
        .par_chunks(k)
        .map(|row| row.iter().filter(|&&c| c > 0).count() as u32)
        .collect();
    let total = per_state.iter().map(|&n| n as usize).sum();
    NnzCount { total, per_state }
}

/// Converts slot counts into a canonical COO block (`rows` ascending, `cols`
/// ascending within a row, sink last).
pub fn assemble_coo(acc: &SubGridAccumulator, nnz: &NnzCount, n_realizations: usize) -> CooBlock {
    let grid = acc.grid;
    let sg = acc.subgrid;
    let t = acc.t;
    let k = sg.slots_per_state();
    let nr = n_realizations as f64;
    let sink = grid.sink() as u32;

    let mut rows = vec![0u32; nnz.total];
    let mut cols = vec![0u32; nnz.total];
    let mut vals = vec![0.0f64; nnz.total];

    // carve the output into per-task windows so tasks write disjoint ranges
    let mut tasks = Vec::new();
    let (mut r_rest, mut c_rest, mut v_rest) = (&mut rows[..], &mut cols[..], &mut vals[..]);
    for (chunk, per) in nnz.per_state.chunks(CELLS_PER_TASK).enumerate() {
        let len: usize = per.iter().map(|&n| n as usize).sum();
        let (r, rr) = std::mem::take(&mut r_rest).split_at_mut(len);
        let (c, cr) = std::mem::take(&mut c_rest).split_at_mut(len);
        let (v, vr) = std::mem::take(&mut v_rest).split_at_mut(len);
        r_rest = rr;
        c_rest = cr;
        v_rest = vr;
        tasks.push((chunk, r, c, v));
    }

    tasks.into_par_iter().for_each(|(chunk, r_out, c_out, v_out)| {
        let mut pos = 0;
        let first = chunk * CELLS_PER_TASK;
        let last = (first + CELLS_PER_TASK).min(grid.n_cells());
        for cell in first..last {
            let (i, j) = grid.cell_coords(cell);
            let row = &acc.s2_count[cell * k..(cell + 1) * k];
            let src = grid.state(cell, t) as u32;
            for (slot, &count) in row.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let col = if slot == sg.out_slot() {
                    sink
                } else {
                    let (di, dj) = sg.displacement(slot);
                    let next = grid.cell((i as isize + di) as usize, (j as isize + dj) as usize);
                    grid.state(next, t + 1) as u32
                };
                r_out[pos] = src;
                c_out[pos] = col;
                v_out[pos] = count as f64 / nr;
                pos += 1;
            }
        }
        debug_assert_eq!(pos, r_out.len());
    });

    CooBlock::from_parts(rows, cols, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ActionSpace, DoVelocityField, Environment};
    use crate::model::step::RewardConfig;

    fn field(grid: GridSpec, modes: Vec<f32>, coeffs: Vec<f32>, nr: usize) -> DoVelocityField {
        let nm = modes.len() / (2 * grid.n_states());
        DoVelocityField::new(grid, nm, nr, vec![0.0; 2 * grid.n_states()], modes, coeffs).unwrap()
    }

    #[test]
    fn east_neighbor_with_zero_flow() {
        let g = GridSpec::unit(3, 3, 2).unwrap();
        let env = Environment::flow_only(field(g, vec![], vec![], 1));
        let p = Problem::new(&env, ActionSpace::new(4, 1, 1.0).unwrap(), RewardConfig::time(5.0, -9.0).unwrap(), 8)
            .unwrap();
        let sg = SubGridSpec::new(2, 2);
        let acc = transition_sweep(&p, 0, 0, sg).unwrap();
        let c = g.cell(0, 1);
        assert_eq!(acc.counts(c)[sg.slot(1, 0).unwrap()], 1);
        assert_eq!(finalize_rewards(&acc, 1)[c], -1.0);
    }

    #[test]
    fn two_realizations_split_between_slots() {
        let g = GridSpec::unit(3, 3, 2).unwrap();
        // one mode pushing north by one cell per unit coefficient
        let modes: Vec<f32> = (0..g.n_states()).flat_map(|_| [0.0f32, 1.0]).collect();
        let coeffs = vec![1.0, 0.0, 0.0, 0.0]; // t=0: r0 -> 1, r1 -> 0
        let env = Environment::flow_only(field(g, modes, coeffs, 2));
        // tiny speed so the action does not change the cell
        let p = Problem::new(&env, ActionSpace::new(4, 1, 0.1).unwrap(), RewardConfig::time(5.0, -9.0).unwrap(), 8)
            .unwrap();
        let sg = SubGridSpec::new(2, 2);
        let acc = transition_sweep(&p, 0, 0, sg).unwrap();
        let c = g.cell(1, 0);
        let row = acc.counts(c);
        assert_eq!(row[sg.slot(0, 1).unwrap()], 1);
        assert_eq!(row[sg.slot(0, 0).unwrap()], 1);
        assert_eq!(row.iter().sum::<u32>(), 2);
    }

    #[test]
    fn undersized_subgrid_is_a_contract_violation() {
        let g = GridSpec::unit(6, 1, 2).unwrap();
        let env = Environment::flow_only(field(g, vec![], vec![], 1));
        let p = Problem::new(&env, ActionSpace::new(1, 1, 3.0).unwrap(), RewardConfig::time(5.0, -9.0).unwrap(), 5)
            .unwrap();
        let err = transition_sweep(&p, 0, 0, SubGridSpec::new(1, 1)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn reward_mean_and_census() {
        let g = GridSpec::unit(2, 1, 1).unwrap();
        let sg = SubGridSpec::new(1, 1);
        let mut acc = SubGridAccumulator::new(g, sg, 0);
        acc.sum_r = vec![-2.0, 0.0];
        assert_eq!(finalize_rewards(&acc, 2), vec![-1.0, 0.0]);
        let zero = count_nnz(&acc);
        assert_eq!(zero.total, 0);
        let k = sg.slots_per_state();
        acc.s2_count[4] = 3;
        acc.s2_count[k + 1] = 1;
        acc.s2_count[k + sg.out_slot()] = 3;
        let nnz = count_nnz(&acc);
        assert_eq!(nnz.per_state, vec![1, 2]);
        assert_eq!(nnz.total, 3);
    }

    #[test]
    fn assembly_normalizes_counts() {
        let g = GridSpec::unit(3, 1, 2).unwrap();
        let sg = SubGridSpec::new(1, 1);
        let mut acc = SubGridAccumulator::new(g, sg, 0);
        let k = sg.slots_per_state();
        // cell 1: stays (slot (0,0)) three times, goes east once
        acc.s2_count[k + sg.slot(0, 0).unwrap()] = 3;
        acc.s2_count[k + sg.slot(1, 0).unwrap()] = 1;
        // cell 0: all to sink
        acc.s2_count[sg.out_slot()] = 4;
        // cell 2: single successor
        acc.s2_count[2 * k + sg.slot(-1, 0).unwrap()] = 4;
        let nnz = count_nnz(&acc);
        let coo = assemble_coo(&acc, &nnz, 4);
        assert_eq!(coo.rows(), &[0, 1, 1, 2]);
        assert_eq!(coo.cols(), &[6, 4, 5, 4]);
        assert_eq!(coo.vals(), &[1.0, 0.75, 0.25, 1.0]);
        assert!(coo.is_canonical());
    }
}
