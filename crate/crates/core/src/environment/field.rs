//! Reduced-order (dynamically orthogonal) velocity field.
//!
//! A realization `r` of the stochastic flow is never stored. It is rebuilt
//! on demand as
//!
//! ```text
//! v(cell, t; r) = mean[t][cell] + sum_m coeffs[t][r][m] * modes[m][t][cell]
//! ```
//!
//! All arrays are kept as `f32` exactly as they appear on disk; arithmetic
//! is carried out in `f64`.

use rayon::prelude::*;

use super::GridSpec;
use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DoVelocityField {
    grid: GridSpec,
    n_modes: usize,
    n_realizations: usize,
    /// `[t][y][x][component]`
    mean: Vec<f32>,
    /// `[m][t][y][x][component]`
    modes: Vec<f32>,
    /// `[t][r][m]`
    coeffs: Vec<f32>,
}

/// Scalar counts for the reduced-order and the full-ensemble representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageFootprint {
    pub reduced_scalars: u64,
    pub full_scalars: u64,
}

impl StorageFootprint {
    pub fn for_dims(n_states: u64, n_modes: u64, n_realizations: u64, nt: u64) -> Self {
        Self {
            reduced_scalars: 2 * (1 + n_modes) * n_states + n_modes * n_realizations * nt,
            full_scalars: 2 * n_states * n_realizations,
        }
    }

    pub fn reduced_bytes_f32(&self) -> u64 {
        self.reduced_scalars * 4
    }

    pub fn full_bytes_f32(&self) -> u64 {
        self.full_scalars * 4
    }
}

impl DoVelocityField {
    pub fn new(
        grid: GridSpec,
        n_modes: usize,
        n_realizations: usize,
        mean: Vec<f32>,
        modes: Vec<f32>,
        coeffs: Vec<f32>,
    ) -> Result<Self> {
        grid.validate()?;
        if n_realizations == 0 {
            return Err(Error::Config("velocity field needs at least one realization".into()));
        }
        let ng = grid.n_states();
        contract!(
            mean.len() == 2 * ng,
            "mean has {} entries, expected {}",
            mean.len(),
            2 * ng
        );
        contract!(
            modes.len() == 2 * ng * n_modes,
            "modes have {} entries, expected {}",
            modes.len(),
            2 * ng * n_modes
        );
        contract!(
            coeffs.len() == grid.nt * n_realizations * n_modes,
            "coefficients have {} entries, expected {}",
            coeffs.len(),
            grid.nt * n_realizations * n_modes
        );
        for (name, data) in [("mean", &mean), ("modes", &modes), ("coeffs", &coeffs)] {
            if let Some(k) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::Contract(format!("{name}[{k}] is not finite")));
            }
        }
        Ok(Self {
            grid,
            n_modes,
            n_realizations,
            mean,
            modes,
            coeffs,
        })
    }

    /// A deterministic field: every realization equals `mean`.
    pub fn deterministic(grid: GridSpec, n_realizations: usize, mean: Vec<f32>) -> Result<Self> {
        Self::new(grid, 0, n_realizations, mean, Vec::new(), Vec::new())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_realizations(&self) -> usize {
        self.n_realizations
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn modes(&self) -> &[f32] {
        &self.modes
    }

    pub fn coeffs(&self) -> &[f32] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, t: usize, r: usize, m: usize) -> f64 {
        self.coeffs[(t * self.n_realizations + r) * self.n_modes + m] as f64
    }

    #[inline]
    pub fn mean_at(&self, cell: usize, t: usize) -> [f64; 2] {
        let k = 2 * self.grid.state(cell, t);
        [self.mean[k] as f64, self.mean[k + 1] as f64]
    }

    #[inline]
    pub fn mode_at(&self, m: usize, cell: usize, t: usize) -> [f64; 2] {
        let k = 2 * (m * self.grid.n_states() + self.grid.state(cell, t));
        [self.modes[k] as f64, self.modes[k + 1] as f64]
    }

    /// Unchecked reconstruction used on hot paths.
    #[inline]
    pub fn velocity(&self, cell: usize, t: usize, r: usize) -> [f64; 2] {
        let ng = self.grid.n_states();
        let k = 2 * self.grid.state(cell, t);
        let mut v = [self.mean[k] as f64, self.mean[k + 1] as f64];
        let c0 = (t * self.n_realizations + r) * self.n_modes;
        for m in 0..self.n_modes {
            let mu = self.coeffs[c0 + m] as f64;
            let km = 2 * m * ng + k;
            v[0] += mu * self.modes[km] as f64;
            v[1] += mu * self.modes[km + 1] as f64;
        }
        v
    }

    /// Velocity of realization `r` at grid state `s`.
    pub fn reconstruct_velocity(&self, s: usize, r: usize) -> Result<[f64; 2]> {
        contract!(
            s < self.grid.n_states(),
            "state {s} out of range (sink or beyond, N_g = {})",
            self.grid.n_states()
        );
        contract!(
            r < self.n_realizations,
            "realization {r} out of range (N_r = {})",
            self.n_realizations
        );
        let (cell, t) = self.grid.split_state(s);
        Ok(self.velocity(cell, t, r))
    }

    /// Velocities of all realizations at time `t`, laid out `[cell][r]`.
    pub fn time_slice(&self, t: usize) -> Vec<[f64; 2]> {
        let nr = self.n_realizations;
        let mut out = vec![[0.0; 2]; self.grid.n_cells() * nr];
        out.par_chunks_mut(nr).enumerate().for_each(|(cell, row)| {
            for (r, v) in row.iter_mut().enumerate() {
                *v = self.velocity(cell, t, r);
            }
        });
        out
    }

    /// Component-wise maximum of `|v|` over every state and realization.
    pub fn max_abs_velocity(&self) -> [f64; 2] {
        (0..self.grid.nt)
            .into_par_iter()
            .map(|t| {
                let mut m = [0.0f64; 2];
                for cell in 0..self.grid.n_cells() {
                    for r in 0..self.n_realizations {
                        let v = self.velocity(cell, t, r);
                        m[0] = m[0].max(v[0].abs());
                        m[1] = m[1].max(v[1].abs());
                    }
                }
                m
            })
            .reduce(|| [0.0; 2], |a, b| [a[0].max(b[0]), a[1].max(b[1])])
    }

    pub fn storage_footprint(&self) -> StorageFootprint {
        StorageFootprint::for_dims(
            self.grid.n_states() as u64,
            self.n_modes as u64,
            self.n_realizations as u64,
            self.grid.nt as u64,
        )
    }

    /// Number of scalars actually held by this value.
    pub fn stored_scalars(&self) -> u64 {
        (self.mean.len() + self.modes.len() + self.coeffs.len()) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(seed: u64, n_modes: usize, nr: usize) -> DoVelocityField {
        let grid = GridSpec::unit(3, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ng = grid.n_states();
        let mut gen = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let mean = gen(2 * ng);
        let modes = gen(2 * ng * n_modes);
        let coeffs = gen(grid.nt * nr * n_modes);
        DoVelocityField::new(grid, n_modes, nr, mean, modes, coeffs).unwrap()
    }

    #[test]
    fn zero_coefficients_give_the_mean() {
        let grid = GridSpec::unit(2, 2, 1).unwrap();
        let mean: Vec<f32> = (0..8).map(|k| k as f32 * 0.25).collect();
        let modes = vec![1.0; 8];
        let f = DoVelocityField::new(grid, 1, 2, mean, modes, vec![0.0; 2]).unwrap();
        for s in 0..4 {
            let v = f.reconstruct_velocity(s, 1).unwrap();
            assert_eq!(v, [s as f64 * 0.5, s as f64 * 0.5 + 0.25]);
        }
    }

    #[test]
    fn single_mode_formula() {
        let grid = GridSpec::unit(1, 1, 1).unwrap();
        let f = DoVelocityField::new(grid, 1, 1, vec![1.0, 0.0], vec![0.5, -0.5], vec![2.0]).unwrap();
        assert_eq!(f.reconstruct_velocity(0, 0).unwrap(), [2.0, -1.0]);
    }

    #[test]
    fn three_mode_field_matches_explicit_sum() {
        let f = random_field(11, 3, 4);
        let g = *f.grid();
        for s in 0..g.n_states() {
            let (cell, t) = g.split_state(s);
            for r in 0..4 {
                // explicit loop over the raw arrays
                let mut want = [0.0f64; 2];
                for c in 0..2 {
                    want[c] = f.mean[2 * s + c] as f64;
                    for m in 0..3 {
                        want[c] += f.coeffs[(t * 4 + r) * 3 + m] as f64
                            * f.modes[2 * (m * g.n_states() + s) + c] as f64;
                    }
                }
                let got = f.reconstruct_velocity(s, r).unwrap();
                assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
                assert_eq!(got, f.velocity(cell, t, r));
            }
        }
    }

    #[test]
    fn reconstruction_is_linear_in_coefficients() {
        let f = random_field(5, 2, 3);
        let mut doubled = f.clone();
        doubled.coeffs.iter_mut().for_each(|c| *c *= 2.0);
        let g = *f.grid();
        for s in 0..g.n_states() {
            let (cell, t) = g.split_state(s);
            for r in 0..3 {
                let one = f.velocity(cell, t, r);
                let two = doubled.velocity(cell, t, r);
                let mean = f.mean_at(cell, t);
                for c in 0..2 {
                    let mode_sum = one[c] - mean[c];
                    assert!((two[c] - one[c] - mode_sum).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn out_of_range_indices_are_contract_errors() {
        let f = random_field(1, 1, 2);
        let ng = f.grid().n_states();
        assert!(matches!(f.reconstruct_velocity(ng, 0), Err(Error::Contract(_))));
        assert!(matches!(f.reconstruct_velocity(0, 2), Err(Error::Contract(_))));
    }

    #[test]
    fn rejects_inconsistent_arrays() {
        let grid = GridSpec::unit(2, 2, 1).unwrap();
        assert!(DoVelocityField::new(grid, 0, 1, vec![0.0; 7], vec![], vec![]).is_err());
        assert!(DoVelocityField::new(grid, 0, 1, vec![f32::NAN; 8], vec![], vec![]).is_err());
    }

    #[test]
    fn footprint_formulas() {
        let fp = StorageFootprint::for_dims(1_000_000, 10, 1000, 100);
        assert_eq!(fp.full_scalars, 2_000_000_000);
        assert_eq!(fp.reduced_scalars, 2 * 11 * 1_000_000 + 10 * 1000 * 100);
        let mean_only = StorageFootprint::for_dims(500, 0, 7, 5);
        assert_eq!(mean_only.reduced_scalars, 1000);
        let tiny = StorageFootprint::for_dims(500, 1, 1, 5);
        assert_eq!(tiny.full_scalars, 1000);
        assert_eq!(tiny.reduced_scalars, 4 * 500 + 5);
    }

    #[test]
    fn footprint_matches_held_arrays() {
        let f = random_field(2, 3, 5);
        assert_eq!(f.storage_footprint().reduced_scalars, f.stored_scalars());
    }

    #[test]
    fn reduced_is_smaller_above_the_break_even_ensemble() {
        for (nc, nt, nm) in [(2500u64, 60u64, 4u64), (40000, 200, 10), (10000, 100, 10)] {
            let ng = nc * nt;
            let threshold = (1 + nm) as f64 + (nm * nt) as f64 / (2 * nc) as f64;
            let nr = threshold.floor() as u64 + 1;
            let fp = StorageFootprint::for_dims(ng, nm, nr, nt);
            assert!(fp.reduced_scalars < fp.full_scalars, "nc={nc} nt={nt} nm={nm} nr={nr}");
        }
    }
}
