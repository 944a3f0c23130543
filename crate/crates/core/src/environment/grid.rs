use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform spatio-temporal grid.
///
/// Cell `(i, j)` covers the half-open square
/// `[origin + i*dx, origin + (i+1)*dx) x [origin + j*dx, origin + (j+1)*dx)`.
/// States are flattened as `s = t*n_cells + j*nx + i`; the index `n_states()`
/// is reserved for the absorbing sink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nt: usize, dx: f64, dt: f64, origin: [f64; 2]) -> Result<Self> {
        let grid = Self {
            nx,
            ny,
            nt,
            dx,
            dt,
            origin,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Unit cells, unit time step, origin at zero.
    pub fn unit(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        Self::new(nx, ny, nt, 1.0, 1.0, [0.0, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nt == 0 {
            return Err(Error::Config(format!(
                "grid dimensions must be positive, got {}x{}x{}",
                self.nx, self.ny, self.nt
            )));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dx and dt must be positive and finite, got dx={} dt={}",
                self.dx, self.dt
            )));
        }
        if !self.origin.iter().all(|o| o.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        let n_states = self.n_cells() as u128 * self.nt as u128;
        if n_states >= u32::MAX as u128 {
            return Err(Error::Config(format!(
                "{n_states} states exceed the 32-bit state index limit"
            )));
        }
        Ok(())
    }

    /// Spatial cell count `N_c`.
    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Spatio-temporal state count `N_g`, excluding the sink.
    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_cells() * self.nt
    }

    #[inline]
    pub fn sink(&self) -> usize {
        self.n_states()
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    #[inline]
    pub fn state(&self, cell: usize, t: usize) -> usize {
        t * self.n_cells() + cell
    }

    /// Splits a state into `(cell, t)`. Panics on the sink.
    #[inline]
    pub fn split_state(&self, s: usize) -> (usize, usize) {
        assert!(s < self.n_states(), "state {s} is not a grid state");
        (s % self.n_cells(), s / self.n_cells())
    }

    /// Center of a spatial cell.
    #[inline]
    pub fn center(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_coords(cell);
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dx,
        ]
    }

    /// Center of the spatial cell underlying state `s`.
    pub fn center_of(&self, s: usize) -> [f64; 2] {
        self.center(self.split_state(s).0)
    }

    /// Spatial cell containing `pos`, or `None` outside the domain.
    #[inline]
    pub fn spatial_cell(&self, pos: [f64; 2]) -> Option<usize> {
        // floor(q) lies in [0, n) exactly when q does, and truncation is
        // floor for nonnegative q; NaN fails every comparison
        let fi = (pos[0] - self.origin[0]) / self.dx;
        let fj = (pos[1] - self.origin[1]) / self.dx;
        if fi >= 0.0 && fj >= 0.0 && fi < self.nx as f64 && fj < self.ny as f64 {
            Some(self.cell(fi as usize, fj as usize))
        } else {
            None
        }
    }

    /// Maps a position and time index to a state; `None` is the Outside marker
    /// (out of the spatial domain or past the last time layer).
    pub fn cell_of(&self, pos: [f64; 2], t: usize) -> Option<usize> {
        if t >= self.nt {
            return None;
        }
        self.spatial_cell(pos).map(|c| self.state(c, t))
    }
}
