use super::GridSpec;
use crate::error::{contract, Result};

/// Time-dependent restricted cells, `[t][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMask {
    grid: GridSpec,
    cells: Vec<bool>,
    per_layer: Vec<usize>,
    /// Cell-index bounding box `[i_min, i_max, j_min, j_max]` of each
    /// layer's masked cells, as floats for direct comparison.
    bounds: Vec<[f64; 4]>,
}

/// `floor` without a libm call; exact for `|x| < 2^52`, and only used
/// for a conservative prefilter.
#[inline]
fn fast_floor(x: f64) -> f64 {
    let t = x as i64 as f64;
    if t > x {
        t - 1.0
    } else {
        t
    }
}

fn layer_bounds(grid: &GridSpec, layer: &[bool]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for (c, _) in layer.iter().enumerate().filter(|(_, &m)| m) {
        let (i, j) = grid.cell_coords(c);
        b = [b[0].min(i as f64), b[1].max(i as f64), b[2].min(j as f64), b[3].max(j as f64)];
    }
    b
}

impl ObstacleMask {
    pub fn new(grid: GridSpec, cells: Vec<bool>) -> Result<Self> {
        contract!(
            cells.len() == grid.n_states(),
            "obstacle mask has {} entries, expected {}",
            cells.len(),
            grid.n_states()
        );
        let per_layer = cells
            .chunks(grid.n_cells())
            .map(|layer| layer.iter().filter(|&&b| b).count())
            .collect();
        let bounds = cells.chunks(grid.n_cells()).map(|l| layer_bounds(&grid, l)).collect();
        Ok(Self {
            grid,
            cells,
            per_layer,
            bounds,
        })
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            cells: vec![false; grid.n_states()],
            per_layer: vec![0; grid.nt],
            bounds: vec![[f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]; grid.nt],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn is_blocked(&self, cell: usize, t: usize) -> bool {
        self.cells[self.grid.state(cell, t)]
    }

    /// Number of masked cells in layer `t`.
    pub fn count_at(&self, t: usize) -> usize {
        self.per_layer[t]
    }

    /// True iff a sample along the closed segment `[p0, p1]` falls in a cell
    /// masked at time `t`. Samples are evenly spaced at most `dx/2` apart and
    /// include both endpoints; samples outside the domain are ignored.
    pub fn segment_blocked(&self, p0: [f64; 2], p1: [f64; 2], t: usize) -> bool {
        self.segment_blocked_with_spacing(p0, p1, t, 0.5 * self.grid.dx)
    }

    pub(crate) fn segment_blocked_with_spacing(
        &self,
        p0: [f64; 2],
        p1: [f64; 2],
        t: usize,
        spacing: f64,
    ) -> bool {
        if self.per_layer[t] == 0 {
            return false;
        }
        // every sample lies in the segment's bounding box (up to rounding,
        // hence the one-cell margin), so a box that misses the layer's masked
        // cells rules out a hit
        let g = &self.grid;
        let b = &self.bounds[t];
        let ci = |x: f64| fast_floor((x - g.origin[0]) / g.dx);
        let cj = |y: f64| fast_floor((y - g.origin[1]) / g.dx);
        if ci(p0[0].max(p1[0])) + 1.0 < b[0]
            || ci(p0[0].min(p1[0])) - 1.0 > b[1]
            || cj(p0[1].max(p1[1])) + 1.0 < b[2]
            || cj(p0[1].min(p1[1])) - 1.0 > b[3]
        {
            return false;
        }
        let d = [p1[0] - p0[0], p1[1] - p0[1]];
        let len = d[0].hypot(d[1]);
        let n = (len / spacing).ceil().max(1.0) as usize;
        (0..=n).any(|k| {
            let f = k as f64 / n as f64;
            let p = [p0[0] + f * d[0], p0[1] + f * d[1]];
            self.grid
                .spatial_cell(p)
                .is_some_and(|c| self.is_blocked(c, t))
        })
    }
}
