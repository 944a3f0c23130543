use crate::environment::{ActionSpace, DoVelocityField, GridSpec};
use crate::error::{contract, Result};

/// Window of cells around a source that contains every in-domain successor.
///
/// Slots are numbered `(dj + hy) * (2*hx + 1) + (di + hx)`; one extra slot
/// (`out_slot()`) collects sink transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubGridSpec {
    pub half_width_x: usize,
    pub half_width_y: usize,
}

impl SubGridSpec {
    pub fn new(half_width_x: usize, half_width_y: usize) -> Self {
        Self {
            half_width_x,
            half_width_y,
        }
    }

    pub fn side_x(&self) -> usize {
        2 * self.half_width_x + 1
    }

    pub fn side_y(&self) -> usize {
        2 * self.half_width_y + 1
    }

    /// `N_sg`, excluding the out slot.
    pub fn n_slots(&self) -> usize {
        self.side_x() * self.side_y()
    }

    pub fn out_slot(&self) -> usize {
        self.n_slots()
    }

    /// Slots per source state including the out slot.
    pub fn slots_per_state(&self) -> usize {
        self.n_slots() + 1
    }

    #[inline]
    pub fn slot(&self, di: isize, dj: isize) -> Option<usize> {
        let hx = self.half_width_x as isize;
        let hy = self.half_width_y as isize;
        if di.abs() > hx || dj.abs() > hy {
            return None;
        }
        Some(((dj + hy) * self.side_x() as isize + (di + hx)) as usize)
    }

    pub fn displacement(&self, slot: usize) -> (isize, isize) {
        debug_assert!(slot < self.n_slots());
        let di = (slot % self.side_x()) as isize - self.half_width_x as isize;
        let dj = (slot / self.side_x()) as isize - self.half_width_y as isize;
        (di, dj)
    }

    /// Slot of successor cell `to` seen from `from`, `None` when it falls
    /// outside the window.
    #[inline]
    pub fn slot_between(&self, grid: &GridSpec, from: usize, to: usize) -> Option<usize> {
        let (i0, j0) = grid.cell_coords(from);
        let (i1, j1) = grid.cell_coords(to);
        self.slot(i1 as isize - i0 as isize, j1 as isize - j0 as isize)
    }
}

/// Half widths `ceil((max|v_c| + F_max) * dt / dx) + buffer` per axis, with
/// the maximum taken over every state and realization of the field.
pub fn compute_subgrid(field: &DoVelocityField, actions: &ActionSpace, grid: &GridSpec, buffer: usize) -> Result<SubGridSpec> {
    contract!(buffer >= 1, "sub-grid buffer must be at least 1, got {buffer}");
    let vmax = field.max_abs_velocity();
    Ok(subgrid_for_speeds(vmax, actions.f_max, grid, buffer))
}

pub(crate) fn subgrid_for_speeds(vmax: [f64; 2], f_max: f64, grid: &GridSpec, buffer: usize) -> SubGridSpec {
    let half = |v: f64| ((v + f_max) * grid.dt / grid.dx).ceil() as usize + buffer;
    SubGridSpec::new(half(vmax[0]), half(vmax[1]))
}
