//! Full velocity ensembles and their reduction to mean + modes + coefficients.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::container::{f32_bytes, f32_from_bytes, read_file, write_file};
use crate::environment::{DoVelocityField, GridSpec};
use crate::error::{contract, Error, Result};

const ENSEMBLE_MANIFEST: &str = "ensemble.toml";
const ENSEMBLE_BLOB: &str = "velocity.bin";
const ENSEMBLE_FORMAT: &str = "oceanmdp-ensemble";

/// Every realization stored explicitly, laid out `[r][t][y][x][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEnsemble {
    grid: GridSpec,
    n_realizations: usize,
    data: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleManifest {
    format: String,
    version: u32,
    endianness: String,
    grid: GridSpec,
    n_realizations: usize,
    file: String,
}

impl VelocityEnsemble {
    pub fn new(grid: GridSpec, n_realizations: usize, data: Vec<f32>) -> Result<Self> {
        grid.validate()?;
        if n_realizations == 0 {
            return Err(Error::Config("ensemble needs at least one realization".into()));
        }
        contract!(
            data.len() == 2 * grid.n_states() * n_realizations,
            "ensemble has {} entries, expected {}",
            data.len(),
            2 * grid.n_states() * n_realizations
        );
        contract!(data.iter().all(|v| v.is_finite()), "ensemble contains non-finite values");
        Ok(Self { grid, n_realizations, data })
    }

    /// Expands a reduced field into all its realizations.
    pub fn sample(field: &DoVelocityField) -> Self {
        let grid = *field.grid();
        let nr = field.n_realizations();
        let per_r = 2 * grid.n_states();
        let mut data = vec![0.0f32; per_r * nr];
        data.par_chunks_mut(per_r).enumerate().for_each(|(r, out)| {
            for t in 0..grid.nt {
                for c in 0..grid.n_cells() {
                    let v = field.velocity(c, t, r);
                    let k = 2 * grid.state(c, t);
                    out[k] = v[0] as f32;
                    out[k + 1] = v[1] as f32;
                }
            }
        });
        Self { grid, n_realizations: nr, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_realizations(&self) -> usize {
        self.n_realizations
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Stacked `(u, v)` layer of realization `r` at time `t`.
    pub fn layer(&self, r: usize, t: usize) -> &[f32] {
        let nc2 = 2 * self.grid.n_cells();
        let start = r * 2 * self.grid.n_states() + t * nc2;
        &self.data[start..start + nc2]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = EnsembleManifest {
            format: ENSEMBLE_FORMAT.into(),
            version: 1,
            endianness: "little".into(),
            grid: self.grid,
            n_realizations: self.n_realizations,
            file: ENSEMBLE_BLOB.into(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        write_file(&dir.join(ENSEMBLE_MANIFEST), text.as_bytes())?;
        write_file(&dir.join(ENSEMBLE_BLOB), &f32_bytes(&self.data))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(ENSEMBLE_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: EnsembleManifest = toml::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if m.format != ENSEMBLE_FORMAT || m.version != 1 || m.endianness != "little" {
            return Err(Error::format(&path, format!("unsupported ensemble {} v{}", m.format, m.version)));
        }
        m.grid.validate()?;
        let blob = dir.join(&m.file);
        let data = f32_from_bytes(&blob, &read_file(&blob)?, 2 * m.grid.n_states() * m.n_realizations)?;
        Self::new(m.grid, m.n_realizations, data)
    }
}

/// Per-time-step POD of the ensemble, keeping the `n_modes` leading modes.
///
/// Modes are the leading right singular vectors of the centered snapshot
/// matrix (realizations as rows); coefficients are the projections
/// `U sigma`. Each mode's sign is fixed so that its largest-magnitude entry
/// is positive.
pub fn reduce_order(ensemble: &VelocityEnsemble, n_modes: usize) -> Result<DoVelocityField> {
    let grid = *ensemble.grid();
    let nr = ensemble.n_realizations();
    let nc2 = 2 * grid.n_cells();
    contract!(
        n_modes <= nr.min(nc2),
        "cannot keep {n_modes} modes from {nr} realizations of dimension {nc2}"
    );

    // (mean layer, modes [m][nc2], coeffs [r][m]) per time step
    let per_t: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..grid.nt)
        .into_par_iter()
        .map(|t| {
            let mut mean = vec![0.0f64; nc2];
            for r in 0..nr {
                mean.iter_mut().zip(ensemble.layer(r, t)).for_each(|(m, &v)| *m += v as f64);
            }
            mean.iter_mut().for_each(|m| *m /= nr as f64);
            if n_modes == 0 {
                return (mean, Vec::new(), Vec::new());
            }
            let x = DMatrix::from_fn(nr, nc2, |r, k| ensemble.layer(r, t)[k] as f64 - mean[k]);
            let svd = x.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

            let mut modes = vec![0.0f64; n_modes * nc2];
            let mut coeffs = vec![0.0f64; nr * n_modes];
            for (m, &k) in order.iter().take(n_modes).enumerate() {
                let row = vt.row(k);
                let pivot = row.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
                let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
                for c in 0..nc2 {
                    modes[m * nc2 + c] = sign * row[c];
                }
                let sigma = svd.singular_values[k];
                for r in 0..nr {
                    coeffs[r * n_modes + m] = sign * u[(r, k)] * sigma;
                }
            }
            (mean, modes, coeffs)
        })
        .collect();

    let ng = grid.n_states();
    let mut mean = vec![0.0f32; 2 * ng];
    let mut modes = vec![0.0f32; 2 * ng * n_modes];
    let mut coeffs = Vec::with_capacity(grid.nt * nr * n_modes);
    for (t, (mu, phi, c)) in per_t.into_iter().enumerate() {
        let off = t * nc2;
        mean[off..off + nc2].iter_mut().zip(&mu).for_each(|(d, s)| *d = *s as f32);
        for m in 0..n_modes {
            let dst = 2 * m * ng + off;
            modes[dst..dst + nc2]
                .iter_mut()
                .zip(&phi[m * nc2..(m + 1) * nc2])
                .for_each(|(d, s)| *d = *s as f32);
        }
        coeffs.extend(c.into_iter().map(|v| v as f32));
    }
    DoVelocityField::new(grid, n_modes, nr, mean, modes, coeffs)
}
