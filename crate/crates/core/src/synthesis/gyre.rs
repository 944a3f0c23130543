//! Analytic stochastic double-gyre in reduced-order form.
//!
//! Mean: the classic time-periodic double gyre on the normalized box
//! `[0, 2] x [0, 1]`,
//!
//! ```text
//! psi = A sin(pi f(x, t)) sin(pi y),  f = a x^2 + b x,
//! a = delta sin(omega t),  b = 1 - 2a
//! u = -pi A sin(pi f) cos(pi y),  v = pi A cos(pi f) sin(pi y) df/dx
//! ```
//!
//! with `delta = 0.1` and one oscillation over the planning horizon, so the
//! peak mean speed is about `pi * A` (grid length units per unit time).
//!
//! Modes: velocity fields of standing-wave streamfunctions
//! `sin(k pi x / 2 + phase) sin(l pi y)` whose phase drifts with time,
//! orthonormalized at every time step over the stacked `(u, v)` grid vector.
//!
//! Coefficients: for mode `m` the samples are
//! `eps * sqrt(2 N_c) / (m + 1) * z`, `z` drawn from the skewed two-component
//! Gaussian mixture `0.75 N(-0.5, 0.5^2) + 0.25 N(1.5, 0.5^2)` (zero mean,
//! unit variance), then centered across realizations. The RMS velocity
//! perturbation of mode `m` is therefore close to `eps / (m + 1)` per
//! component. Each time step draws from its own ChaCha stream.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{DoVelocityField, GridSpec};
use crate::error::{Error, Result};

const GYRE_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleGyreConfig {
    pub amplitude: f64,
    pub eps: f64,
    pub n_modes: usize,
    pub n_realizations: usize,
    pub rng_seed: u64,
}

impl DoubleGyreConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        grid.validate()?;
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be nonnegative, got {}", self.eps)));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be positive".into()));
        }
        if self.n_modes > 2 * grid.n_cells() {
            return Err(Error::Config(format!(
                "{} modes cannot be orthonormal on {} cells",
                self.n_modes,
                grid.n_cells()
            )));
        }
        Ok(())
    }
}

/// Normalized coordinates of a cell center: `x in [0, 2]`, `y in [0, 1]`.
fn unit_coords(grid: &GridSpec, cell: usize) -> (f64, f64) {
    let (i, j) = grid.cell_coords(cell);
    (
        2.0 * (i as f64 + 0.5) / grid.nx as f64,
        (j as f64 + 0.5) / grid.ny as f64,
    )
}

fn mean_velocity(amplitude: f64, x: f64, y: f64, phase: f64) -> [f64; 2] {
    let a = GYRE_DELTA * phase.sin();
    let b = 1.0 - 2.0 * a;
    let f = a * x * x + b * x;
    let dfdx = 2.0 * a * x + b;
    [
        -PI * amplitude * (PI * f).sin() * (PI * y).cos(),
        PI * amplitude * (PI * f).cos() * (PI * y).sin() * dfdx,
    ]
}

/// Wavenumber pairs ordered by total wavenumber, then by `k`.
fn wavenumbers(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let mut total = 2;
    while out.len() < n {
        for k in 1..total {
            if out.len() < n {
                out.push((k as f64, (total - k) as f64));
            }
        }
        total += 1;
    }
    out
}

fn raw_mode(k: f64, l: f64, phase: f64, x: f64, y: f64) -> [f64; 2] {
    // u = -d(phi)/dy, v = d(phi)/dx for phi = sin(k pi x / 2 + phase) sin(l pi y)
    let sx = (k * PI * x / 2.0 + phase).sin();
    let cx = (k * PI * x / 2.0 + phase).cos();
    [
        -sx * l * PI * (l * PI * y).cos(),
        cx * (k * PI / 2.0) * (l * PI * y).sin(),
    ]
}

/// Orthonormal modes for one time step, stacked `[m][cell][component]`.
fn modes_at(grid: &GridSpec, n_modes: usize, t: usize, seed: u64) -> Vec<f64> {
    let nc = grid.n_cells();
    let len = 2 * nc;
    let waves = wavenumbers(n_modes);
    let tau = t as f64 / grid.nt as f64;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
    let mut fallback = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_6465);
    fallback.set_stream(t as u64);
    for (m, &(k, l)) in waves.iter().enumerate() {
        let phase = PI * (m + 1) as f64 * tau;
        let mut v: Vec<f64> = (0..nc)
            .flat_map(|c| {
                let (x, y) = unit_coords(grid, c);
                raw_mode(k, l, phase, x, y)
            })
            .collect();
        // modified Gram-Schmidt, twice for stability; random restart if the
        // analytic shape is (numerically) dependent on earlier modes
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for b in &basis {
                    let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "could not complete an orthonormal mode basis");
            v = (0..len).map(|_| fallback.random_range(-1.0..1.0)).collect();
        }
        basis.push(v);
    }
    basis.concat()
}

fn mixture_sample(rng: &mut ChaCha8Rng) -> f64 {
    let low = Normal::new(-0.5, 0.5).unwrap();
    let high = Normal::new(1.5, 0.5).unwrap();
    if rng.random::<f64>() < 0.75 {
        low.sample(rng)
    } else {
        high.sample(rng)
    }
}

pub fn generate_double_gyre(grid: &GridSpec, cfg: &DoubleGyreConfig) -> Result<DoVelocityField> {
    cfg.validate(grid)?;
    let nc = grid.n_cells();
    let nt = grid.nt;
    let nm = cfg.n_modes;
    let nr = cfg.n_realizations;
    let omega = 2.0 * PI / nt as f64;

    let mut mean = vec![0.0f32; 2 * nc * nt];
    mean.par_chunks_mut(2 * nc).enumerate().for_each(|(t, layer)| {
        for c in 0..nc {
            let (x, y) = unit_coords(grid, c);
            let v = mean_velocity(cfg.amplitude, x, y, omega * t as f64);
            layer[2 * c] = v[0] as f32;
            layer[2 * c + 1] = v[1] as f32;
        }
    });

    // per time step: modes [m][cell][comp] and coefficients [r][m]
    let per_t: Vec<(Vec<f64>, Vec<f32>)> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let modes = modes_at(grid, nm, t, cfg.rng_seed);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(t as u64);
            let mut coeffs = vec![0.0f64; nr * nm];
            if cfg.eps > 0.0 {
                for r in 0..nr {
                    for m in 0..nm {
                        coeffs[r * nm + m] = mixture_sample(&mut rng);
                    }
                }
                for m in 0..nm {
                    let scale = cfg.eps * ((2 * nc) as f64).sqrt() / (m + 1) as f64;
                    let mu = (0..nr).map(|r| coeffs[r * nm + m]).sum::<f64>() / nr as f64;
                    for r in 0..nr {
                        coeffs[r * nm + m] = scale * (coeffs[r * nm + m] - mu);
                    }
                }
            }
            (modes, coeffs.into_iter().map(|c| c as f32).collect())
        })
        .collect();

    let ng = grid.n_states();
    let mut modes = vec![0.0f32; 2 * ng * nm];
    let mut coeffs = Vec::with_capacity(nt * nr * nm);
    for (t, (m_t, c_t)) in per_t.into_iter().enumerate() {
        for m in 0..nm {
            let dst = 2 * (m * ng + t * nc);
            let src = &m_t[m * 2 * nc..(m + 1) * 2 * nc];
            modes[dst..dst + 2 * nc]
                .iter_mut()
                .zip(src)
                .for_each(|(d, s)| *d = *s as f32);
        }
        coeffs.extend(c_t);
    }
    DoVelocityField::new(*grid, nm, nr, mean, modes, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64) -> DoubleGyreConfig {
        DoubleGyreConfig {
            amplitude: 0.2,
            eps,
            n_modes: 4,
            n_realizations: 200,
            rng_seed: 9,
        }
    }

    #[test]
    fn zero_eps_is_deterministic() {
        let g = GridSpec::unit(12, 10, 4).unwrap();
        let f = generate_double_gyre(&g, &cfg(0.0)).unwrap();
        assert!(f.coeffs().iter().all(|&c| c == 0.0));
        for r in [0, 57, 199] {
            assert_eq!(f.velocity(17, 2, r), f.mean_at(17, 2));
        }
    }

    #[test]
    fn modes_are_orthonormal_per_time() {
        let g = GridSpec::unit(12, 10, 4).unwrap();
        let f = generate_double_gyre(&g, &cfg(0.1)).unwrap();
        for t in 0..g.nt {
            for a in 0..4 {
                for b in 0..4 {
                    let dot: f64 = (0..g.n_cells())
                        .map(|c| {
                            let (u, v) = (f.mode_at(a, c, t), f.mode_at(b, c, t));
                            u[0] * v[0] + u[1] * v[1]
                        })
                        .sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-6, "t={t} <{a},{b}> = {dot}");
                }
            }
        }
    }

    #[test]
    fn coefficients_have_zero_sample_mean() {
        let g = GridSpec::unit(12, 10, 4).unwrap();
        let c = cfg(0.3);
        let f = generate_double_gyre(&g, &c).unwrap();
        for t in 0..g.nt {
            for m in 0..c.n_modes {
                let xs: Vec<f64> = (0..c.n_realizations).map(|r| f.coeff(t, r, m)).collect();
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "t={t} m={m} mean={mean} sd={sd}");
                // mixture is skewed to the right
                let skew = xs.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / n;
                assert!(skew > 0.3, "t={t} m={m} skew={skew}");
            }
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let g = GridSpec::unit(8, 8, 3).unwrap();
        let a = generate_double_gyre(&g, &cfg(0.2)).unwrap();
        let b = generate_double_gyre(&g, &cfg(0.2)).unwrap();
        assert_eq!(a, b);
        let c = generate_double_gyre(&g, &DoubleGyreConfig { rng_seed: 10, ..cfg(0.2) }).unwrap();
        assert_ne!(a.coeffs(), c.coeffs());
    }

    #[test]
    fn mean_peak_speed_scales_with_amplitude() {
        let g = GridSpec::unit(40, 20, 2).unwrap();
        let f = generate_double_gyre(&g, &cfg(0.0)).unwrap();
        let vmax = f.max_abs_velocity();
        assert!(vmax[0] <= PI * 0.2 + 1e-6 && vmax[0] > 0.5);
        assert!(f.mean().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tiny_grids_still_get_a_full_basis() {
        let g = GridSpec::unit(2, 1, 2).unwrap();
        let c = DoubleGyreConfig { n_modes: 4, ..cfg(0.1) };
        let f = generate_double_gyre(&g, &c).unwrap();
        assert_eq!(f.n_modes(), 4);
        let too_many = DoubleGyreConfig { n_modes: 5, ..cfg(0.1) };
        assert!(generate_double_gyre(&g, &too_many).is_err());
    }
}
