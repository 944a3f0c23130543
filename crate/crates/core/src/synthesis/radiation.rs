use serde::{Deserialize, Serialize};

use crate::environment::{GridSpec, ScalarMeanField};
use crate::error::{Error, Result};

/// Depth of the cloud shadow relative to the base level.
const SHADOW: f64 = 0.8;

/// Solar radiation under a westward-drifting cloud band.
///
/// `g(x, t) = base * (1 - 0.8 exp(-(x - c(t))^2 / (2 w^2)))` with `x` the cell
/// center column in cell units and `c(t) = 0.75 nx - speed * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiationConfig {
    pub base_level: f64,
    /// Cells per time step, toward the west.
    pub cloud_speed: f64,
    /// Cells.
    pub cloud_width: f64,
}

impl RadiationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_level >= 0.0 && self.base_level.is_finite()) {
            return Err(Error::Config(format!("base_level must be >= 0, got {}", self.base_level)));
        }
        if !(self.cloud_width > 0.0 && self.cloud_width.is_finite()) {
            return Err(Error::Config(format!("cloud_width must be positive, got {}", self.cloud_width)));
        }
        if !self.cloud_speed.is_finite() {
            return Err(Error::Config("cloud_speed must be finite".into()));
        }
        Ok(())
    }

    fn value(&self, column: f64, t: f64, nx: usize) -> f64 {
        let center = 0.75 * nx as f64 - self.cloud_speed * t;
        let d = column - center;
        self.base_level * (1.0 - SHADOW * (-d * d / (2.0 * self.cloud_width * self.cloud_width)).exp())
    }
}

pub fn generate_radiation(grid: &GridSpec, cfg: &RadiationConfig) -> Result<ScalarMeanField> {
    cfg.validate()?;
    let mut values = Vec::with_capacity(grid.n_states());
    for t in 0..grid.nt {
        for _j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(cfg.value(i as f64 + 0.5, t as f64, grid.nx) as f32);
            }
        }
    }
    ScalarMeanField::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(speed: f64) -> RadiationConfig {
        RadiationConfig {
            base_level: 2.0,
            cloud_speed: speed,
            cloud_width: 4.0,
        }
    }

    #[test]
    fn still_clouds_do_not_change() {
        let g = GridSpec::unit(20, 5, 4).unwrap();
        let f = generate_radiation(&g, &cfg(0.0)).unwrap();
        for t in 1..g.nt {
            assert_eq!(f.layer(t), f.layer(0));
        }
    }

    #[test]
    fn nonnegative_and_bounded() {
        let g = GridSpec::unit(20, 5, 30).unwrap();
        let f = generate_radiation(&g, &cfg(1.3)).unwrap();
        assert!(f.values().iter().all(|&v| (0.0..=2.0).contains(&v)));
        assert!(f.values().iter().any(|&v| v < 1.0));
    }

    #[test]
    fn translates_westward() {
        // g(x, t+1) against the t snapshot linearly interpolated at x + speed
        let g = GridSpec::unit(40, 3, 6).unwrap();
        for speed in [1.0, 0.4, 2.5] {
            let f = generate_radiation(&g, &cfg(speed)).unwrap();
            for t in 0..g.nt - 1 {
                let snap = f.layer(t);
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        let x = i as f64 + speed;
                        let lo = x.floor() as usize;
                        if lo + 1 >= g.nx {
                            continue;
                        }
                        let w = x - lo as f64;
                        let row = &snap[j * g.nx..(j + 1) * g.nx];
                        let interp = (1.0 - w) * row[lo] as f64 + w * row[lo + 1] as f64;
                        let got = f.at(g.cell(i, j), t + 1);
                        // second-order interpolation error for a Gaussian of width 4
                        assert!((got - interp).abs() < 0.03, "speed {speed} t {t} i {i}: {got} vs {interp}");
                    }
                }
            }
        }
    }
}
