use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete headings times discrete nonzero speeds.
///
/// Action index `a = speed_idx * n_headings + heading`. Heading `h` points at
/// angle `2*pi*h/n_headings` from the +x axis; speed index `k` moves at
/// `f_max * (k+1) / n_speeds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpace {
    pub n_headings: usize,
    pub n_speeds: usize,
    pub f_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub heading: usize,
    pub speed_idx: usize,
    pub speed: f64,
    /// Relative velocity `F * (cos theta, sin theta)`.
    pub vector: [f64; 2],
}

impl ActionSpace {
    pub fn new(n_headings: usize, n_speeds: usize, f_max: f64) -> Result<Self> {
        let space = Self {
            n_headings,
            n_speeds,
            f_max,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_headings == 0 || self.n_speeds == 0 {
            return Err(Error::Config("action space needs at least one heading and one speed".into()));
        }
        if !(self.f_max > 0.0 && self.f_max.is_finite()) {
            return Err(Error::Config(format!("f_max must be positive, got {}", self.f_max)));
        }
        if self.len() > u16::MAX as usize {
            return Err(Error::Config(format!(
                "{} actions exceed the 16-bit policy limit",
                self.len()
            )));
        }
        Ok(())
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.n_headings * self.n_speeds
    }

    pub fn action(&self, a: usize) -> Action {
        assert!(a < self.len(), "action {a} out of range");
        let heading = a % self.n_headings;
        let speed_idx = a / self.n_headings;
        let speed = self.f_max * (speed_idx + 1) as f64 / self.n_speeds as f64;
        let theta = 2.0 * PI * heading as f64 / self.n_headings as f64;
        Action {
            heading,
            speed_idx,
            speed,
            vector: [speed * theta.cos(), speed * theta.sin()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.len()).map(|a| self.action(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_and_layout() {
        let s = ActionSpace::new(8, 2, 1.0).unwrap();
        assert_eq!(s.len(), 16);
        let a = s.action(0);
        assert_eq!((a.heading, a.speed_idx), (0, 0));
        assert_eq!(a.speed, 0.5);
        assert_eq!(a.vector, [0.5, 0.0]);
        let b = s.action(8 + 2);
        assert_eq!((b.heading, b.speed_idx, b.speed), (2, 1, 1.0));
        assert!(b.vector[0].abs() < 1e-15 && (b.vector[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_zero_speed_duplicates() {
        let s = ActionSpace::new(4, 3, 3.0).unwrap();
        let speeds: Vec<f64> = s.iter().map(|a| a.speed).collect();
        assert!(speeds.iter().all(|&f| f > 0.0));
        assert_eq!(s.action(s.len() - 1).speed, 3.0);
    }

    #[test]
    fn rejects_empty_spaces() {
        assert!(ActionSpace::new(0, 1, 1.0).is_err());
        assert!(ActionSpace::new(4, 1, 0.0).is_err());
    }
}
