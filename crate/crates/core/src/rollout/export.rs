//! Trajectory CSV and summary export.

use std::path::Path;

use serde::Serialize;

use super::TrajectoryEnsemble;
use crate::environment::container::write_file;
use crate::error::{Error, Result};

#[derive(Serialize)]
struct Row<'a> {
    realization: usize,
    step: usize,
    t: usize,
    x: f64,
    y: f64,
    action: u16,
    reward: f64,
    cum_reward: f64,
    /// `en_route` except on a trajectory's final row.
    status: &'a str,
}

/// CSV with columns `realization,step,t,x,y,action,reward,cum_reward,status`.
pub fn trajectories_csv(ensemble: &TrajectoryEnsemble) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for tr in &ensemble.trajectories {
        let mut cum = 0.0;
        let last = tr.steps.len() - 1;
        for (k, s) in tr.steps.iter().enumerate() {
            cum += s.reward;
            w.serialize(Row {
                realization: tr.realization,
                step: k,
                t: s.t,
                x: s.position[0],
                y: s.position[1],
                action: s.action,
                reward: s.reward,
                cum_reward: cum,
                status: if k == last { tr.status.name() } else { "en_route" },
            })
            .map_err(|e| Error::Contract(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| Error::Contract(e.to_string()))
}

pub fn summary_toml(ensemble: &TrajectoryEnsemble) -> Result<String> {
    toml::to_string(&ensemble.summary).map_err(|e| Error::Contract(e.to_string()))
}

pub fn write_trajectories(ensemble: &TrajectoryEnsemble, path: &Path) -> Result<()> {
    write_file(path, &trajectories_csv(ensemble)?)
}

pub fn write_summary(ensemble: &TrajectoryEnsemble, path: &Path) -> Result<()> {
    write_file(path, summary_toml(ensemble)?.as_bytes())
}
