//! Rolls the optimal policy out over every flow realization and compares
//! the Monte Carlo mean reward with the planned value.
//!
//! cargo run --release --example rollout_ensemble

use oceanmdp::config::RunConfig;
use oceanmdp::model::build_model;
use oceanmdp::rollout::{ensemble_rollout, export};
use oceanmdp::solver::solve;

fn main() -> oceanmdp::Result<()> {
    let cfg = RunConfig::from_toml(include_str!("../configs/smoke.toml"))?;
    let env = cfg.generate_environment()?;
    let problem = cfg.problem(&env)?;
    let model = build_model(&problem, cfg.subgrid(&env)?)?;
    let pv = solve(&model, &cfg.solver_config())?;

    let start = cfg.start_cell();
    let ens = ensemble_rollout(&problem, &pv.actions, start)?;
    let s = &ens.summary;
    println!("planned value      {:.4}", pv.values[start]);
    println!("rollout mean +- SE {:.4} +- {:.4}", s.mean_cumulative_reward, s.std_error);
    println!(
        "reached {} / outbound {} / horizon {}",
        s.status_counts.reached_target, s.status_counts.outbound, s.status_counts.horizon
    );
    if let Some(arr) = &s.arrival_time {
        println!("arrival time mean {:.2}, median {:.2}", arr.mean, arr.quantiles.p50);
    }

    let path = std::env::temp_dir().join("oceanmdp-example-trajectories.csv");
    export::write_trajectories(&ens, &path)?;
    println!("trajectories written to {}", path.display());
    Ok(())
}
