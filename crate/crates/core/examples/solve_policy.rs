//! Solves the smoke mission under each objective and prints the value of
//! the start state and the first action taken there.
//!
//! cargo run --release --example solve_policy

use oceanmdp::config::RunConfig;
use oceanmdp::model::{build_model, Objective};
use oceanmdp::solver::solve;

fn main() -> oceanmdp::Result<()> {
    let base = RunConfig::from_toml(include_str!("../configs/smoke.toml"))?;
    let env = base.generate_environment()?;
    for objective in [Objective::Time, Objective::Energy, Objective::NetEnergy] {
        let cfg = base.with_objective(objective);
        let problem = cfg.problem(&env)?;
        let model = build_model(&problem, cfg.subgrid(&env)?)?;
        let pv = solve(&model, &cfg.solver_config())?;
        let s0 = cfg.start_cell();
        let a = problem.action(pv.actions[s0] as usize);
        println!(
            "{:<10} V(start) = {:9.4}  first action heading {} speed {}  ({} sweeps)",
            objective.name(),
            pv.values[s0],
            a.heading,
            a.speed_idx,
            pv.iterations_run
        );
    }
    Ok(())
}
