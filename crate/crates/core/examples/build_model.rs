//! Builds the sparse transition model for the smoke configuration and
//! reports its size and structural invariants.
//!
//! cargo run --release --example build_model

use oceanmdp::config::RunConfig;
use oceanmdp::model::build_model;

fn main() -> oceanmdp::Result<()> {
    let cfg = RunConfig::from_toml(include_str!("../configs/smoke.toml"))?;
    let env = cfg.generate_environment()?;
    let problem = cfg.problem(&env)?;
    let sub = cfg.subgrid(&env)?;
    println!("sub-grid {}x{} (+1 out slot)", sub.side_x(), sub.side_y());

    let started = std::time::Instant::now();
    let model = build_model(&problem, sub)?;
    println!(
        "{} states, {} actions, {} nonzeros, built in {:.3}s",
        model.n_states(),
        model.n_actions(),
        model.nnz(),
        started.elapsed().as_secs_f64()
    );
    let dense = model.n_actions() * model.nt() * model.n_cells() * model.n_states();
    println!("density {:.4}%", 100.0 * model.nnz() as f64 / dense as f64);

    match model.check(1e-9) {
        Ok(()) => println!("rows sum to one, sink absorbing"),
        Err(e) => println!("invariant broken: {e}"),
    }
    Ok(())
}
