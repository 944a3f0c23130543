//! Expands a reduced field into a full velocity ensemble, then compresses it
//! again with an SVD at increasing mode counts.
//!
//! cargo run --release --example reduce_ensemble

use oceanmdp::config::RunConfig;
use oceanmdp::synthesis::{reduce_order, VelocityEnsemble};

fn main() -> oceanmdp::Result<()> {
    let cfg = RunConfig::from_toml(include_str!("../configs/smoke.toml"))?;
    let env = cfg.generate_environment()?;
    let ensemble = VelocityEnsemble::sample(&env.velocity);
    let g = *ensemble.grid();

    for k in 0..=cfg.double_gyre.n_modes + 1 {
        let field = reduce_order(&ensemble, k)?;
        let mut worst = 0.0f64;
        for r in 0..ensemble.n_realizations() {
            for t in 0..g.nt {
                let layer = ensemble.layer(r, t);
                for cell in 0..g.n_cells() {
                    let v = field.velocity(cell, t, r);
                    worst = worst
                        .max((v[0] - layer[2 * cell] as f64).abs())
                        .max((v[1] - layer[2 * cell + 1] as f64).abs());
                }
            }
        }
        println!("{k} modes: max reconstruction error {worst:.3e}");
    }
    Ok(())
}
