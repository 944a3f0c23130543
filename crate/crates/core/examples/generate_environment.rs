//! Synthesizes the smoke-scale double gyre, radiation field and obstacle,
//! writes the container to a temporary directory and reads it back.
//!
//! cargo run --release --example generate_environment

use oceanmdp::config::RunConfig;
use oceanmdp::environment::container;

fn main() -> oceanmdp::Result<()> {
    let cfg = RunConfig::from_toml(include_str!("../configs/smoke.toml"))?;
    let env = cfg.generate_environment()?;
    let g = env.grid();
    println!("grid {}x{}x{}, {} realizations, {} modes", g.nx, g.ny, g.nt, env.n_realizations(), env.velocity.n_modes());

    let [umax, vmax] = env.velocity.max_abs_velocity();
    println!("max |u| = {umax:.3}, max |v| = {vmax:.3}");
    for t in [0, g.nt / 2, g.nt - 1] {
        println!("t={t:2}: {} masked cells", env.obstacles.count_at(t));
    }

    let fp = env.velocity.storage_footprint();
    println!(
        "f32 storage: reduced {} bytes, full ensemble {} bytes",
        fp.reduced_bytes_f32(),
        fp.full_bytes_f32()
    );

    let dir = std::env::temp_dir().join("oceanmdp-example-env");
    container::save(&env, &dir)?;
    let back = container::load(&dir)?;
    assert_eq!(back.velocity.coeffs(), env.velocity.coeffs());
    println!("round trip through {} ok", dir.display());
    Ok(())
}
