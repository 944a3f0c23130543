//! Cross-checks the sparse builder and the solver against the dense oracle
//! on a handful of random small instances.
//!
//! cargo run --release --example oracle_equivalence [n_seeds]

use oceanmdp::oracle::equivalence;

fn main() -> oceanmdp::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let mut failures = 0;
    for seed in 0..n {
        let r = equivalence(seed)?;
        let ok = r.model_ok() && r.solver_ok();
        failures += !ok as usize;
        println!(
            "seed {seed:3}: model {} solver {}  max|dR| {:.1e}  max|dV| {:.1e}",
            if r.model_ok() { "ok " } else { "BAD" },
            if r.solver_ok() { "ok " } else { "BAD" },
            r.max_reward_diff,
            r.max_value_diff
        );
    }
    println!("{failures} of {n} instances disagree");
    Ok(())
}
