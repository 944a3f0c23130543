//! Times the model build at the configured sizes and thread counts, the
//! same rows the `bench` subcommand writes.
//!
//! cargo run --release --example thread_scaling

use oceanmdp::cli::bench_rows;
use oceanmdp::config::RunConfig;

fn main() -> oceanmdp::Result<()> {
    let mut cfg = RunConfig::from_toml(include_str!("../configs/smoke.toml"))?;
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    cfg.bench.threads = vec![1, 2, hw.max(4)];
    println!("{hw} hardware threads");
    println!("{:>10} {:>8} {:>8} {:>10} {:>10}", "size", "states", "threads", "seconds", "nnz");
    for row in bench_rows(&cfg)? {
        println!(
            "{:>10} {:>8} {:>8} {:>10.4} {:>10}",
            format!("{}x{}x{}", row.nx, row.ny, row.nt),
            row.n_states,
            row.threads,
            row.build_seconds,
            row.nnz
        );
    }
    Ok(())
}
