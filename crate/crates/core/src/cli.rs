//! Command-line front end. Configuration lives in a TOML file; flags only
//! pick the file, the worker count and the output path.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::environment::container;
use crate::error::{Error, Result};
use crate::model::{self, build_model};
use crate::oracle;
use crate::rollout::{self, ensemble_rollout, EnsembleSummary};
use crate::solver::{self, policy_value, solve};
use crate::synthesis::{reduce_order, VelocityEnsemble};

#[derive(Debug, Parser)]
#[command(name = "oceanmdp", version, about = "Plan paths through stochastic ocean flow with a finite-horizon MDP")]
pub struct Cli {
    /// Worker threads (overrides the config file; 0 = all hardware threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the double-gyre environment container.
    GenerateEnv {
        #[command(flatten)]
        io: IoArgs,
        /// Also write every realization to `paths.ensemble`.
        #[arg(long)]
        with_ensemble: bool,
    },
    /// Reduce a full velocity ensemble to mean, modes and coefficients.
    Reduce(IoArgs),
    /// Build the sparse transition model.
    Build(IoArgs),
    /// Solve the model by value iteration and write the policy.
    Solve(IoArgs),
    /// Roll the policy out over every realization.
    Rollout(IoArgs),
    /// Compare the pipeline against the brute-force oracle and check a model file.
    Verify(IoArgs),
    /// Time model builds across grid sizes and thread counts.
    Bench(IoArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Primary output of the subcommand (directory or file).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn io(&self) -> &IoArgs {
        match self {
            Command::GenerateEnv { io, .. } => io,
            Command::Reduce(io)
            | Command::Build(io)
            | Command::Solve(io)
            | Command::Rollout(io)
            | Command::Verify(io)
            | Command::Bench(io) => io,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Io { .. } => 3,
        Error::Format { .. } | Error::Contract(_) | Error::NotConverged { .. } => 4,
        Error::Verification(_) => 5,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let io = cli.command.io();
    let cfg = RunConfig::load(&io.config)?;
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let out = io.out.as_deref();
    pool.install(|| match &cli.command {
        Command::GenerateEnv { with_ensemble, .. } => generate_env(&cfg, out, *with_ensemble),
        Command::Reduce(_) => reduce(&cfg, out),
        Command::Build(_) => build(&cfg, out),
        Command::Solve(_) => solve_cmd(&cfg, out),
        Command::Rollout(_) => rollout_cmd(&cfg, out),
        Command::Verify(_) => verify(&cfg, out),
        Command::Bench(_) => bench(&cfg, out),
    })
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn generate_env(cfg: &RunConfig, out: Option<&Path>, with_ensemble: bool) -> Result<()> {
    let dir = out.unwrap_or(&cfg.paths.environment);
    let env = cfg.generate_environment()?;
    container::save(&env, dir)?;
    println!(
        "environment {}x{}x{}, {} modes, {} realizations -> {}",
        cfg.grid.nx,
        cfg.grid.ny,
        cfg.grid.nt,
        env.velocity.n_modes(),
        env.n_realizations(),
        dir.display()
    );
    if with_ensemble {
        VelocityEnsemble::sample(&env.velocity).save(&cfg.paths.ensemble)?;
        println!("full ensemble -> {}", cfg.paths.ensemble.display());
    }
    Ok(())
}

fn reduce(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let ensemble = VelocityEnsemble::load(&cfg.paths.ensemble)?;
    if *ensemble.grid() != cfg.grid {
        return Err(Error::Config("ensemble grid does not match the configured grid".into()));
    }
    let n_modes = cfg.reduce.n_modes.unwrap_or(cfg.double_gyre.n_modes);
    let field = reduce_order(&ensemble, n_modes)?;
    let back = VelocityEnsemble::sample(&field);
    let err = ensemble
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    let mut env = cfg.generate_environment()?;
    env.velocity = field;
    let dir = out.unwrap_or(&cfg.paths.environment);
    container::save(&env, dir)?;
    println!("kept {n_modes} modes, max reconstruction error {err:e} -> {}", dir.display());
    Ok(())
}

fn build(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let env = container::load(&cfg.paths.environment)?;
    let problem = cfg.problem(&env)?;
    let sg = cfg.subgrid(&env)?;
    let started = Instant::now();
    let model = build_model(&problem, sg)?;
    let secs = started.elapsed().as_secs_f64();
    let path = out.unwrap_or(&cfg.paths.model);
    ensure_parent(path)?;
    model::io::write(&model, path)?;
    println!(
        "{} objective: {}x{} sub-grid, {} nonzeros, built in {secs:.2}s -> {}",
        cfg.mission.objective.name(),
        sg.side_x(),
        sg.side_y(),
        model.nnz(),
        path.display()
    );
    Ok(())
}

fn solve_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let model = model::io::read(&cfg.paths.model)?;
    let pv = solve(&model, &cfg.solver_config())?;
    let path = out.unwrap_or(&cfg.paths.policy);
    ensure_parent(path)?;
    solver::io::write(&pv, path)?;
    let start = cfg.grid.state(cfg.start_cell(), 0);
    println!(
        "converged in {} iterations (residual {:e}); value at start {:.4} -> {}",
        pv.iterations_run,
        pv.residual,
        pv.values[start],
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RolloutReport<'a> {
    objective: &'a str,
    start: [usize; 2],
    target: [usize; 2],
    /// Exact expected return of the policy from the start state, when the
    /// model file is available.
    policy_value: Option<f64>,
    within_two_standard_errors: Option<bool>,
    summary: &'a EnsembleSummary,
}

fn rollout_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let env = container::load(&cfg.paths.environment)?;
    let problem = cfg.problem(&env)?;
    let policy = solver::io::read(&cfg.paths.policy)?;
    let ens = ensemble_rollout(&problem, &policy.actions, cfg.start_cell())?;

    let value = if cfg.paths.model.exists() {
        let model = model::io::read(&cfg.paths.model)?;
        Some(policy_value(&model, &policy.actions)?[cfg.grid.state(cfg.start_cell(), 0)])
    } else {
        None
    };
    let s = &ens.summary;
    let report = RolloutReport {
        objective: cfg.mission.objective.name(),
        start: cfg.mission.start,
        target: cfg.mission.target,
        policy_value: value,
        within_two_standard_errors: value.map(|v| (s.mean_cumulative_reward - v).abs() <= 2.0 * s.std_error),
        summary: s,
    };
    let dir = out.unwrap_or(&cfg.paths.output);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    rollout::export::write_trajectories(&ens, &dir.join("trajectories.csv"))?;
    let text = toml::to_string(&report).map_err(|e| Error::Contract(e.to_string()))?;
    write_text(&dir.join("summary.toml"), &text)?;
    println!(
        "{} trajectories: {} reached target, {} outbound, {} horizon; mean return {:.4} +- {:.4}{}",
        s.n_trajectories,
        s.status_counts.reached_target,
        s.status_counts.outbound,
        s.status_counts.horizon,
        s.mean_cumulative_reward,
        s.std_error,
        value.map(|v| format!(" (policy value {v:.4})")).unwrap_or_default()
    );
    Ok(())
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: Option<bool>,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: Some(passed),
            detail,
        }
    }

    fn skipped(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: None,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let tag = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

/// Runs every verification check described by `cfg`.
pub fn verification_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let v = cfg.verify;
    let seeds: Vec<u64> = (v.first_seed..v.first_seed + v.oracle_seeds).collect();
    let reports = seeds.iter().map(|&s| oracle::equivalence(s)).collect::<Result<Vec<_>>>()?;
    let bad_model: Vec<u64> = reports.iter().filter(|r| !r.model_ok()).map(|r| r.seed).collect();
    let bad_solver: Vec<u64> = reports.iter().filter(|r| !r.solver_ok()).map(|r| r.seed).collect();
    let max_reward = reports.iter().map(|r| r.max_reward_diff).fold(0.0, f64::max);
    let max_value = reports.iter().map(|r| r.max_value_diff).fold(0.0, f64::max);
    let mut checks = vec![
        Check::new(
            "oracle_model",
            bad_model.is_empty(),
            format!(
                "{} instances, counts exact, max reward gap {max_reward:e}, failing seeds {bad_model:?}",
                seeds.len()
            ),
        ),
        Check::new(
            "oracle_solver",
            bad_solver.is_empty(),
            format!("max value gap {max_value:e}, failing seeds {bad_solver:?}"),
        ),
    ];

    let mut worst = 0.0f64;
    for k in 0..v.theorem_seeds {
        let n = [2, 16, 64][(k % 3) as usize];
        worst = worst.max(oracle::mean_field_gap(v.first_seed + 1000 + k, n)?);
    }
    checks.push(Check::new(
        "mean_field_theorem",
        worst <= 1e-9,
        format!("{} scalar ensembles, max gap {worst:e}", v.theorem_seeds),
    ));

    let path = &cfg.paths.model;
    if !path.exists() {
        checks.push(Check::skipped("model_file", format!("no model at {}", path.display())));
        return Ok(checks);
    }
    match model::io::read(path) {
        Err(e) => checks.push(Check::new("model_file", false, e.to_string())),
        Ok(m) => {
            match m.check(1e-9) {
                Ok(()) => checks.push(Check::new("model_invariants", true, format!("{} nonzeros", m.nnz()))),
                Err(name) => checks.push(Check::new("model_invariants", false, name)),
            }
            let mut sc = cfg.solver_config();
            sc.max_iterations = sc.max_iterations.max(m.nt() + 2);
            match solver::value_iteration(&m, &sc) {
                Ok(pv) => checks.push(Check::new(
                    "dag_convergence",
                    pv.iterations_run <= m.nt() + 1 && pv.residual == 0.0,
                    format!("{} iterations, residual {:e}", pv.iterations_run, pv.residual),
                )),
                Err(e) => checks.push(Check::new("dag_convergence", false, e.to_string())),
            }
        }
    }
    Ok(checks)
}

fn verify(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let checks = verification_checks(cfg)?;
    let mut report = String::new();
    for c in &checks {
        let _ = writeln!(report, "{}", c.line());
    }
    print!("{report}");
    if let Some(path) = out {
        write_text(path, &report)?;
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.passed == Some(false))
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

/// One timing row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_realizations: usize,
    pub threads: usize,
    pub build_seconds: f64,
    pub nnz: usize,
}

/// Times `build_model` for every configured size and thread count.
pub fn bench_rows(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    let sizes = if cfg.bench.sizes.is_empty() {
        vec![[cfg.grid.nx, cfg.grid.ny, cfg.grid.nt]]
    } else {
        cfg.bench.sizes.clone()
    };
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = if cfg.bench.threads.is_empty() {
        let mut t = vec![1, hw];
        t.dedup();
        t
    } else {
        cfg.bench.threads.clone()
    };
    let mut rows = Vec::new();
    for [nx, ny, nt] in sizes {
        let c = cfg.resized(nx, ny, nt)?;
        let env = c.generate_environment()?;
        let problem = c.problem(&env)?;
        let sg = c.subgrid(&env)?;
        for &n in &threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            let started = Instant::now();
            let model = pool.install(|| build_model(&problem, sg))?;
            rows.push(BenchRow {
                nx,
                ny,
                nt,
                n_states: c.grid.n_states(),
                n_actions: c.actions.len(),
                n_realizations: env.n_realizations(),
                threads: pool.current_num_threads(),
                build_seconds: started.elapsed().as_secs_f64(),
                nnz: model.nnz(),
            });
        }
    }
    Ok(rows)
}

fn bench(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let rows = bench_rows(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Contract(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    print!("{text}");
    let default = cfg.paths.output.join("bench.csv");
    write_text(out.unwrap_or(&default), &text)
}
