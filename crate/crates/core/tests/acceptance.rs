//! Acceptance run: one PASS / FAIL / NOT EVALUATED line per criterion.
//!
//! Desk-scale models are built once per objective and shared between the
//! criteria that need them. Exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use oceanmdp::config::RunConfig;
use oceanmdp::environment::{Environment, StorageFootprint};
use oceanmdp::model::{self, build_model, build_model_with, Objective, Outcome};
use oceanmdp::oracle::{self, EquivalenceReport};
use oceanmdp::rollout::{avoidable_obstacle_hits, ensemble_rollout, export, TerminalStatus};
use oceanmdp::solver::{self, policy_value, solve};

const ORACLE_SEEDS: u64 = 24;
const THEOREM_SEEDS: u64 = 12;

enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

#[derive(Default)]
struct Tally {
    failed: Vec<u32>,
}

impl Tally {
    fn record(&mut self, id: u32, name: &str, verdict: Verdict, detail: String) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                self.failed.push(id);
                "FAIL"
            }
            Verdict::NotEvaluated => "NOT EVALUATED",
        };
        println!("{tag} [{id}] {name}: {detail}");
    }

    fn check(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        self.record(id, name, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn oracle_criteria(tally: &mut Tally) {
    let started = Instant::now();
    let reports: Vec<EquivalenceReport> = (0..ORACLE_SEEDS)
        .map(|s| oracle::equivalence(s).expect("oracle comparison runs"))
        .collect();
    let secs = started.elapsed().as_secs_f64();

    let bad: Vec<u64> = reports.iter().filter(|r| !r.model_ok()).map(|r| r.seed).collect();
    let reward_gap = reports.iter().map(|r| r.max_reward_diff).fold(0.0, f64::max);
    let largest = reports.iter().map(|r| r.n_cells).max().unwrap_or(0);
    tally.check(
        1,
        "oracle equivalence (model)",
        bad.is_empty() && secs < 60.0 && reports.iter().all(|r| r.n_cells <= 64 && r.n_actions <= 16),
        format!(
            "{ORACLE_SEEDS} instances (up to {largest} cells), counts exact on all but {bad:?}, \
             max reward gap {reward_gap:e} (tol 1e-12), {secs:.1} s (limit 60 s)"
        ),
    );

    let bad: Vec<u64> = reports.iter().filter(|r| !r.solver_ok()).map(|r| r.seed).collect();
    let value_gap = reports.iter().map(|r| r.max_value_diff).fold(0.0, f64::max);
    let mismatches: usize = reports.iter().map(|r| r.policy_mismatches).sum();
    tally.check(
        2,
        "oracle equivalence (solver)",
        bad.is_empty(),
        format!("max value gap {value_gap:e} (tol 1e-9), {mismatches} non-maximizing actions, failing seeds {bad:?}"),
    );

    let mut worst = 0.0f64;
    for k in 0..THEOREM_SEEDS {
        let n = [2, 16, 64][(k % 3) as usize];
        worst = worst.max(oracle::mean_field_gap(500 + k, n).expect("theorem check runs"));
    }
    tally.check(
        3,
        "mean-field net-energy reward",
        worst <= 1e-9,
        format!("{THEOREM_SEEDS} scalar ensembles with 2/16/64 samples, max gap {worst:e} (tol 1e-9)"),
    );

    let dag_ok = reports.iter().all(|r| r.iterations_run <= r.nt + 1);
    tally.check(
        5,
        "DAG convergence",
        dag_ok,
        format!("{ORACLE_SEEDS} random models: every solve within nt+1 iterations (desk models below)"),
    );
}

fn memory_criterion(tally: &mut Tally) {
    let f = StorageFootprint::for_dims(100u64.pow(3), 10, 1000, 100);
    let full_ok = f.full_scalars == 2_000_000_000 && f.full_bytes_f32() == 8_000_000_000;
    let reduced_ok = (f.reduced_scalars as f64 / 2.3e7 - 1.0).abs() <= 0.05 && f.reduced_bytes_f32() <= 96_000_000;
    tally.check(
        8,
        "storage footprint arithmetic",
        full_ok && reduced_ok,
        format!(
            "full {} scalars ({} B), reduced {} scalars ({} B)",
            f.full_scalars,
            f.full_bytes_f32(),
            f.reduced_scalars,
            f.reduced_bytes_f32()
        ),
    );
}

/// Everything the desk-scale criteria need from one objective.
struct DeskRun {
    objective: Objective,
    build_seconds: f64,
    conservation_violations: usize,
    max_row_error: f64,
    invariants: Result<(), String>,
    iterations: usize,
    residual: f64,
    nt: usize,
    rollout_mean: f64,
    std_error: f64,
    value: f64,
    reached: usize,
    n: usize,
    avoidable_hits: usize,
    obstacle_hits: usize,
    max_speed_fraction: f64,
    min_speed_fraction: f64,
}

fn desk_run(cfg: &RunConfig, env: &Environment, objective: Objective) -> DeskRun {
    let cfg = cfg.with_objective(objective);
    let p = cfg.problem(env).unwrap();
    let sg = cfg.subgrid(env).unwrap();
    let nr = p.n_realizations() as u32;

    let mut violations = 0usize;
    let started = Instant::now();
    let m = build_model_with(&p, sg, |_, acc| {
        violations += (0..cfg.grid.n_cells())
            .filter(|&c| acc.counts(c).iter().sum::<u32>() != nr)
            .count();
    })
    .unwrap();
    let build_seconds = started.elapsed().as_secs_f64();

    let max_row_error = (0..m.n_actions())
        .flat_map(|a| (0..m.nt()).map(move |t| (a, t)))
        .flat_map(|(a, t)| m.block(a, t).row_sums().into_iter().map(|(_, s)| (s - 1.0).abs()))
        .fold(0.0, f64::max);

    let pv = solve(&m, &cfg.solver_config()).unwrap();
    let start = cfg.grid.state(cfg.start_cell(), 0);
    let value = policy_value(&m, &pv.actions).unwrap()[start];
    let ens = ensemble_rollout(&p, &pv.actions, cfg.start_cell()).unwrap();
    let s = &ens.summary;
    let obstacle_hits = ens
        .trajectories
        .iter()
        .filter(|t| t.last_step().outcome.hits_obstacle() || t.last_step().outcome == Outcome::FromObstacle)
        .count();

    DeskRun {
        objective,
        build_seconds,
        conservation_violations: violations,
        max_row_error,
        invariants: m.check(1e-9),
        iterations: pv.iterations_run,
        residual: pv.residual,
        nt: cfg.grid.nt,
        rollout_mean: s.mean_cumulative_reward,
        std_error: s.std_error,
        value,
        reached: ens.trajectories.iter().filter(|t| t.status == TerminalStatus::ReachedTarget).count(),
        n: ens.trajectories.len(),
        avoidable_hits: avoidable_obstacle_hits(&p, &ens).len(),
        obstacle_hits,
        max_speed_fraction: ens.speed_fraction(&p, cfg.actions.n_speeds - 1),
        min_speed_fraction: ens.speed_fraction(&p, 0),
    }
}

fn desk_criteria(tally: &mut Tally) {
    let cfg = config("desk.toml");
    let env = cfg.generate_environment().unwrap();
    let runs: Vec<DeskRun> = Objective::ALL.iter().map(|&o| desk_run(&cfg, &env, o)).collect();
    let g = cfg.grid;
    let shape = format!(
        "{}x{}x{}, {} actions, {} realizations",
        g.nx,
        g.ny,
        g.nt,
        cfg.actions.len(),
        env.n_realizations()
    );

    let conserved = runs.iter().all(|r| r.conservation_violations == 0);
    let row_err = runs.iter().map(|r| r.max_row_error).fold(0.0, f64::max);
    let inv: Vec<String> = runs.iter().filter_map(|r| r.invariants.clone().err()).collect();
    tally.check(
        4,
        "normalization and conservation",
        conserved && row_err <= 1e-9 && inv.is_empty(),
        format!(
            "desk {shape}: slot-count violations {:?}, max |row sum - 1| {row_err:e}, broken invariants {inv:?}",
            runs.iter().map(|r| r.conservation_violations).collect::<Vec<_>>()
        ),
    );

    let dag = runs.iter().all(|r| r.iterations <= r.nt + 1 && r.residual == 0.0);
    tally.check(
        5,
        "DAG convergence (desk)",
        dag,
        runs.iter()
            .map(|r| format!("{}: {} iterations, residual {:e}", r.objective.name(), r.iterations, r.residual))
            .collect::<Vec<_>>()
            .join("; "),
    );

    let agree = runs.iter().all(|r| (r.rollout_mean - r.value).abs() <= 2.0 * r.std_error);
    tally.check(
        6,
        "value/rollout agreement",
        agree,
        runs.iter()
            .map(|r| {
                format!(
                    "{}: |{:.4} - {:.4}| = {:.4} vs 2 SE = {:.4}",
                    r.objective.name(),
                    r.rollout_mean,
                    r.value,
                    (r.rollout_mean - r.value).abs(),
                    2.0 * r.std_error
                )
            })
            .collect::<Vec<_>>()
            .join("; "),
    );

    // builds above ran on the default pool, i.e. every hardware thread
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let build_max = runs.iter().map(|r| r.build_seconds).fold(0.0, f64::max);
    if hw >= 4 {
        let time_cfg = cfg.with_objective(Objective::Time);
        let p = time_cfg.problem(&env).unwrap();
        let sg = time_cfg.subgrid(&env).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let started = Instant::now();
        pool.install(|| build_model(&p, sg)).unwrap();
        let single = started.elapsed().as_secs_f64();
        let ratio = runs[0].build_seconds / single;
        tally.check(
            9,
            "thread scaling",
            ratio <= 0.5 && build_max < 120.0,
            format!("{hw} threads {:.1} s vs 1 thread {single:.1} s (ratio {ratio:.2}, limit 0.5); slowest build {build_max:.1} s (limit 120 s)", runs[0].build_seconds),
        );
    } else if build_max < 120.0 {
        tally.record(
            9,
            "thread scaling",
            Verdict::NotEvaluated,
            format!(
                "speedup needs >= 4 cores, this machine has {hw}; build-time bound holds: slowest desk build {build_max:.1} s < 120 s"
            ),
        );
    } else {
        tally.check(9, "thread scaling", false, format!("slowest desk build {build_max:.1} s exceeds 120 s"));
    }

    let reach_ok = runs.iter().all(|r| r.reached as f64 >= 0.95 * r.n as f64);
    let avoid_ok = runs.iter().all(|r| r.avoidable_hits == 0);
    let time = &runs[0];
    let energy = &runs[1];
    tally.check(
        10,
        "mission behavior",
        reach_ok && avoid_ok && time.max_speed_fraction >= 0.9 && energy.min_speed_fraction >= 0.5,
        format!(
            "reached target {}; obstacle endings {:?} of which avoidable {:?}; time max-speed share {:.3} (>= 0.9), energy min-speed share {:.3} (>= 0.5)",
            runs.iter().map(|r| format!("{} {}/{}", r.objective.name(), r.reached, r.n)).collect::<Vec<_>>().join(", "),
            runs.iter().map(|r| r.obstacle_hits).collect::<Vec<_>>(),
            runs.iter().map(|r| r.avoidable_hits).collect::<Vec<_>>(),
            time.max_speed_fraction,
            energy.min_speed_fraction
        ),
    );
}

/// Model, policy and trajectory bytes for one pipeline run.
fn artifacts(cfg: &RunConfig) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let env = cfg.generate_environment().unwrap();
    let p = cfg.problem(&env).unwrap();
    let m = build_model(&p, cfg.subgrid(&env).unwrap()).unwrap();
    let pv = solve(&m, &cfg.solver_config()).unwrap();
    let ens = ensemble_rollout(&p, &pv.actions, cfg.start_cell()).unwrap();
    (
        model::io::to_bytes(&m),
        solver::io::to_bytes(&pv).unwrap(),
        export::trajectories_csv(&ens).unwrap(),
    )
}

fn determinism_criterion(tally: &mut Tally) {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let smoke = config("smoke.toml");
    let mut mid = smoke.resized(24, 24, 16).unwrap();
    mid.mission.objective = Objective::NetEnergy;
    let mut counts = [1, 2, hw.max(4)].to_vec();
    counts.dedup();
    let mut diverged = Vec::new();
    for (name, cfg) in [("smoke", &smoke), ("24x24x16 net-energy", &mid)] {
        let reference = artifacts(cfg);
        for &n in &counts {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            if pool.install(|| artifacts(cfg)) != reference {
                diverged.push(format!("{name} @ {n} threads"));
            }
        }
    }
    tally.check(
        7,
        "determinism",
        diverged.is_empty(),
        format!("model/policy/trajectory bytes across threads {counts:?} and reruns; diverged: {diverged:?}"),
    );
}

fn main() {
    let started = Instant::now();
    let mut tally = Tally::default();
    oracle_criteria(&mut tally);
    memory_criterion(&mut tally);
    determinism_criterion(&mut tally);
    desk_criteria(&mut tally);
    println!("acceptance finished in {:.1} s", started.elapsed().as_secs_f64());
    if !tally.failed.is_empty() {
        eprintln!("failed criteria: {:?}", tally.failed);
        std::process::exit(1);
    }
}
