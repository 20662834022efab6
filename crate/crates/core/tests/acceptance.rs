//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use common::{
    brute_force_ot, corridor_tv, random_chain, random_cost_rows, random_distribution, CORRIDORS,
};
use otq_core::agent::{
    train, AgentConfig, AgentMode, EpisodeRecord, StepEvent, StepObserver, TrainSetup,
};
use otq_core::experiment::{
    export, run_comparison, summarize, ConvergenceRule, ExperimentConfig, ExperimentResults,
    ModeSummary, EPISODES_CSV, SMOOTHED_CSV,
};
use otq_core::gridworld::GridworldEnv;
use otq_core::ot::{
    build_cost_matrix, solve_ot, CostMatrix, OtSolverConfig, ProbabilityVector, EXACT_MARGINAL_TOL,
};
use otq_core::policy::{stationary_distribution, PolicyMatrix, StationaryConfig};
use otq_core::risk::{build_risk_distribution, RiskSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Canonical {
    env: GridworldEnv,
    risk: ProbabilityVector,
    cost: CostMatrix,
}

impl Canonical {
    fn new() -> Self {
        let env = GridworldEnv::canonical();
        let risk = build_risk_distribution(&env, &RiskSpec::default()).unwrap();
        let cost = build_cost_matrix(&env.state_coords()).unwrap();
        Canonical { env, risk, cost }
    }

    fn setup(&self, agent: AgentConfig) -> TrainSetup<'_> {
        TrainSetup {
            env: &self.env,
            risk: &self.risk,
            cost: &self.cost,
            agent,
            ot: OtSolverConfig::default(),
            stationary: StationaryConfig::default(),
            wasserstein_p: 1.0,
        }
    }
}

/// The default 5-seed, 500-episode comparison on the canonical layout.
struct FullRun {
    results: ExperimentResults,
    elapsed: Duration,
    baseline: ModeSummary,
    ot: ModeSummary,
}

fn full_run() -> FullRun {
    let config = ExperimentConfig::default();
    let t = Instant::now();
    let results = run_comparison(&config).expect("comparison run");
    let elapsed = t.elapsed();
    assert!(results.failures.is_empty(), "{:?}", results.failures);
    let mut modes = summarize(&results.records, &ConvergenceRule::default());
    FullRun {
        baseline: modes.remove(&AgentMode::Baseline).unwrap(),
        ot: modes.remove(&AgentMode::OtAssisted).unwrap(),
        results,
        elapsed,
    }
}

fn optimality_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = 2 + k % 3;
        let p = ProbabilityVector::new(random_distribution(&mut rng, n)).unwrap();
        let q = ProbabilityVector::new(random_distribution(&mut rng, n)).unwrap();
        let c = CostMatrix::from_rows(random_cost_rows(&mut rng, n)).unwrap();
        let plan = solve_ot(&p, &q, &c, &OtSolverConfig::exact()).unwrap();
        let (best, _) = brute_force_ot(p.as_slice(), q.as_slice(), c.as_slice());
        worst = worst.max((plan.objective(&c) - best).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 10.0,
        format!("max |gap| {worst:.2e}, {secs:.2} s"),
    )
}

fn marginal_feasibility() -> Verdict {
    let coords: Vec<(i64, i64)> = (0..15).flat_map(|y| (0..15).map(move |x| (x, y))).collect();
    let cost = build_cost_matrix(&coords).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_residual, mut slowest) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = ProbabilityVector::new(random_distribution(&mut rng, 225)).unwrap();
        let q = ProbabilityVector::new(random_distribution(&mut rng, 225)).unwrap();
        let t = Instant::now();
        let plan = solve_ot(&p, &q, &cost, &OtSolverConfig::exact()).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let (row, col) = plan.marginal_residuals();
        worst_residual = worst_residual.max(row).max(col);
    }
    verdict(
        worst_residual <= EXACT_MARGINAL_TOL && slowest < 2.0,
        format!("max marginal residual {worst_residual:.2e}, slowest solve {slowest:.3} s"),
    )
}

fn baseline_equivalence(world: &Canonical) -> Verdict {
    let mut mismatched = Vec::new();
    for seed in 0..5 {
        let agent = |mode, beta| AgentConfig {
            mode,
            beta,
            seed,
            ..AgentConfig::default()
        };
        let base = train(&world.setup(agent(AgentMode::Baseline, 1.0)), 200, &mut ()).unwrap();
        let ot = train(
            &world.setup(agent(AgentMode::OtAssisted, 0.0)),
            200,
            &mut (),
        )
        .unwrap();
        let same_records = base.records.len() == ot.records.len()
            && base
                .records
                .iter()
                .zip(&ot.records)
                .all(|(a, b)| EpisodeRecord { mode: a.mode, ..*b } == *a);
        if !(same_records && base.qtable == ot.qtable) {
            mismatched.push(seed);
        }
    }
    verdict(
        mismatched.is_empty(),
        format!("seeds 0-4 x 200 episodes, mismatched seeds {mismatched:?}"),
    )
}

fn collision_reduction(run: &FullRun) -> Verdict {
    let (b, o) = (run.baseline.total_collisions, run.ot.total_collisions);
    let ratio = o as f64 / b as f64;
    let secs = run.elapsed.as_secs_f64();
    verdict(
        ratio <= 0.85 && secs < 900.0,
        format!(
            "ot {o} vs baseline {b} collisions, ratio {ratio:.4} (need <= 0.85), run {secs:.1} s"
        ),
    )
}

fn faster_convergence(run: &FullRun) -> Verdict {
    let mut wins = 0;
    let mut cells = Vec::new();
    for (seed, b) in &run.baseline.convergence_episode {
        let o = run.ot.convergence_episode[seed];
        // a run that never settles counts as slower than any that does
        let faster = match (o, b) {
            (Some(o), Some(b)) => o < *b,
            (Some(_), None) => true,
            _ => false,
        };
        wins += usize::from(faster);
        let show = |e: Option<usize>| e.map_or("-".to_string(), |e| e.to_string());
        cells.push(format!("{seed}: {}/{}", show(o), show(*b)));
    }
    verdict(
        wins >= 4,
        format!(
            "ot faster in {wins}/5 seeds (ot/baseline: {})",
            cells.join(", ")
        ),
    )
}

#[derive(Default)]
struct ShapingAudit {
    episode: usize,
    applied: HashSet<(usize, usize)>,
    steps: usize,
    positive: usize,
    negative: usize,
    reapplied: usize,
}

impl StepObserver for ShapingAudit {
    fn on_step(&mut self, e: &StepEvent) {
        if e.episode != self.episode {
            self.episode = e.episode;
            self.applied.clear();
        }
        self.steps += 1;
        self.negative += usize::from(e.bonus < 0.0);
        if e.bonus > 0.0 {
            self.positive += 1;
            if !self.applied.insert((e.state, e.next_state)) {
                self.reapplied += 1;
            }
        }
    }
}

fn shaping_audit(world: &Canonical) -> Verdict {
    let mut audit = ShapingAudit::default();
    let agent = AgentConfig {
        mode: AgentMode::OtAssisted,
        ..AgentConfig::default()
    };
    train(&world.setup(agent), 50, &mut audit).unwrap();
    verdict(
        audit.negative == 0 && audit.reapplied == 0 && audit.positive > 0,
        format!(
            "{} steps, {} positive bonuses, {} negative, {} reapplied",
            audit.steps, audit.positive, audit.negative, audit.reapplied
        ),
    )
}

fn stationary_fixed_point() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(2..=10);
        let chain = PolicyMatrix::new(random_chain(&mut rng, n), vec![true; n]).unwrap();
        let v = stationary_distribution(&chain, 0.0, 1e-8, 10_000).unwrap();
        worst = worst.max(chain.residual(v.as_slice(), 0.0));
    }
    let tv = CORRIDORS
        .iter()
        .enumerate()
        .map(|(seed, &(len, start, action))| corridor_tv(len, start, action, seed as u64))
        .fold(0.0f64, f64::max);
    verdict(
        worst <= 1e-8 && tv <= 0.05,
        format!("max residual {worst:.2e} over 50 chains, max corridor TV {tv:.4}"),
    )
}

fn wasserstein_trend(run: &FullRun) -> Verdict {
    let (b, o) = (
        run.baseline.final_wasserstein_mean,
        run.ot.final_wasserstein_mean,
    );
    verdict(
        o < b,
        format!("final-50 mean W1: ot {o:.4} vs baseline {b:.4}"),
    )
}

fn determinism(run: &FullRun) -> Verdict {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    export(&run.results, first.path()).unwrap();
    export(
        &run_comparison(&ExperimentConfig::default()).unwrap(),
        second.path(),
    )
    .unwrap();
    let mut differing = Vec::new();
    for name in [EPISODES_CSV, SMOOTHED_CSV] {
        if std::fs::read(first.path().join(name)).unwrap()
            != std::fs::read(second.path().join(name)).unwrap()
        {
            differing.push(name);
        }
    }
    verdict(
        differing.is_empty(),
        format!("differing files {differing:?}"),
    )
}

fn report(n: usize, title: &str, v: Verdict) -> bool {
    println!(
        "[{}] criterion {n}: {title}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
    v.pass
}

fn main() {
    // honour `cargo test -- --list` from tooling that enumerates tests
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let world = Canonical::new();
    let mut results = vec![
        report(1, "exact solver optimality", optimality_oracle()),
        report(2, "marginal feasibility at n = 225", marginal_feasibility()),
        report(3, "zero-beta equivalence", baseline_equivalence(&world)),
    ];
    let run = full_run();
    results.push(report(4, "collision reduction", collision_reduction(&run)));
    results.push(report(5, "faster convergence", faster_convergence(&run)));
    results.push(report(
        6,
        "shaping nonnegativity and single application",
        shaping_audit(&world),
    ));
    results.push(report(
        7,
        "stationary fixed point and estimator agreement",
        stationary_fixed_point(),
    ));
    results.push(report(8, "wasserstein trend", wasserstein_trend(&run)));
    results.push(report(9, "determinism", determinism(&run)));

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
