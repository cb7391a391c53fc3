//! One PASS/FAIL line per acceptance criterion. Tolerances are pinned below.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trisplit::bench::{self, reference};
use trisplit::diagnostics::{self, Regime};
use trisplit::vector::dist;
use trisplit::*;

const SUITE_ITERATIONS: usize = 2000;
const SUITE_MAX_DIM: usize = 50;
const SUITE_MIN_INSTANCES: usize = 5;
const PER_INSTANCE_BUDGET: Duration = Duration::from_secs(10);
const BOUND_ABS_TOL: f64 = 1e-9;
const VANISHING_TOL: f64 = 1e-8;
const VANISHING_MAX_ITERATIONS: usize = 5000;
const KKT_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-4;
const REDUCTION_STEPS: usize = 200;
const REDUCTION_TOL: f64 = 1e-12;
const TUNER_CASES: usize = 200;
const TUNER_MAX_DIM: usize = 20;
const TUNER_BUDGET: Duration = Duration::from_secs(5);
const Q_TOL: f64 = 0.01;
const THETA_TOL: f64 = 0.02;
const MIN_FIT: f64 = 0.99;
const DUAL_ULPS: f64 = 4.0;

type Verdict = std::result::Result<String, String>;

fn ensure(cond: bool, msg: String) -> Verdict {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

struct SuiteRun {
    problem: ProblemInstance,
    params: SolverParams,
    outcome: RunOutcome,
    elapsed: Duration,
}

fn suite_runs() -> Vec<SuiteRun> {
    suite()
        .into_iter()
        .map(|problem| {
            let start = Instant::now();
            let (params, outcome) = run_tuned(&problem, SUITE_ITERATIONS, 0.0, true);
            SuiteRun {
                problem,
                params,
                outcome,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

fn descent(runs: &[SuiteRun]) -> Verdict {
    if runs.len() < SUITE_MIN_INSTANCES {
        return Err(format!("only {} instances", runs.len()));
    }
    let mut worst = f64::NEG_INFINITY;
    for r in runs {
        let (m, q, p) = r.problem.dims();
        let name = &r.problem.name;
        if m.max(q).max(p) > SUITE_MAX_DIM {
            return Err(format!("{name}: dims ({m}, {q}, {p}) too large"));
        }
        if r.outcome.trace.records.len() != SUITE_ITERATIONS {
            return Err(format!("{name}: {} iterations", r.outcome.trace.records.len()));
        }
        if r.elapsed > PER_INSTANCE_BUDGET {
            return Err(format!("{name}: {:?}", r.elapsed));
        }
        let d = diagnostics::check_descent(&r.outcome.trace.records, &r.outcome.constants).map_err(|e| e.to_string())?;
        if !d.ok {
            return Err(format!("{name}: violation {:e} at n = {}", d.worst_violation, d.worst_at));
        }
        worst = worst.max(d.worst_violation);
    }
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap_or_default();
    Ok(format!("{} instances, worst violation {worst:e}, slowest {slowest:.2?}", runs.len()))
}

fn subgradient_bound(runs: &[SuiteRun]) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    for r in runs {
        let b = diagnostics::check_subgradient_bound(&r.outcome.trace.records, &r.outcome.constants);
        if b.worst_slack > BOUND_ABS_TOL {
            return Err(format!("{}: slack {:e} at n = {}", r.problem.name, b.worst_slack, b.worst_at));
        }
        worst = worst.max(b.worst_slack);
    }
    Ok(format!("worst slack {worst:e}"))
}

fn vanishing_differences() -> Verdict {
    let p = bench::make_convex_sanity(2).map_err(|e| e.to_string())?;
    let (_, out) = run_tuned(&p, VANISHING_MAX_ITERATIONS, VANISHING_TOL, false);
    let last = out.trace.records.last().ok_or("empty trace")?;
    ensure(
        out.trace.status == RunStatus::Converged && last.max_step() < VANISHING_TOL,
        format!("max step {:e} after {} iterations", last.max_step(), last.n),
    )
}

fn kkt_and_oracle() -> Verdict {
    let p = bench::make_convex_sanity(1).map_err(|e| e.to_string())?;
    let (_, out) = run_tuned(&p, VANISHING_MAX_ITERATIONS, 1e-10, false);
    let kkt = out.trace.records.last().ok_or("empty trace")?.kkt.max();
    let oracle = bench::brute_force_oracle(&p, &[(-4.0, 4.0), (-1.0, 1.0)], bench::ORACLE_RESOLUTION).map_err(|e| e.to_string())?;
    let fin = &out.trace.final_point;
    let gap = (p.objective(&fin.x, &fin.y) - oracle.value).abs();
    ensure(kkt <= KKT_TOL && gap <= ORACLE_TOL, format!("kkt {kkt:e}, objective vs oracle {gap:e}"))
}

fn reductions() -> Verdict {
    let err = |e: Error| e.to_string();
    let mut worst = 0.0f64;

    let p = bench::make_reduction_proxgrad(5, 21).map_err(err)?;
    let prm = tuned(&p, 0.5);
    let y0 = vec![0.5, -0.25, 1.0, 0.0, 2.0];
    let expect = reference::proximal_gradient(&p, &y0, prm.mu, REDUCTION_STEPS);
    let start = SolverState::initial(&p, vec![0.0; 5], y0).map_err(err)?;
    let it = run(&p, &prm, &stopping(REDUCTION_STEPS, 0.0), start, strict(true)).map_err(err)?.trace.iterates.unwrap_or_default();
    if it.len() != REDUCTION_STEPS + 1 {
        return Err(format!("proximal gradient: {} iterates", it.len()));
    }
    for (a, b) in it.iter().zip(&expect) {
        worst = worst.max(dist(&a.y, b));
    }

    let p = bench::make_reduction_botnguyen(6, 3, 22).map_err(err)?;
    let prm = tuned(&p, 0.5);
    let y0 = vec![4.0, -7.0];
    let start = SolverState::initial(&p, vec![0.3, -0.1, 0.0, 1.0, -2.0, 0.5], y0.clone()).map_err(err)?;
    let it = run(&p, &prm, &stopping(REDUCTION_STEPS, 0.0), start, strict(true)).map_err(err)?.trace.iterates.unwrap_or_default();
    if it.iter().any(|s| s.y != y0) {
        return Err("three-operator reduction moved y".into());
    }

    let p = bench::make_reduction_palm(4, 3, 23).map_err(err)?;
    let prm = tuned(&p, 0.5);
    let start = SolverState::initial(&p, vec![1.0, -1.0, 0.5, 0.0], vec![0.2, 0.0, -0.4]).map_err(err)?;
    let it = run(&p, &prm, &stopping(REDUCTION_STEPS, 0.0), start, strict(true)).map_err(err)?.trace.iterates.unwrap_or_default();
    for w in it.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if (0..next.z.len()).any(|i| next.z[i] != prev.x[i] + prev.u[i] / prm.beta) {
            return Err(format!("identity-operator reduction: z differs at n = {}", it.len()));
        }
    }
    ensure(worst <= REDUCTION_TOL, format!("proximal gradient deviation {worst:e}; y constant; z identity exact"))
}

fn tuner() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let start = Instant::now();
    let mut min_c = f64::INFINITY;
    let mut done = 0;
    while done < TUNER_CASES {
        let m = rng.random_range(1..=TUNER_MAX_DIM);
        let p = rng.random_range(1..=m);
        let entries: Vec<f64> = (0..p * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseOperator::new(p, m, entries).map_err(|e| e.to_string())?;
        if !a.is_surjective() {
            continue;
        }
        let l = rng.random_range(0.1..=10.0);
        let s = a.spectrum();
        let params = select_parameters(s, l, 0.5).map_err(|e| e.to_string())?;
        let c = derive_constants(s, l, &params);
        let report = validate(&params, &c, s);
        let ok = report.assumptions_hold()
            && c.min_descent_constant() > 0.0
            && 2.0 * params.tau >= params.beta * s.norm_sq()
            && c.delta_tau_prime > 0.0;
        if !ok {
            return Err(format!("case {done}: {:?}", report.failures()));
        }
        min_c = min_c.min(c.min_descent_constant());
        done += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= TUNER_BUDGET, format!("{TUNER_CASES} operators in {elapsed:.2?}, smallest descent constant {min_c:e}"))
}

fn rates() -> Verdict {
    let mut worst_q = 0.0f64;
    for q in [0.5f64, 0.9, 0.99] {
        let gaps: Vec<f64> = (1..=500).map(|n| q.powi(n)).collect();
        let r = diagnostics::estimate_rate(&gaps).map_err(|e| e.to_string())?;
        let q_hat = r.q_hat.ok_or(format!("Q = {q}: {:?}", r.regime))?;
        worst_q = worst_q.max((q_hat - q).abs());
    }
    let mut worst_theta = 0.0f64;
    for p in [1i32, 2, 4] {
        let gaps: Vec<f64> = (1..=500).map(|n| (n as f64).powi(-p)).collect();
        let r = diagnostics::estimate_rate(&gaps).map_err(|e| e.to_string())?;
        let theta = (p + 1) as f64 / (2 * p) as f64;
        let t = r.theta_hat.ok_or(format!("p = {p}: {:?}", r.regime))?;
        worst_theta = worst_theta.max((t - theta).abs());
    }
    let p = bench::make_convex_sanity(2).map_err(|e| e.to_string())?;
    let (prm, out) = run_tuned(&p, VANISHING_MAX_ITERATIONS, 1e-10, false);
    let report = diagnostics::diagnose_trace(&out.trace, &out.constants, &prm).map_err(|e| e.to_string())?;
    let rate = report.rate.ok_or("no rate estimate")?;
    ensure(
        worst_q <= Q_TOL && worst_theta <= THETA_TOL && rate.regime == Regime::Linear && rate.fit_quality >= MIN_FIT,
        format!(
            "Q error {worst_q:e}, theta error {worst_theta:e}, convex run {:?} with R^2 {:.4}",
            rate.regime, rate.fit_quality
        ),
    )
}

fn dual_identity(runs: &[SuiteRun]) -> Verdict {
    let mut worst = 0.0f64;
    let mut steps = 0;
    for r in runs {
        let it = r.outcome.trace.iterates.as_ref().ok_or("iterates not recorded")?;
        for w in it.windows(2) {
            worst = worst.max(dual_identity_ulps(&r.problem, &r.params, &w[0], &w[1]));
            steps += 1;
        }
    }
    ensure(worst <= DUAL_ULPS, format!("{steps} steps, worst {worst} ulps"))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("tv.toml");
    std::fs::write(
        &cfg,
        "[problem]\nname = \"tv_sparse_recovery\"\nsize = 16\nseed = 3\n[tuning]\n[stopping]\nmax_iterations = 1000\n",
    )
    .map_err(|e| e.to_string())?;
    let mut csvs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_trisplit"))
            .arg("run")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !matches!(status.code(), Some(0 | 2)) {
            return Err(format!("run exited with {status}"));
        }
        csvs.push(std::fs::read(out.join("trace.csv")).map_err(|e| e.to_string())?);
    }
    ensure(csvs[0] == csvs[1], format!("{} bytes each", csvs[0].len()))
}

fn main() {
    let runs = suite_runs();
    let criteria: Vec<(&str, Verdict)> = vec![
        ("descent", descent(&runs)),
        ("subgradient_bound", subgradient_bound(&runs)),
        ("vanishing_differences", vanishing_differences()),
        ("kkt_and_oracle", kkt_and_oracle()),
        ("special_case_reductions", reductions()),
        ("parameter_tuner", tuner()),
        ("rate_estimation", rates()),
        ("dual_identity", dual_identity(&runs)),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, verdict)) in criteria.iter().enumerate() {
        match verdict {
            Ok(msg) => println!("PASS {} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
