#![allow(dead_code)]

use trisplit::bench;
use trisplit::diagnostics;
use trisplit::*;

pub fn tuned(problem: &ProblemInstance, safety: f64) -> SolverParams {
    select_parameters(problem.a.spectrum(), problem.h.lipschitz(), safety).unwrap()
}

pub fn stopping(max_iterations: usize, step_tol: f64) -> StoppingRule {
    StoppingRule {
        max_iterations,
        step_tol,
        kkt_tol: None,
        divergence_guard: 1e12,
    }
}

pub fn strict(record_iterates: bool) -> RunOptions {
    RunOptions {
        strict_mode: true,
        record_iterates,
    }
}

pub fn run_tuned(problem: &ProblemInstance, max_iterations: usize, step_tol: f64, record_iterates: bool) -> (SolverParams, RunOutcome) {
    let params = tuned(problem, 0.5);
    let out = run(
        problem,
        &params,
        &stopping(max_iterations, step_tol),
        SolverState::zeros(problem),
        strict(record_iterates),
    )
    .unwrap();
    (params, out)
}

/// `|x| + (x - 1)^2 / 2` in one variable; `y` does not enter.
pub fn abs_instance() -> ProblemInstance {
    let h = SmoothCoupling::separable(&[vec![1.0]], &[1.0], &[], &[], 1, 1).unwrap();
    ProblemInstance::new(
        "abs",
        ProxFunction::L1 { weight: 1.0 },
        ProxFunction::Zero,
        h,
        DenseOperator::identity(1).unwrap(),
        1,
    )
    .unwrap()
}

/// The strict-mode suite: every catalog instance at desk scale.
pub fn suite() -> Vec<ProblemInstance> {
    vec![
        bench::make_convex_sanity(1).unwrap(),
        bench::make_convex_sanity(3).unwrap(),
        bench::make_tv_sparse_recovery(8, 11).unwrap(),
        bench::make_tv_sparse_recovery(20, 12).unwrap(),
        bench::make_reduction_palm(4, 3, 13).unwrap(),
        bench::make_reduction_botnguyen(6, 3, 14).unwrap(),
        bench::make_reduction_proxgrad(5, 15).unwrap(),
    ]
}

/// Largest ulp-scaled componentwise gap in `u+ - u = sigma beta (A x+ - z+)`.
pub fn dual_identity_ulps(problem: &ProblemInstance, params: &SolverParams, prev: &PrimalDualPoint, next: &PrimalDualPoint) -> f64 {
    let ax = problem.a.apply(&next.x).unwrap();
    let sb = params.sigma * params.beta;
    let mut worst = 0.0f64;
    for i in 0..next.u.len() {
        let rhs = sb * (ax[i] - next.z[i]);
        let lhs = next.u[i] - prev.u[i];
        let scale = next.u[i].abs().max(prev.u[i].abs()).max(rhs.abs());
        if scale == 0.0 {
            continue;
        }
        let ulp = f64::EPSILON * scale;
        worst = worst.max((lhs - rhs).abs() / ulp);
    }
    worst
}

pub fn gaps_of(trace: &IterationTrace) -> diagnostics::GapSeries {
    diagnostics::psi_gaps(&trace.psi_values(), None)
}
