//! The four-block full-splitting iteration and the quantities it is
//! certified against: the augmented Lagrangian `L_beta`, its regularization
//! `Psi`, an explicit element of the limiting subdifferential of `Psi`, and
//! KKT residuals.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::{PrimalDualPoint, ProblemInstance};
use crate::trace::{IterationRecord, IterationTrace, KktResidual, RunStatus};
use crate::tuning::{derive_constants, validate, AdmissibilityReport, DerivedConstants, SolverParams};
use crate::vector::{add, axpy, dist, norm, norm_sq, product_norm, scale, sub};

/// Relative slack used by the online descent check.
pub const DESCENT_RTOL: f64 = 1e-9;

/// `(x_n, y_n, z_n, u_n)` together with the previous iterate.
///
/// `Psi` only reads `x_prev` and `u_prev`. `y_prev` is needed by the explicit
/// subgradient and `z_prev` by the recorded step norm `dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub iteration: usize,
}

impl SolverState {
    /// Starting point with `z_0 = A x_0` and `u_0 = 0`.
    pub fn initial(problem: &ProblemInstance, x0: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        let z0 = problem.a.apply(&x0)?;
        let u0 = vec![0.0; problem.a.rows()];
        Self::from_point(problem, x0, y0, z0, u0)
    }

    pub fn zeros(problem: &ProblemInstance) -> Self {
        let (m, q, _) = problem.dims();
        Self::initial(problem, vec![0.0; m], vec![0.0; q]).expect("consistent dimensions")
    }

    pub fn from_point(problem: &ProblemInstance, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let (m, q, p) = problem.dims();
        check_len("initial x", m, x.len())?;
        check_len("initial y", q, y.len())?;
        check_len("initial z", p, z.len())?;
        check_len("initial u", p, u.len())?;
        Ok(Self {
            x_prev: x.clone(),
            y_prev: y.clone(),
            z_prev: z.clone(),
            u_prev: u.clone(),
            x,
            y,
            z,
            u,
            iteration: 0,
        })
    }

    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint {
            x: self.x.clone(),
            y: self.y.clone(),
            z: self.z.clone(),
            u: self.u.clone(),
        }
    }

    fn check_dims(&self, problem: &ProblemInstance) -> Result<()> {
        let (m, q, p) = problem.dims();
        check_len("state x", m, self.x.len())?;
        check_len("state x_prev", m, self.x_prev.len())?;
        check_len("state y", q, self.y.len())?;
        check_len("state y_prev", q, self.y_prev.len())?;
        check_len("state z", p, self.z.len())?;
        check_len("state z_prev", p, self.z_prev.len())?;
        check_len("state u", p, self.u.len())?;
        check_len("state u_prev", p, self.u_prev.len())
    }
}

/// One iteration:
///
/// ```text
/// y+ = prox_{G/mu}(y - grad_y H(x, y) / mu)
/// z+ = prox_{F/beta}(A x + u / beta)
/// x+ = x - (grad_x H(x, y+) + A^T u + beta A^T (A x - z+)) / tau
/// u+ = u + sigma beta (A x+ - z+)
/// ```
///
/// The `y` and `z` updates read only the pre-step state.
pub fn step(state: &SolverState, problem: &ProblemInstance, params: &SolverParams) -> Result<SolverState> {
    state.check_dims(problem)?;
    let SolverParams { mu, beta, tau, sigma } = *params;
    let a = &problem.a;
    let n = state.iteration + 1;
    let diverged = |block| Error::NumericalDivergence { block, iteration: n };

    let gy = problem.h.grad_y(&state.x, &state.y);
    let y_arg: Vec<f64> = state.y.iter().zip(&gy).map(|(y, g)| y - g / mu).collect();
    let y_next = problem.g.prox(1.0 / mu, &y_arg);
    if !crate::vector::all_finite(&y_next) {
        return Err(diverged("y"));
    }

    let ax = a.apply_unchecked(&state.x);
    let z_arg: Vec<f64> = ax.iter().zip(&state.u).map(|(v, u)| v + u / beta).collect();
    let z_next = problem.f.prox(1.0 / beta, &z_arg);
    if !crate::vector::all_finite(&z_next) {
        return Err(diverged("z"));
    }

    let gx = problem.h.grad_x(&state.x, &y_next);
    let penalty: Vec<f64> = ax
        .iter()
        .zip(&z_next)
        .zip(&state.u)
        .map(|((v, z), u)| u + beta * (v - z))
        .collect();
    let at_pen = a.adjoint_apply_unchecked(&penalty);
    let x_next: Vec<f64> = state
        .x
        .iter()
        .zip(&gx)
        .zip(&at_pen)
        .map(|((x, g), p)| x - (g + p) / tau)
        .collect();
    if !crate::vector::all_finite(&x_next) {
        return Err(diverged("x"));
    }

    let s = sigma * beta;
    let residual = sub(&a.apply_unchecked(&x_next), &z_next);
    let u_next: Vec<f64> = state.u.iter().zip(&residual).map(|(u, r)| u + s * r).collect();
    if !crate::vector::all_finite(&u_next) {
        return Err(diverged("u"));
    }

    Ok(SolverState {
        x: x_next,
        y: y_next,
        z: z_next,
        u: u_next,
        x_prev: state.x.clone(),
        y_prev: state.y.clone(),
        z_prev: state.z.clone(),
        u_prev: state.u.clone(),
        iteration: n,
    })
}

/// `F(z) + G(y) + H(x, y) + <u, Ax - z> + beta/2 ||Ax - z||^2`
pub fn augmented_lagrangian(state: &SolverState, problem: &ProblemInstance, params: &SolverParams) -> f64 {
    let r = sub(&problem.a.apply_unchecked(&state.x), &state.z);
    problem.f.evaluate(&state.z)
        + problem.g.evaluate(&state.y)
        + problem.h.value(&state.x, &state.y)
        + crate::vector::dot(&state.u, &r)
        + 0.5 * params.beta * norm_sq(&r)
}

/// `A^T (u - u') + sigma B (x - x')`, the vector inside the `C0` term of `Psi`.
fn coupling_term(state: &SolverState, problem: &ProblemInstance, params: &SolverParams) -> (Vec<f64>, Vec<f64>) {
    let dx = sub(&state.x, &state.x_prev);
    let du = sub(&state.u, &state.u_prev);
    let bdx = problem
        .a
        .coupling_matrix_apply_unchecked(params.tau, params.beta, &dx);
    let mut w = problem.a.adjoint_apply_unchecked(&du);
    axpy(params.sigma, &bdx, &mut w);
    (w, dx)
}

/// `Psi = L_beta + C0 ||A^T(u - u') + sigma B (x - x')||^2 + C1 ||x - x'||^2`
/// with `B = tau Id - beta A^T A`.
pub fn evaluate_psi(state: &SolverState, problem: &ProblemInstance, params: &SolverParams, constants: &DerivedConstants) -> f64 {
    let (w, dx) = coupling_term(state, problem, params);
    augmented_lagrangian(state, problem, params) + constants.c0 * norm_sq(&w) + constants.c1 * norm_sq(&dx)
}

/// The six blocks of the explicit subgradient `D_n` of `Psi` at `X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub d_x: Vec<f64>,
    pub d_y: Vec<f64>,
    pub d_z: Vec<f64>,
    pub d_u: Vec<f64>,
    pub d_x_prev: Vec<f64>,
    pub d_u_prev: Vec<f64>,
}

impl Subgradient {
    pub fn blocks(&self) -> [&[f64]; 6] {
        [&self.d_x, &self.d_y, &self.d_z, &self.d_u, &self.d_x_prev, &self.d_u_prev]
    }

    /// Product-space norm.
    pub fn norm(&self) -> f64 {
        product_norm(&self.blocks())
    }
}

/// Explicit element of the limiting subdifferential of `Psi` at
/// `X_n = (x_n, y_n, z_n, u_n, x_{n-1}, u_{n-1})`, built from the optimality
/// conditions of the `y` and `z` updates that produced `state`.
pub fn subgradient_residual(state: &SolverState, problem: &ProblemInstance, params: &SolverParams, constants: &DerivedConstants) -> Subgradient {
    let SolverParams { mu, beta, tau, sigma } = *params;
    let a = &problem.a;
    let (w, dx) = coupling_term(state, problem, params);
    let bw = a.coupling_matrix_apply_unchecked(tau, beta, &w);
    let aw = a.apply_unchecked(&w);
    let r = sub(&a.apply_unchecked(&state.x), &state.z);

    // d_x
    let mut d_x = problem.h.grad_x(&state.x, &state.y);
    let pen: Vec<f64> = state.u.iter().zip(&r).map(|(u, ri)| u + beta * ri).collect();
    let at_pen = a.adjoint_apply_unchecked(&pen);
    axpy(1.0, &at_pen, &mut d_x);
    axpy(2.0 * constants.c1, &dx, &mut d_x);
    axpy(2.0 * sigma * constants.c0, &bw, &mut d_x);

    // d_y
    let gy_now = problem.h.grad_y(&state.x, &state.y);
    let gy_prev = problem.h.grad_y(&state.x_prev, &state.y_prev);
    let mut d_y = sub(&gy_now, &gy_prev);
    axpy(mu, &sub(&state.y_prev, &state.y), &mut d_y);

    // d_z
    let mut d_z = sub(&state.u_prev, &state.u);
    axpy(beta, &a.apply_unchecked(&scale(-1.0, &dx)), &mut d_z);

    // d_u
    let mut d_u = r;
    axpy(2.0 * constants.c0, &aw, &mut d_u);

    // d_x'
    let mut d_x_prev = scale(-2.0 * sigma * constants.c0, &bw);
    axpy(-2.0 * constants.c1, &dx, &mut d_x_prev);

    // d_u'
    let d_u_prev = scale(-2.0 * constants.c0, &aw);

    Subgradient {
        d_x,
        d_y,
        d_z,
        d_u,
        d_x_prev,
        d_u_prev,
    }
}

/// Residuals of the KKT system, using unit prox steps as stationarity
/// certificates for the nonsmooth blocks.
pub fn kkt_residual(state: &SolverState, problem: &ProblemInstance) -> KktResidual {
    let a = &problem.a;
    let grad = add(&problem.h.grad_x(&state.x, &state.y), &a.adjoint_apply_unchecked(&state.u));
    let feas = dist(&a.apply_unchecked(&state.x), &state.z);

    let gy = problem.h.grad_y(&state.x, &state.y);
    let y_fwd = sub(&state.y, &gy);
    let r_y = dist(&state.y, &problem.g.prox(1.0, &y_fwd));

    let z_fwd = add(&state.z, &state.u);
    let r_z = dist(&state.z, &problem.f.prox(1.0, &z_fwd));

    KktResidual {
        grad_x: norm(&grad),
        y: r_y,
        z: r_z,
        feas,
    }
}

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iterations: usize,
    /// Threshold on `max{dx, dy, dz, du}`.
    pub step_tol: f64,
    /// Optional threshold on every KKT residual.
    #[serde(default)]
    pub kkt_tol: Option<f64>,
    /// Abort once the product norm of `(x, y, z, u)` exceeds this.
    pub divergence_guard: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            step_tol: 1e-10,
            kkt_tol: None,
            divergence_guard: 1e12,
        }
    }
}

impl StoppingRule {
    pub fn check(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be >= 1".into()));
        }
        if !(self.step_tol >= 0.0) || self.kkt_tol.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Invalid("tolerances must be >= 0".into()));
        }
        if !(self.divergence_guard > 0.0) {
            return Err(Error::Invalid("divergence_guard must be > 0".into()));
        }
        Ok(())
    }

    fn satisfied(&self, record: &IterationRecord) -> bool {
        record.max_step() < self.step_tol && self.kkt_tol.is_none_or(|t| record.kkt.max() <= t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Refuse parameters that violate the descent assumptions and abort on
    /// any online descent violation.
    pub strict_mode: bool,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            strict_mode: true,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: IterationTrace,
    pub constants: DerivedConstants,
    pub admissibility: AdmissibilityReport,
    /// Online descent violations tolerated in permissive mode.
    pub descent_violations: usize,
}

/// Constants and admissibility report for running `problem` with `params`.
pub fn prepare(problem: &ProblemInstance, params: &SolverParams) -> Result<(DerivedConstants, AdmissibilityReport)> {
    params.check()?;
    let spectrum = problem.a.require_surjective()?;
    let constants = derive_constants(spectrum, problem.h.lipschitz(), params)
        .with_psi_lower_bound(problem.psi_lower_bound_hint());
    let report = validate(params, &constants, spectrum);
    Ok((constants, report))
}

/// Iterates from `initial` until `stopping` is met, recording one
/// [`IterationRecord`] per step. Deterministic for fixed inputs.
pub fn run(
    problem: &ProblemInstance,
    params: &SolverParams,
    stopping: &StoppingRule,
    initial: SolverState,
    options: RunOptions,
) -> Result<RunOutcome> {
    stopping.check()?;
    initial.check_dims(problem)?;
    let (constants, admissibility) = prepare(problem, params)?;
    if options.strict_mode && !admissibility.assumptions_hold() {
        let failed: Vec<String> = admissibility
            .failures()
            .iter()
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        return Err(Error::AssumptionViolation(failed.join("; ")));
    }

    let initial_lagrangian = augmented_lagrangian(&initial, problem, params);
    let mut iterates = options.record_iterates.then(|| vec![initial.point()]);
    let mut records: Vec<IterationRecord> = Vec::with_capacity(stopping.max_iterations.min(1 << 16));
    let mut state = initial;
    let mut status = RunStatus::MaxIterations;
    let mut descent_violations = 0;

    for _ in 0..stopping.max_iterations {
        let next = step(&state, problem, params)?;
        let size = product_norm(&[&next.x, &next.y, &next.z, &next.u]);
        if size > stopping.divergence_guard {
            return Err(Error::NumericalDivergence {
                block: "state",
                iteration: next.iteration,
            });
        }
        let record = make_record(&next, problem, params, &constants);
        if let Some(prev) = records.last() {
            let lhs = record.psi
                + constants.c2 * record.dx * record.dx
                + constants.c3 * record.dy * record.dy
                + constants.c4 * record.du * record.du;
            let slack = DESCENT_RTOL * (1.0 + prev.psi.abs().max(record.psi.abs()));
            if lhs - prev.psi > slack {
                if options.strict_mode {
                    return Err(Error::AssumptionViolation(format!(
                        "descent inequality fails at iteration {} by {:e}",
                        record.n,
                        lhs - prev.psi
                    )));
                }
                descent_violations += 1;
            }
        }
        if let Some(it) = iterates.as_mut() {
            it.push(next.point());
        }
        let done = stopping.satisfied(&record);
        records.push(record);
        state = next;
        if done {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok(RunOutcome {
        trace: IterationTrace {
            initial_lagrangian,
            records,
            status,
            iterates,
            final_point: state.point(),
        },
        constants,
        admissibility,
        descent_violations,
    })
}

fn make_record(state: &SolverState, problem: &ProblemInstance, params: &SolverParams, constants: &DerivedConstants) -> IterationRecord {
    let objective = problem.f.evaluate(&state.z) + problem.g.evaluate(&state.y) + problem.h.value(&state.x, &state.y);
    let feasibility = dist(&problem.a.apply_unchecked(&state.x), &state.z);
    IterationRecord {
        n: state.iteration,
        psi: evaluate_psi(state, problem, params, constants),
        lagrangian: augmented_lagrangian(state, problem, params),
        objective,
        feasibility,
        dx: dist(&state.x, &state.x_prev),
        dy: dist(&state.y, &state.y_prev),
        dz: dist(&state.z, &state.z_prev),
        du: dist(&state.u, &state.u_prev),
        subgrad_norm: subgradient_residual(state, problem, params, constants).norm(),
        kkt: kkt_residual(state, problem),
    }
}
