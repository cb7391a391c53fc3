//! Problem corpus: a total-variation / sparse recovery instance, a convex
//! instance with a closed-form solution, the three special cases of the
//! iteration with their standalone reference schemes, and a grid-search
//! oracle for tiny instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{ProxFunction, QuadraticCoupling, SmoothCoupling};
use crate::linop::DenseOperator;
use crate::problem::{AssumptionFlags, PrimalDualPoint, ProblemInstance};
use crate::tuning::SolverParams;

pub const TV_WEIGHT: f64 = 0.1;
pub const SPARSITY_WEIGHT: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 0x7215_5eed;

/// Fixed data of the convex instance, truncated to its dimension.
pub const SANITY_C: [f64; 4] = [3.0, -0.5, 1.5, -2.25];
pub const SANITY_D: [f64; 4] = [1.0, -2.0, 0.5, 0.0];

/// Largest grid the oracle will sweep.
pub const ORACLE_MAX_POINTS: f64 = 1e8;
pub const ORACLE_MAX_DIMS: usize = 3;
pub const ORACLE_RESOLUTION: f64 = 1e-3;
pub const ORACLE_REFINED_RESOLUTION: f64 = 1e-5;

/// Noise-free and observed signal of the recovery instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TvSignal {
    pub clean: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Piecewise-constant signal with three or four plateaus plus Gaussian noise
/// of standard deviation 0.05, generated from `seed`.
pub fn tv_signal(m: usize, seed: u64) -> TvSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = rng.random_range(3..=4usize).min(m);
    let mut breaks: Vec<usize> = (1..pieces).map(|k| k * m / pieces).collect();
    breaks.push(m);
    let mut clean = Vec::with_capacity(m);
    let mut start = 0;
    for end in breaks {
        let level = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-2.0..2.0) };
        clean.extend(std::iter::repeat_n(level, end - start));
        start = end;
    }
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    let observed = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();
    TvSignal { clean, observed }
}

/// `F = 0.1 ||.||_1` on first differences of `x`, `G = 0.05 ||.||_0` on `y`,
/// `H = 1/2 ||x - y - b||^2` with `b` from [`tv_signal`].
pub fn make_tv_sparse_recovery(m: usize, seed: u64) -> Result<ProblemInstance> {
    if m < 3 {
        return Err(Error::Invalid(format!("tv_sparse_recovery needs m >= 3, got {m}")));
    }
    let a = DenseOperator::first_difference(m)?;
    let signal = tv_signal(m, seed);
    let mut k = vec![0.0; m * m];
    let mut mm = vec![0.0; m * m];
    for i in 0..m {
        k[i * m + i] = 1.0;
        mm[i * m + i] = -1.0;
    }
    let h = SmoothCoupling::quadratic(QuadraticCoupling::new(m, m, m, k, mm, signal.observed, 1.0)?);
    let mut p = ProblemInstance::new(
        "tv_sparse_recovery",
        ProxFunction::L1 { weight: TV_WEIGHT },
        ProxFunction::L0 { weight: SPARSITY_WEIGHT },
        h,
        a,
        m,
    )?;
    // H is constant along x = y and A has a kernel: neither boundedness route applies.
    p.flags = AssumptionFlags {
        h_coercive: false,
        a_invertible: false,
        f_coercive: true,
        g_coercive: false,
    };
    p.inf_h = Some(0.0);
    p.seed = Some(seed);
    Ok(p)
}

/// [`make_convex_sanity_with`] on the fixed data `SANITY_C`, `SANITY_D`.
pub fn make_convex_sanity(m: usize) -> Result<ProblemInstance> {
    if !(1..=4).contains(&m) {
        return Err(Error::Invalid(format!("convex_sanity needs 1 <= m <= 4, got {m}")));
    }
    make_convex_sanity_with(&SANITY_C[..m], &SANITY_D[..m])
}

/// `F = ||.||_1`, `A = Id`, `G = 1/2 ||.||^2`,
/// `H = 1/2 ||x - c||^2 + 1/2 ||y - d||^2`.
///
/// Solution: `x* = z* = soft(c, 1)`, `y* = d / 2`, `u* = c - x*`.
pub fn make_convex_sanity_with(c: &[f64], d: &[f64]) -> Result<ProblemInstance> {
    let m = c.len();
    crate::error::check_len("convex_sanity d", m, d.len())?;
    let eye = identity_rows(m);
    let h = SmoothCoupling::separable(&eye, c, &eye, d, m, m)?;
    let mut p = ProblemInstance::new(
        "convex_sanity",
        ProxFunction::L1 { weight: 1.0 },
        ProxFunction::SquaredL2 { weight: 1.0 },
        h,
        DenseOperator::identity(m)?,
        m,
    )?;
    let x: Vec<f64> = c.iter().map(|v| crate::functions::soft_threshold(*v, 1.0)).collect();
    let u = c.iter().zip(&x).map(|(ci, xi)| ci - xi).collect();
    p.analytic_solution = Some(PrimalDualPoint {
        z: x.clone(),
        x,
        y: d.iter().map(|v| v / 2.0).collect(),
        u,
    });
    p.flags = AssumptionFlags {
        h_coercive: true,
        a_invertible: true,
        f_coercive: true,
        g_coercive: true,
    };
    p.inf_h = Some(0.0);
    Ok(p)
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, scale).expect("valid normal");
    (0..rows)
        .map(|_| (0..cols).map(|_| normal.sample(rng)).collect())
        .collect()
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// `A = Id`, `F = 0`, `G = 0.1 ||.||_1`, `H = 1/2 ||K x + M y - b||^2` with
/// seeded Gaussian `K`, `M`, `b`.
pub fn make_reduction_palm(m: usize, q: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = m + q;
    let k = gaussian_rows(&mut rng, rows, m, 1.0 / (rows as f64).sqrt());
    let mm = gaussian_rows(&mut rng, rows, q, 1.0 / (rows as f64).sqrt());
    let b = gaussian_vec(&mut rng, rows);
    let h = SmoothCoupling::quadratic(QuadraticCoupling::from_rows(&k, &mm, b, 1.0)?);
    let mut p = ProblemInstance::new(
        "reduction_palm",
        ProxFunction::Zero,
        ProxFunction::L1 { weight: 0.1 },
        h,
        DenseOperator::identity(m)?,
        q,
    )?;
    p.flags = AssumptionFlags {
        h_coercive: false,
        a_invertible: true,
        f_coercive: false,
        g_coercive: true,
    };
    p.inf_h = Some(0.0);
    p.seed = Some(seed);
    Ok(p)
}

/// `G = 0`, `H(x, y) = 1/2 ||x - b||^2` independent of `y` (with `q = 2`),
/// `F = 0.5 ||.||_1`, `A` a seeded Gaussian `p x m` matrix.
pub fn make_reduction_botnguyen(m: usize, p: usize, seed: u64) -> Result<ProblemInstance> {
    if p > m || p == 0 {
        return Err(Error::Invalid(format!("botnguyen reduction needs 1 <= p <= m, got p={p}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DenseOperator::from_rows(&gaussian_rows(&mut rng, p, m, 1.0 / (m as f64).sqrt()))?;
    let b = gaussian_vec(&mut rng, m);
    let q = 2;
    let h = SmoothCoupling::separable(&identity_rows(m), &b, &[], &[], m, q)?;
    let mut prob = ProblemInstance::new("reduction_botnguyen", ProxFunction::L1 { weight: 0.5 }, ProxFunction::Zero, h, a, q)?;
    prob.flags = AssumptionFlags {
        h_coercive: false,
        a_invertible: p == m,
        f_coercive: true,
        g_coercive: false,
    };
    prob.inf_h = Some(0.0);
    prob.seed = Some(seed);
    Ok(prob)
}

/// `A = Id` on `R^q`, `F = 0`, `G = 0.1 ||.||_1`, `H(y) = 1/2 ||R y - d||^2`
/// with seeded Gaussian `R`, `d`.
pub fn make_reduction_proxgrad(q: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = gaussian_rows(&mut rng, q, q, 1.0 / (q as f64).sqrt());
    let d = gaussian_vec(&mut rng, q);
    let h = SmoothCoupling::separable(&[], &[], &r, &d, q, q)?;
    let mut p = ProblemInstance::new(
        "reduction_proxgrad",
        ProxFunction::Zero,
        ProxFunction::L1 { weight: 0.1 },
        h,
        DenseOperator::identity(q)?,
        q,
    )?;
    p.flags = AssumptionFlags {
        h_coercive: false,
        a_invertible: true,
        f_coercive: false,
        g_coercive: true,
    };
    p.inf_h = Some(0.0);
    p.seed = Some(seed);
    Ok(p)
}

/// Instance by catalog name with a seed and a size parameter.
pub fn make_named(name: &str, size: usize, seed: u64) -> Result<ProblemInstance> {
    match name {
        "tv_sparse_recovery" => make_tv_sparse_recovery(size, seed),
        "convex_sanity" => make_convex_sanity(size),
        "reduction_palm" => make_reduction_palm(size, size, seed),
        "reduction_botnguyen" => make_reduction_botnguyen(size, size.div_ceil(2), seed),
        "reduction_proxgrad" => make_reduction_proxgrad(size, seed),
        other => Err(Error::Invalid(format!("unknown problem `{other}`"))),
    }
}

pub const NAMED_PROBLEMS: [&str; 5] = [
    "tv_sparse_recovery",
    "convex_sanity",
    "reduction_palm",
    "reduction_botnguyen",
    "reduction_proxgrad",
];

/// Standalone versions of the special-case schemes, written against the
/// raw oracles so they share no code path with the solver.
pub mod reference {
    use super::*;

    /// `y+ = prox_{G/mu}(y - grad h(y) / mu)` repeated `steps` times;
    /// returns `y_0, ..., y_steps`.
    pub fn proximal_gradient(problem: &ProblemInstance, y0: &[f64], mu: f64, steps: usize) -> Vec<Vec<f64>> {
        let x_dummy = vec![0.0; problem.a.cols()];
        let mut out = vec![y0.to_vec()];
        let mut y = y0.to_vec();
        for _ in 0..steps {
            let g = problem.h.grad_y(&x_dummy, &y);
            let arg: Vec<f64> = (0..y.len()).map(|i| y[i] - g[i] / mu).collect();
            y = problem.g.prox(1.0 / mu, &arg);
            out.push(y.clone());
        }
        out
    }

    /// Three-step scheme for `G = 0`, `H = h(x)`; returns `(x, z, u)` after
    /// every step.
    pub fn bot_nguyen(
        problem: &ProblemInstance,
        x0: &[f64],
        z0: &[f64],
        u0: &[f64],
        params: &SolverParams,
        steps: usize,
    ) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let entries = problem.a.entries();
        let (p, m) = (problem.a.rows(), problem.a.cols());
        let y_dummy = vec![0.0; problem.q];
        let matvec = |v: &[f64]| -> Vec<f64> { (0..p).map(|i| (0..m).map(|j| entries[i * m + j] * v[j]).sum()).collect() };
        let matvec_t = |w: &[f64]| -> Vec<f64> { (0..m).map(|j| (0..p).map(|i| entries[i * m + j] * w[i]).sum()).collect() };
        let (beta, tau, sigma) = (params.beta, params.tau, params.sigma);
        let (mut x, mut u) = (x0.to_vec(), u0.to_vec());
        debug_assert_eq!(z0.len(), p);
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let ax = matvec(&x);
            let arg: Vec<f64> = (0..p).map(|i| ax[i] + u[i] / beta).collect();
            let z = problem.f.prox(1.0 / beta, &arg);
            let g = problem.h.grad_x(&x, &y_dummy);
            let w: Vec<f64> = (0..p).map(|i| u[i] + beta * (ax[i] - z[i])).collect();
            let atw = matvec_t(&w);
            x = (0..m).map(|j| x[j] - (g[j] + atw[j]) / tau).collect();
            let ax_new = matvec(&x);
            u = (0..p).map(|i| u[i] + sigma * beta * (ax_new[i] - z[i])).collect();
            out.push((x.clone(), z.clone(), u.clone()));
        }
        out
    }

    /// Four-step scheme specialized to `A = Id`; returns `(x, y, z, u)` after
    /// every step.
    pub fn identity_operator(
        problem: &ProblemInstance,
        start: &PrimalDualPoint,
        params: &SolverParams,
        steps: usize,
    ) -> Vec<PrimalDualPoint> {
        let SolverParams { mu, beta, tau, sigma } = *params;
        let mut s = start.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let gy = problem.h.grad_y(&s.x, &s.y);
            let y_arg: Vec<f64> = s.y.iter().zip(&gy).map(|(y, g)| y - g / mu).collect();
            let y = problem.g.prox(1.0 / mu, &y_arg);
            let z_arg: Vec<f64> = s.x.iter().zip(&s.u).map(|(x, u)| x + u / beta).collect();
            let z = problem.f.prox(1.0 / beta, &z_arg);
            let gx = problem.h.grad_x(&s.x, &y);
            let x: Vec<f64> = (0..s.x.len())
                .map(|j| s.x[j] - (gx[j] + (s.u[j] + beta * (s.x[j] - z[j]))) / tau)
                .collect();
            let u: Vec<f64> = (0..x.len()).map(|j| s.u[j] + sigma * beta * (x[j] - z[j])).collect();
            s = PrimalDualPoint { x, y, z, u };
            out.push(s.clone());
        }
        out
    }
}

/// Result of the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    /// Spacing of the final grid.
    pub resolution: f64,
}

fn axis_len(lo: f64, hi: f64, step: f64) -> usize {
    ((hi - lo) / step + 1e-9).floor() as usize + 1
}

/// Exhaustive minimization of `F(Ax) + G(y) + H(x, y)` over a grid of
/// spacing `resolution` on the box (one interval per coordinate of `(x, y)`),
/// followed by a pass at spacing `max(1e-5, resolution / 100)` around the
/// best point. Ties go to
/// the lexicographically first grid point.
pub fn brute_force_oracle(problem: &ProblemInstance, bounds: &[(f64, f64)], resolution: f64) -> Result<OracleResult> {
    let (m, q, _) = problem.dims();
    let dims = m + q;
    crate::error::check_len("oracle box", dims, bounds.len())?;
    if dims > ORACLE_MAX_DIMS {
        return Err(Error::Invalid(format!("oracle supports at most {ORACLE_MAX_DIMS} coordinates, got {dims}")));
    }
    if !(resolution > 0.0) || bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::Invalid("oracle needs finite bounds lo <= hi and resolution > 0".into()));
    }
    let (best, value) = grid_search(problem, bounds, resolution)?;
    let fine = ORACLE_REFINED_RESOLUTION.max(resolution / 100.0);
    let (best, value, used) = if fine < resolution {
        let local: Vec<(f64, f64)> = best
            .iter()
            .zip(bounds)
            .map(|(c, (lo, hi))| ((c - resolution).max(*lo), (c + resolution).min(*hi)))
            .collect();
        let (b2, v2) = grid_search(problem, &local, fine)?;
        if v2 < value {
            (b2, v2, fine)
        } else {
            (best, value, fine)
        }
    } else {
        (best, value, resolution)
    };
    Ok(OracleResult {
        x: best[..m].to_vec(),
        y: best[m..].to_vec(),
        value,
        resolution: used,
    })
}

fn grid_search(problem: &ProblemInstance, bounds: &[(f64, f64)], step: f64) -> Result<(Vec<f64>, f64)> {
    let lens: Vec<usize> = bounds.iter().map(|(lo, hi)| axis_len(*lo, *hi, step)).collect();
    let total = lens.iter().map(|&l| l as f64).product::<f64>();
    if total > ORACLE_MAX_POINTS {
        return Err(Error::GridTooLarge {
            points: total,
            limit: ORACLE_MAX_POINTS,
        });
    }
    let total = total as usize;
    let (m, _, _) = problem.dims();
    let point_at = |mut idx: usize, buf: &mut [f64]| {
        for d in (0..lens.len()).rev() {
            buf[d] = bounds[d].0 + (idx % lens[d]) as f64 * step;
            idx /= lens[d];
        }
    };
    const CHUNK: usize = 1 << 14;
    let best = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![0.0; lens.len()];
            let mut best = (f64::INFINITY, usize::MAX);
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                point_at(idx, &mut buf);
                let v = problem.objective(&buf[..m], &buf[m..]);
                let v = if v.is_nan() { f64::INFINITY } else { v };
                if v < best.0 || best.1 == usize::MAX {
                    best = (v, idx);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let mut point = vec![0.0; lens.len()];
    point_at(best.1, &mut point);
    Ok((point, best.0))
}

/// `i,clean,observed` rows of the recovery signal.
pub fn signal_csv(signal: &TvSignal) -> String {
    let mut out = String::from("i,clean,observed\n");
    for (i, (c, o)) in signal.clean.iter().zip(&signal.observed).enumerate() {
        out += &format!("{i},{},{}\n", crate::trace::format_real(*c), crate::trace::format_real(*o));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_operator_spectrum() {
        let p = make_tv_sparse_recovery(3, 1).unwrap();
        assert_eq!(p.a.to_rows(), vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]]);
        assert!((p.a.min_eig_aat() - 1.0).abs() < 1e-12);
        assert!((p.a.norm() * p.a.norm() - 3.0).abs() < 1e-12);
        assert!(!p.flags.boundedness_guaranteed());
        assert_eq!(p.dims(), (3, 3, 2));
    }

    #[test]
    fn tv_signal_is_seeded() {
        assert_eq!(tv_signal(20, 9), tv_signal(20, 9));
        assert_ne!(tv_signal(20, 9).observed, tv_signal(20, 10).observed);
    }

    #[test]
    fn sanity_solution() {
        let p = make_convex_sanity(1).unwrap();
        let s = p.analytic_solution.unwrap();
        assert_eq!(s.x, vec![2.0]);
        assert_eq!(s.y, vec![0.5]);
        let p = make_convex_sanity_with(&[1.0], &[0.0]).unwrap();
        let s = p.analytic_solution.unwrap();
        assert_eq!(s.x, vec![0.0]);
        assert_eq!(s.y, vec![0.0]);
        assert!(make_convex_sanity(5).is_err());
    }

    #[test]
    fn oracle_rejects_large_grids() {
        let p = make_convex_sanity(1).unwrap();
        let r = brute_force_oracle(&p, &[(-1e3, 1e3), (-1e3, 1e3)], 1e-3);
        assert!(matches!(r, Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn oracle_ties_go_to_first_point() {
        let h = SmoothCoupling::quadratic(QuadraticCoupling::new(1, 1, 1, vec![0.0], vec![0.0], vec![0.0], 1.0).unwrap());
        let p = ProblemInstance::new("zero", ProxFunction::Zero, ProxFunction::Zero, h, DenseOperator::identity(1).unwrap(), 1).unwrap();
        let r = brute_force_oracle(&p, &[(-1.0, 1.0), (0.5, 2.0)], 0.1).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!((r.x[0], r.y[0]), (-1.0, 0.5));
    }

    #[test]
    fn oracle_on_one_dimensional_instance() {
        // |x| + (x - 1)^2 / 2 with y absent from the objective.
        let h = SmoothCoupling::separable(&[vec![1.0]], &[1.0], &[], &[], 1, 1).unwrap();
        let p = ProblemInstance::new(
            "abs",
            ProxFunction::L1 { weight: 1.0 },
            ProxFunction::Zero,
            h,
            DenseOperator::identity(1).unwrap(),
            1,
        )
        .unwrap();
        let r = brute_force_oracle(&p, &[(-2.0, 2.0), (0.0, 0.0)], 1e-3).unwrap();
        assert!(r.x[0].abs() < 1e-9);
        assert!((r.value - 0.5).abs() < 1e-12);
    }
}
