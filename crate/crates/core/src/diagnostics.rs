//! Post-hoc verification of a recorded trace: sufficient decrease of `Psi`,
//! the relative-error bound on the subgradient, lower-boundedness, the
//! dual/feasibility identity, and empirical convergence-rate estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::PrimalDualPoint;
use crate::solver::DESCENT_RTOL;
use crate::trace::{IterationRecord, IterationTrace, KktResidual};
use crate::tuning::{DerivedConstants, SolverParams};
use crate::vector::dist;

/// Absolute slack for the subgradient bound and the recurrence check.
pub const ABS_TOL: f64 = 1e-9;
/// Minimum number of gap values a rate fit needs.
pub const MIN_FIT_POINTS: usize = 20;
/// Fraction of leading iterations excluded from fits.
pub const WARM_UP_FRACTION: f64 = 0.10;
/// Fraction of trailing `Psi` values averaged into the default `Psi_*`.
pub const TAIL_FRACTION: f64 = 0.05;
/// Margin in coefficient of determination needed to prefer one regime.
pub const REGIME_MARGIN: f64 = 0.01;
/// Relative noise floor below which trace-based gaps are not fitted.
pub const GAP_RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentCheck {
    pub ok: bool,
    /// `max_n [Psi_{n+1} + C2 dx^2 + C3 dy^2 + C4 du^2 - Psi_n]`
    pub worst_violation: f64,
    /// Iteration `n + 1` at which the worst value occurs.
    pub worst_at: usize,
    pub tolerance: f64,
}

/// Sufficient decrease of `Psi` between consecutive records.
pub fn check_descent(records: &[IterationRecord], constants: &DerivedConstants) -> Result<DescentCheck> {
    if records.len() < 2 {
        return Err(Error::TooShort { got: records.len(), need: 2 });
    }
    let scale = records.iter().map(|r| r.psi.abs()).fold(0.0, f64::max);
    let tolerance = DESCENT_RTOL * (1.0 + scale);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = records[1].n;
    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let v = cur.psi + constants.c2 * cur.dx * cur.dx + constants.c3 * cur.dy * cur.dy + constants.c4 * cur.du * cur.du
            - prev.psi;
        if v > worst || v.is_nan() {
            worst = v;
            worst_at = cur.n;
            if v.is_nan() {
                break;
            }
        }
    }
    Ok(DescentCheck {
        ok: worst <= tolerance,
        worst_violation: worst,
        worst_at,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub ok: bool,
    /// `max_n [|||D_n||| - (C5 dx + C6 dy + C7 du)]`; positive means violated.
    pub worst_slack: f64,
    pub worst_at: usize,
}

/// `|||D_n||| <= C5 dx + C6 dy + C7 du` on every record.
pub fn check_subgradient_bound(records: &[IterationRecord], constants: &DerivedConstants) -> BoundCheck {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = records.first().map_or(0, |r| r.n);
    for r in records {
        let bound = constants.c5 * r.dx + constants.c6 * r.dy + constants.c7 * r.du;
        let s = r.subgrad_norm - bound;
        if s > worst || s.is_nan() {
            worst = s;
            worst_at = r.n;
            if s.is_nan() {
                break;
            }
        }
    }
    BoundCheck {
        ok: records.is_empty() || worst <= ABS_TOL,
        worst_slack: if records.is_empty() { 0.0 } else { worst },
        worst_at,
    }
}

/// `||A x_n - z_n|| = ||u_n - u_{n-1}|| / (sigma beta)` on every record.
pub fn check_feasibility_identity(records: &[IterationRecord], params: &SolverParams) -> BoundCheck {
    let sb = params.sigma * params.beta;
    let mut worst = 0.0f64;
    let mut worst_at = records.first().map_or(0, |r| r.n);
    let mut ok = true;
    for r in records {
        let other = r.du / sb;
        let diff = (r.feasibility - other).abs();
        let tol = 1e-12 + 1e-8 * r.feasibility.max(other);
        if !(diff <= tol) {
            ok = false;
        }
        if diff > worst || diff.is_nan() {
            worst = diff;
            worst_at = r.n;
        }
    }
    BoundCheck {
        ok,
        worst_slack: worst,
        worst_at,
    }
}

/// Optimality gaps `E_n = Psi_n - Psi_*`; `gaps[k]` belongs to `n = k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSeries {
    pub gaps: Vec<f64>,
    pub psi_star: f64,
    /// Gaps at or below this are treated as zero.
    pub floor: f64,
}

/// Gaps against `psi_star`, or against the mean of the last 5% of `psi`.
pub fn psi_gaps(psi: &[f64], psi_star: Option<f64>) -> GapSeries {
    let star = psi_star.unwrap_or_else(|| {
        let k = ((psi.len() as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, psi.len().max(1));
        let tail = &psi[psi.len().saturating_sub(k)..];
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        }
    });
    GapSeries {
        gaps: psi.iter().map(|p| p - star).collect(),
        psi_star: star,
        floor: GAP_RELATIVE_FLOOR * (1.0 + star.abs()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FiniteTime,
    Linear,
    Sublinear,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub regime: Regime,
    /// Fitted exponent; set for `Sublinear`, and for `FiniteTime` as 0.
    pub theta_hat: Option<f64>,
    /// Fitted ratio; set for `Linear`.
    pub q_hat: Option<f64>,
    pub fit_quality: f64,
    /// First and last iteration index used by the fit.
    pub window: (usize, usize),
}

impl RateEstimate {
    /// Exponent to use in the desingularizing function: `1/2` for a linear
    /// fit (every `theta <= 1/2` gives the same bound up to constants).
    pub fn effective_theta(&self) -> f64 {
        match self.regime {
            Regime::FiniteTime => 0.0,
            Regime::Linear => 0.5,
            Regime::Sublinear | Regime::Undetermined => self.theta_hat.unwrap_or(0.5),
        }
    }

    pub fn describe(&self) -> String {
        match self.regime {
            Regime::FiniteTime => "gaps reach exactly zero: consistent with theta = 0".into(),
            Regime::Linear => format!(
                "linear decay, Q ~ {:.6}, R^2 = {:.6}: consistent with theta <= 1/2",
                self.q_hat.unwrap_or(f64::NAN),
                self.fit_quality
            ),
            Regime::Sublinear => format!(
                "sublinear decay, R^2 = {:.6}: consistent with theta ~ {:.4}",
                self.fit_quality,
                self.theta_hat.unwrap_or(f64::NAN)
            ),
            Regime::Undetermined => format!("no regime preferred by the data (R^2 = {:.6})", self.fit_quality),
        }
    }
}

/// Least-squares line `y = a + b t`; returns `(b, r_squared)`.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        let (da, db) = (a - mt, b - my);
        stt += da * da;
        sty += da * db;
        syy += db * db;
    }
    let slope = sty / stt;
    let r2 = if syy == 0.0 { 1.0 } else { (sty * sty / (stt * syy)).clamp(0.0, 1.0) };
    (slope, r2)
}

/// [`estimate_rate_with_floor`] with the smallest positive normal as floor.
pub fn estimate_rate(gaps: &[f64]) -> Result<RateEstimate> {
    estimate_rate_with_floor(gaps, f64::MIN_POSITIVE)
}

/// Classifies the decay of `gaps` (with `gaps[k]` at `n = k + 1`).
///
/// Trailing exact zeros give `FiniteTime`. Otherwise the first 10% is
/// dropped, the fit window runs until the first gap at or below `floor`, and
/// `log E_n` is regressed on `n` and on `log n`.
pub fn estimate_rate_with_floor(gaps: &[f64], floor: f64) -> Result<RateEstimate> {
    let len = gaps.len();
    if let Some(last_nonzero) = gaps.iter().rposition(|g| *g != 0.0) {
        // Zeros reached from below the noise floor are rounding, not termination.
        if last_nonzero + 2 < len && gaps[last_nonzero] > floor && gaps[..=last_nonzero].iter().all(|g| *g >= 0.0) {
            return Ok(RateEstimate {
                regime: Regime::FiniteTime,
                theta_hat: Some(0.0),
                q_hat: None,
                fit_quality: 1.0,
                window: (last_nonzero + 2, len),
            });
        }
    } else if len >= 1 {
        return Ok(RateEstimate {
            regime: Regime::FiniteTime,
            theta_hat: Some(0.0),
            q_hat: None,
            fit_quality: 1.0,
            window: (1, len),
        });
    }

    let start = (len as f64 * WARM_UP_FRACTION).floor() as usize;
    let end = gaps[start.min(len)..]
        .iter()
        .position(|g| !(*g > floor))
        .map_or(len, |k| start + k);
    let usable = end.saturating_sub(start);
    if usable < MIN_FIT_POINTS {
        return Err(Error::TooShort { got: usable, need: MIN_FIT_POINTS });
    }
    let n: Vec<f64> = (start..end).map(|k| (k + 1) as f64).collect();
    let logn: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let loge: Vec<f64> = gaps[start..end].iter().map(|g| g.ln()).collect();
    let (s_lin, r_lin) = linear_fit(&n, &loge);
    let (s_log, r_log) = linear_fit(&logn, &loge);

    let q = s_lin.exp();
    let theta = ((1.0 - 1.0 / s_log) / 2.0).clamp(0.5 + 1e-6, 1.0 - 1e-6);
    let window = (start + 1, end);
    let est = if r_lin >= r_log + REGIME_MARGIN && s_lin < 0.0 {
        RateEstimate {
            regime: Regime::Linear,
            theta_hat: None,
            q_hat: Some(q),
            fit_quality: r_lin,
            window,
        }
    } else if r_log >= r_lin + REGIME_MARGIN && s_log < 0.0 {
        RateEstimate {
            regime: Regime::Sublinear,
            theta_hat: Some(theta),
            q_hat: None,
            fit_quality: r_log,
            window,
        }
    } else {
        RateEstimate {
            regime: Regime::Undetermined,
            theta_hat: (s_log < 0.0).then_some(theta),
            q_hat: (s_lin < 0.0).then_some(q),
            fit_quality: r_lin.max(r_log),
            window,
        }
    };
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCheck {
    pub ok: bool,
    /// `min_n [E_{n-1} - E_n - c10 E_n^{2 theta}]`
    pub worst_slack: f64,
    /// Largest `c` for which the recurrence holds on the window.
    pub empirical_c10: Option<f64>,
}

/// `E_{n-1} - E_n >= c10 E_n^{2 theta}` on the gaps after warm-up.
pub fn check_recurrence(gaps: &[f64], theta: f64, c10: f64) -> RecurrenceCheck {
    let start = ((gaps.len() as f64 * WARM_UP_FRACTION).floor() as usize).max(1);
    let mut worst = f64::INFINITY;
    let mut emp = f64::INFINITY;
    for k in start..gaps.len() {
        let drop = gaps[k - 1] - gaps[k];
        let power = gaps[k].max(0.0).powf(2.0 * theta);
        worst = worst.min(drop - c10 * power);
        if power > 0.0 {
            emp = emp.min(drop / power);
        }
    }
    if worst == f64::INFINITY {
        worst = 0.0;
    }
    RecurrenceCheck {
        ok: worst >= -ABS_TOL,
        worst_slack: worst,
        empirical_c10: emp.is_finite().then_some(emp.max(0.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRateReport {
    pub ok: bool,
    pub theta: f64,
    /// Lojasiewicz constant used in `phi(s) = C_L s^(1-theta) / (1-theta)`.
    pub lojasiewicz_constant: f64,
    /// Number of iterations checked.
    pub checked: usize,
    /// Largest ratio of a distance to its bound; at most 1 when the check passes.
    pub worst_ratio: f64,
}

/// Tail maximum of `E_n^theta / |||D_n|||`, the smallest `C_L` consistent with
/// the Lojasiewicz inequality along the trace.
pub fn estimate_lojasiewicz_constant(records: &[IterationRecord], gaps: &GapSeries, window: (usize, usize), theta: f64) -> f64 {
    let mut c = 0.0f64;
    for k in window.0.saturating_sub(1)..window.1.min(records.len()) {
        let g = gaps.gaps[k];
        let d = records[k].subgrad_norm;
        if g > gaps.floor && d > 0.0 {
            c = c.max(g.powf(theta) / d);
        }
    }
    c
}

/// Distances to the final iterate against the bounds
/// `C11 max{sqrt(E_n), phi(E_n)}` for `x, y, u` and `C12 (same)` for `z`,
/// over the rate-fit window.
pub fn iterate_rate_check(
    trace: &IterationTrace,
    gaps: &GapSeries,
    rate: &RateEstimate,
    constants: &DerivedConstants,
    lojasiewicz_constant: Option<f64>,
    step_tol: f64,
) -> Result<IterateRateReport> {
    let last = trace.records.last().ok_or(Error::TooShort { got: 0, need: 1 })?;
    if !(last.max_step() < step_tol) {
        return Err(Error::NotConverged { max_step: last.max_step(), tol: step_tol });
    }
    let iterates = trace
        .iterates
        .as_ref()
        .ok_or_else(|| Error::Invalid("iterate rate check needs recorded iterates".into()))?;
    let theta = rate.effective_theta();
    let c_l = lojasiewicz_constant
        .or(constants.lojasiewicz_constant)
        .unwrap_or_else(|| estimate_lojasiewicz_constant(&trace.records, gaps, rate.window, theta) * (1.0 + 1e-9));
    let limit = &trace.final_point;
    let phi = |s: f64| c_l * s.powf(1.0 - theta) / (1.0 - theta);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut ok = true;
    for n in rate.window.0..=rate.window.1.min(trace.records.len()) {
        let e = gaps.gaps[n - 1].max(0.0);
        let base = e.sqrt().max(phi(e));
        let p: &PrimalDualPoint = &iterates[n];
        for (d, c) in [
            (dist(&p.x, &limit.x), constants.c11),
            (dist(&p.y, &limit.y), constants.c11),
            (dist(&p.u, &limit.u), constants.c11),
            (dist(&p.z, &limit.z), constants.c12),
        ] {
            let bound = c * base;
            if d > bound + ABS_TOL {
                ok = false;
            }
            if d > 0.0 {
                worst = worst.max(if bound > 0.0 { d / bound } else { f64::INFINITY });
            }
        }
        checked += 1;
    }
    Ok(IterateRateReport {
        ok,
        theta,
        lojasiewicz_constant: c_l,
        checked,
        worst_ratio: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<PrimalDualPoint>,
    pub kkt: KktResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub records: usize,
    pub descent_ok: bool,
    pub descent: DescentCheck,
    pub subgrad_bound_ok: bool,
    pub subgrad_bound: BoundCheck,
    /// `None` when no lower bound on `Psi` is known.
    pub psi_lower_ok: Option<bool>,
    pub psi_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility_identity: Option<BoundCheck>,
    pub psi_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceCheck>,
    pub recurrence_c10: Option<f64>,
    pub limit_point: LimitPoint,
}

impl DiagnosticsReport {
    /// Both certified inequalities hold on the whole trace.
    pub fn passed(&self) -> bool {
        self.descent_ok && self.subgrad_bound_ok
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "records: {}\ndescent: {} (worst {:.3e} at n={})\nsubgradient bound: {} (worst slack {:.3e} at n={})\n",
            self.records,
            verdict(self.descent_ok),
            self.descent.worst_violation,
            self.descent.worst_at,
            verdict(self.subgrad_bound_ok),
            self.subgrad_bound.worst_slack,
            self.subgrad_bound.worst_at,
        );
        if let Some(ok) = self.psi_lower_ok {
            s += &format!("psi lower bound: {}\n", verdict(ok));
        }
        if let Some(f) = &self.feasibility_identity {
            s += &format!("feasibility identity: {} (worst {:.3e})\n", verdict(f.ok), f.worst_slack);
        }
        match (&self.rate, &self.rate_note) {
            (Some(r), _) => s += &format!("rate: {}\n", r.describe()),
            (None, Some(note)) => s += &format!("rate: {note}\n"),
            _ => {}
        }
        if let Some(c) = self.recurrence_c10 {
            s += &format!("empirical C10: {c:.6e}\n");
        }
        s += &format!("final KKT residual: {:.3e}\n", self.limit_point.kkt.max());
        s
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

/// Every check that needs only the trace and the constants.
pub fn diagnose(
    trace_records: &[IterationRecord],
    final_point: Option<&PrimalDualPoint>,
    constants: &DerivedConstants,
    params: Option<&SolverParams>,
    psi_star: Option<f64>,
) -> Result<DiagnosticsReport> {
    let descent = check_descent(trace_records, constants)?;
    let subgrad_bound = check_subgradient_bound(trace_records, constants);
    let psi: Vec<f64> = trace_records.iter().map(|r| r.psi).collect();
    let psi_min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let psi_lower_ok = constants
        .psi_lower_bound_hint
        .map(|b| psi_min >= b - DESCENT_RTOL * (1.0 + b.abs()));
    let feasibility_identity = params.map(|p| check_feasibility_identity(trace_records, p));

    let gaps = psi_gaps(&psi, psi_star);
    let (rate, rate_note) = match estimate_rate_with_floor(&gaps.gaps, gaps.floor) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let recurrence = rate.map(|r| {
        let lo = r.window.0.saturating_sub(1);
        let hi = r.window.1.min(gaps.gaps.len());
        check_recurrence(&gaps.gaps[lo..hi], r.effective_theta(), constants.c10.unwrap_or(0.0))
    });
    let last = trace_records.last().expect("at least two records");
    Ok(DiagnosticsReport {
        records: trace_records.len(),
        descent_ok: descent.ok,
        descent,
        subgrad_bound_ok: subgrad_bound.ok,
        subgrad_bound,
        psi_lower_ok,
        psi_min,
        feasibility_identity,
        psi_star: gaps.psi_star,
        rate,
        rate_note,
        recurrence_c10: recurrence.and_then(|r| r.empirical_c10),
        recurrence,
        limit_point: LimitPoint {
            n: last.n,
            point: final_point.cloned(),
            kkt: last.kkt,
        },
    })
}

/// [`diagnose`] on an in-memory trace.
pub fn diagnose_trace(trace: &IterationTrace, constants: &DerivedConstants, params: &SolverParams) -> Result<DiagnosticsReport> {
    diagnose(&trace.records, Some(&trace.final_point), constants, Some(params), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, psi: f64, dx: f64, subgrad: f64) -> IterationRecord {
        IterationRecord {
            n,
            psi,
            lagrangian: psi,
            objective: psi,
            feasibility: 0.0,
            dx,
            dy: 0.0,
            dz: 0.0,
            du: 0.0,
            subgrad_norm: subgrad,
            kkt: KktResidual {
                grad_x: 0.0,
                y: 0.0,
                z: 0.0,
                feas: 0.0,
            },
        }
    }

    fn constants() -> DerivedConstants {
        let spectrum = *crate::linop::DenseOperator::identity(1).unwrap().spectrum();
        let params = crate::tuning::select_parameters(&spectrum, 1.0, 0.5).unwrap();
        crate::tuning::derive_constants(&spectrum, 1.0, &params)
    }

    #[test]
    fn increasing_psi_fails_descent() {
        let c = constants();
        let recs = [rec(1, 1.0, 0.0, 0.0), rec(2, 2.0, 0.0, 0.0)];
        let d = check_descent(&recs, &c).unwrap();
        assert!(!d.ok);
        assert_eq!(d.worst_violation, 1.0);
    }

    #[test]
    fn identical_states_contribute_zero() {
        let c = constants();
        let recs = [rec(1, 0.5, 0.0, 0.0), rec(2, 0.5, 0.0, 0.0)];
        let d = check_descent(&recs, &c).unwrap();
        assert!(d.ok);
        assert_eq!(d.worst_violation, 0.0);
    }

    #[test]
    fn descent_needs_two_records() {
        let c = constants();
        assert!(matches!(check_descent(&[rec(1, 0.0, 0.0, 0.0)], &c), Err(Error::TooShort { .. })));
    }

    #[test]
    fn subgradient_bound_cases() {
        let c = constants();
        assert!(check_subgradient_bound(&[rec(1, 0.0, 0.0, 0.0)], &c).ok);
        let bad = rec(1, 0.0, 1.0, c.c5 * 2.0);
        let b = check_subgradient_bound(&[bad], &c);
        assert!(!b.ok);
        assert!((b.worst_slack - c.c5).abs() <= 1e-12 * c.c5);
    }

    #[test]
    fn geometric_gaps_are_linear() {
        let gaps: Vec<f64> = (1..=300).map(|n| 0.9f64.powi(n)).collect();
        let r = estimate_rate(&gaps).unwrap();
        assert_eq!(r.regime, Regime::Linear);
        assert!((r.q_hat.unwrap() - 0.9).abs() < 1e-9);
        assert!(r.fit_quality >= 0.999);
    }

    #[test]
    fn polynomial_gaps_are_sublinear() {
        let gaps: Vec<f64> = (1..=400).map(|n| (n as f64).powi(-2)).collect();
        let r = estimate_rate(&gaps).unwrap();
        assert_eq!(r.regime, Regime::Sublinear);
        assert!((r.theta_hat.unwrap() - 0.75).abs() < 1e-9);
    }

    #[test]
    fn exact_zeros_are_finite_time() {
        let gaps: Vec<f64> = (1..=40).map(|n| if n >= 5 { 0.0 } else { 1.0 / n as f64 }).collect();
        assert_eq!(estimate_rate(&gaps).unwrap().regime, Regime::FiniteTime);
    }

    #[test]
    fn few_points_are_too_short() {
        let gaps: Vec<f64> = (1..=15).map(|n| 0.5f64.powi(n)).collect();
        assert!(matches!(estimate_rate(&gaps), Err(Error::TooShort { .. })));
    }

    #[test]
    fn recurrence_on_geometric_gaps() {
        let q: f64 = 0.8;
        let gaps: Vec<f64> = (1..=60).map(|n| q.powi(n)).collect();
        let limit = (1.0 - q) / q;
        let r = check_recurrence(&gaps, 0.5, limit * 0.999);
        assert!(r.ok);
        assert!((r.empirical_c10.unwrap() - limit).abs() < 1e-9);
        let r = check_recurrence(&gaps, 0.5, limit * 1.5);
        assert!(!r.ok);
    }

    #[test]
    fn recurrence_degenerate_inputs() {
        let constant = vec![1.0; 30];
        let r = check_recurrence(&constant, 0.5, 0.1);
        assert!(!r.ok);
        assert_eq!(r.empirical_c10, Some(0.0));
        let zeros = vec![0.0; 30];
        let r = check_recurrence(&zeros, 0.5, 0.1);
        assert!(r.ok);
        assert_eq!(r.empirical_c10, None);
    }

    #[test]
    fn default_psi_star_is_tail_mean() {
        let psi: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let g = psi_gaps(&psi, None);
        assert_eq!(g.psi_star, (95..100).sum::<usize>() as f64 / 5.0);
        assert_eq!(psi_gaps(&psi, Some(-1.0)).gaps[0], 1.0);
    }
}
