//! Step-size admissibility and the constants of the convergence analysis.
//!
//! All block Lipschitz constants are identified with `ell = L * sqrt(2)`,
//! where `L` is a Lipschitz constant of the full gradient of `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::Spectrum;

/// Step parameters `(mu, beta, tau, sigma)` of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub mu: f64,
    pub beta: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl SolverParams {
    pub fn new(mu: f64, beta: f64, tau: f64, sigma: f64) -> Result<Self> {
        let p = Self { mu, beta, tau, sigma };
        p.check()?;
        Ok(p)
    }

    /// `mu, beta, tau > 0` and `0 < sigma <= 1`.
    pub fn check(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        pos("mu", self.mu)?;
        pos("beta", self.beta)?;
        pos("tau", self.tau)?;
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::Invalid(format!("sigma must lie in (0, 1], got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Every named constant of the analysis, evaluated for one problem and one
/// parameter choice. Constants may be negative; see [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub lipschitz: f64,
    pub ell_plus: f64,
    pub norm_a: f64,
    pub min_eig_aat: f64,
    pub kappa: f64,
    pub nu: f64,
    pub delta_tau_prime: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    /// Needs the Lojasiewicz constant; unset until one is supplied.
    pub c10: Option<f64>,
    pub c11: f64,
    pub c12: f64,
    pub lojasiewicz_constant: Option<f64>,
    pub gamma1_exists: bool,
    pub gamma2_exists: bool,
    pub psi_lower_bound_hint: Option<f64>,
}

impl DerivedConstants {
    pub fn min_descent_constant(&self) -> f64 {
        self.c2.min(self.c3).min(self.c4)
    }

    /// Sets `C_L` and the recurrence constant `C10 = C8 / (3 (C_L C9)^2)`.
    pub fn with_lojasiewicz_constant(mut self, c_l: f64) -> Self {
        self.lojasiewicz_constant = Some(c_l);
        self.c10 = Some(self.c8 / (3.0 * (c_l * self.c9).powi(2)));
        self
    }

    pub fn with_psi_lower_bound(mut self, bound: Option<f64>) -> Self {
        self.psi_lower_bound_hint = bound;
        self
    }
}

/// Evaluates all constants by direct substitution.
pub fn derive_constants(spectrum: &Spectrum, lipschitz: f64, params: &SolverParams) -> DerivedConstants {
    let SolverParams { mu, beta, tau, sigma } = *params;
    let norm_a = spectrum.norm;
    let norm_sq = norm_a * norm_a;
    let lam = spectrum.min_eig_aat;
    let kappa = spectrum.kappa;
    let ell = lipschitz * std::f64::consts::SQRT_2;
    let sbl = sigma * beta * lam;

    let nu = ell / lam;
    let delta_tau_prime = 1.0
        - 32.0 * nu / beta
        - 128.0 * nu * nu / (beta * beta)
        - 24.0 * nu * sigma / beta
        - 24.0 * sigma * kappa;

    let c0 = 4.0 * (1.0 - sigma) / (sigma * sigma * beta * lam);
    let c1 = 8.0 * (sigma * tau + ell).powi(2) / sbl;
    let c2 = tau - (ell + beta * norm_sq) / 2.0 - 4.0 * sigma * tau * tau / (beta * lam) - c1;
    let c3 = (mu - ell) / 2.0 - 16.0 * lipschitz * lipschitz / sbl;
    let c4 = 1.0 / (sigma * beta);

    let c5 = 2.0 * ell + tau + beta * norm_a + 4.0 * (sigma * tau + norm_a) * sigma * tau * c0 + 4.0 * c1;
    let c6 = ell + mu;
    let c7 = 1.0
        + 1.0 / (sigma * beta)
        + (2.0 / sigma - 1.0) * norm_a
        + 4.0 * (sigma * tau + norm_a) * c0 * norm_a;

    let c8 = 1.0 / c2.min(c3).min(c4);
    let c9 = c5.max(c6).max(c7);
    let c11 = 2.0 * (3.0 * c8).sqrt() + 3.0 * c8 * c9;
    let c12 = (norm_a + 2.0 / (sigma * beta)) * c11;

    // c gamma^2 - gamma + ell/2 = 0 has a real root iff 1 - 2 c ell >= 0
    let bl = beta * lam;
    let gamma1_exists = 1.0 - 2.0 * ell / bl >= 0.0;
    let gamma2_exists = 1.0 - 4.0 * ell / bl >= 0.0;

    DerivedConstants {
        lipschitz,
        ell_plus: ell,
        norm_a,
        min_eig_aat: lam,
        kappa,
        nu,
        delta_tau_prime,
        c0,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
        c8,
        c9,
        c10: None,
        c11,
        c12,
        lojasiewicz_constant: None,
        gamma1_exists,
        gamma2_exists,
        psi_lower_bound_hint: None,
    }
}

/// Lower bound on `beta` for a given `sigma`, which is exactly the
/// condition `delta_tau_prime > 0`.
pub fn beta_lower_bound(nu: f64, sigma: f64, kappa: f64) -> f64 {
    let root = (24.0 + 24.0 * sigma + 9.0 * sigma * sigma - 192.0 * sigma * kappa).sqrt();
    4.0 * nu / (1.0 - 24.0 * sigma * kappa) * (4.0 + 3.0 * sigma + root)
}

/// Open interval of `tau` values with `C2 > 0`, intersected with `2 tau >= beta ||A||^2`.
pub fn tau_interval(spectrum: &Spectrum, lipschitz: f64, beta: f64, sigma: f64) -> (f64, f64) {
    let ell = lipschitz * std::f64::consts::SQRT_2;
    let lam = spectrum.min_eig_aat;
    let nu = ell / lam;
    let delta = 1.0
        - 32.0 * nu / beta
        - 128.0 * nu * nu / (beta * beta)
        - 24.0 * nu * sigma / beta
        - 24.0 * sigma * spectrum.kappa;
    let root = delta.max(0.0).sqrt();
    let scale = beta * lam / (24.0 * sigma);
    let lo = scale * (1.0 - 16.0 * nu / beta - root);
    let hi = scale * (1.0 - 16.0 * nu / beta + root);
    if delta <= 0.0 {
        return (hi, lo.min(hi));
    }
    (lo.max(beta * spectrum.norm_sq() / 2.0), hi)
}

/// `mu` lower bound: `ell + 16 ell^2 / (sigma beta lambda_min)`.
pub fn mu_lower_bound(spectrum: &Spectrum, lipschitz: f64, beta: f64, sigma: f64) -> f64 {
    let ell = lipschitz * std::f64::consts::SQRT_2;
    ell + 16.0 * ell * ell / (sigma * beta * spectrum.min_eig_aat)
}

/// Interior point of the sufficient parameter region: `sigma` at `safety`
/// times its bound, `beta` and `mu` at `(1 + safety)` times theirs, `tau` at
/// the midpoint of its admissible interval.
pub fn select_parameters(spectrum: &Spectrum, lipschitz: f64, safety: f64) -> Result<SolverParams> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::Invalid(format!("safety must lie in (0, 1), got {safety}")));
    }
    if !spectrum.is_surjective() {
        return Err(Error::NotSurjective {
            min_eig: spectrum.min_eig_aat,
            norm_sq: spectrum.norm_sq(),
        });
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::Invalid(format!("L must be > 0, got {lipschitz}")));
    }
    let ell = lipschitz * std::f64::consts::SQRT_2;
    let nu = ell / spectrum.min_eig_aat;
    let sigma = safety / (24.0 * spectrum.kappa);
    let beta = (1.0 + safety) * beta_lower_bound(nu, sigma, spectrum.kappa);
    let (lo, hi) = tau_interval(spectrum, lipschitz, beta, sigma);
    if !(lo < hi) {
        return Err(Error::EmptyInterval { lo, hi });
    }
    let tau = 0.5 * (lo + hi);
    let mu = (1.0 + safety) * mu_lower_bound(spectrum, lipschitz, beta, sigma);
    SolverParams::new(mu, beta, tau, sigma)
}

/// One line of an [`AdmissibilityReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Conditions the descent and convergence results actually need.
    pub assumption_checks: Vec<Check>,
    /// Existence of the auxiliary roots used by the boundedness result.
    pub boundedness_checks: Vec<Check>,
    /// The (sufficient) closed-form parameter region.
    pub region_checks: Vec<Check>,
}

impl AdmissibilityReport {
    pub fn assumptions_hold(&self) -> bool {
        self.assumption_checks.iter().all(|c| c.passed)
    }

    pub fn in_sufficient_region(&self) -> bool {
        self.region_checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.assumption_checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.assumption_checks
            .iter()
            .chain(&self.boundedness_checks)
            .chain(&self.region_checks)
            .find(|c| c.name == name)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn validate(params: &SolverParams, constants: &DerivedConstants, spectrum: &Spectrum) -> AdmissibilityReport {
    let SolverParams { mu, beta, tau, sigma } = *params;
    let norm_sq = spectrum.norm_sq();
    let assumption_checks = vec![
        check("surjective", spectrum.is_surjective(), format!("lambda_min(AA^T) = {:e}", spectrum.min_eig_aat)),
        check("sigma_range", sigma > 0.0 && sigma <= 1.0, format!("sigma = {sigma}")),
        check(
            "tau_dominates_norm",
            2.0 * tau >= beta * norm_sq,
            format!("2 tau = {} vs beta ||A||^2 = {}", 2.0 * tau, beta * norm_sq),
        ),
        check("c2_positive", constants.c2 > 0.0, format!("C2 = {}", constants.c2)),
        check("c3_positive", constants.c3 > 0.0, format!("C3 = {}", constants.c3)),
        check("c4_positive", constants.c4 > 0.0, format!("C4 = {}", constants.c4)),
    ];
    let boundedness_checks = vec![
        check("gamma1_exists", constants.gamma1_exists, format!("beta lambda_min = {}", beta * spectrum.min_eig_aat)),
        check("gamma2_exists", constants.gamma2_exists, format!("2 ell = {}", 2.0 * constants.ell_plus)),
    ];

    let sigma_bound = 1.0 / (24.0 * spectrum.kappa);
    let beta_bound = if sigma < sigma_bound {
        beta_lower_bound(constants.nu, sigma, spectrum.kappa)
    } else {
        f64::INFINITY
    };
    let (tau_lo, tau_hi) = tau_interval(spectrum, constants.lipschitz, beta, sigma);
    let mu_bound = mu_lower_bound(spectrum, constants.lipschitz, beta, sigma);
    let region_checks = vec![
        check("region_sigma", sigma > 0.0 && sigma < sigma_bound, format!("sigma = {sigma} vs bound {sigma_bound}")),
        check("region_beta", beta > beta_bound, format!("beta = {beta} vs bound {beta_bound}")),
        check(
            "region_delta_tau",
            constants.delta_tau_prime > 0.0,
            format!("delta_tau' = {}", constants.delta_tau_prime),
        ),
        check(
            "region_tau",
            constants.delta_tau_prime > 0.0 && tau > tau_lo && tau < tau_hi,
            format!("tau = {tau} vs ({tau_lo}, {tau_hi})"),
        ),
        check("region_mu", mu > mu_bound, format!("mu = {mu} vs bound {mu_bound}")),
    ];
    AdmissibilityReport {
        assumption_checks,
        boundedness_checks,
        region_checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_spectrum() -> Spectrum {
        Spectrum {
            norm: 1.0,
            min_eig_aat: 1.0,
            kappa: 1.0,
        }
    }

    #[test]
    fn c4_and_c0_closed_forms() {
        let s = identity_spectrum();
        let p = SolverParams::new(10.0, 50.0, 100.0, 0.02).unwrap();
        let c = derive_constants(&s, 1.0, &p);
        assert!((c.c4 - 1.0).abs() < 1e-15);
        let p1 = SolverParams::new(10.0, 50.0, 100.0, 1.0).unwrap();
        assert_eq!(derive_constants(&s, 1.0, &p1).c0, 0.0);
        assert!(c.c0 > 0.0);
    }

    #[test]
    fn gamma_flags_from_discriminant() {
        // beta lambda = 10, ell = 2  ->  L = 2 / sqrt 2
        let s = identity_spectrum();
        let p = SolverParams::new(1.0, 10.0, 10.0, 0.5).unwrap();
        let c = derive_constants(&s, 2.0 / std::f64::consts::SQRT_2, &p);
        assert!((c.ell_plus - 2.0).abs() < 1e-15);
        assert!(c.gamma1_exists && c.gamma2_exists);
        // beta lambda = 6: 1 - 4*2/6 < 0 while 1 - 2*2/6 > 0
        let p = SolverParams::new(1.0, 6.0, 10.0, 0.5).unwrap();
        let c = derive_constants(&s, 2.0 / std::f64::consts::SQRT_2, &p);
        assert!(c.gamma1_exists && !c.gamma2_exists);
    }

    #[test]
    fn derived_relations() {
        let s = Spectrum {
            norm: 2.0,
            min_eig_aat: 0.5,
            kappa: 8.0,
        };
        let p = select_parameters(&s, 0.7, 0.5).unwrap();
        let c = derive_constants(&s, 0.7, &p).with_lojasiewicz_constant(2.0);
        assert_eq!(c.c8, 1.0 / c.min_descent_constant());
        assert_eq!(c.c9, c.c5.max(c.c6).max(c.c7));
        assert_eq!(c.c10, Some(c.c8 / (3.0 * (2.0 * c.c9).powi(2))));
        assert_eq!(c.c12, (s.norm + 2.0 / (p.sigma * p.beta)) * c.c11);
        assert_eq!(c.c11, 2.0 * (3.0 * c.c8).sqrt() + 3.0 * c.c8 * c.c9);
    }

    /// Identity operator, L = 1/sqrt(2) (so nu = 1), safety 0.5.
    #[test]
    fn identity_selection_fixture() {
        let s = identity_spectrum();
        let l = 1.0 / std::f64::consts::SQRT_2;
        let p = select_parameters(&s, l, 0.5).unwrap();
        assert!((p.sigma - 1.0 / 48.0).abs() < 1e-17);

        // independent evaluation of the beta bound at sigma = 1/48
        let sig: f64 = 1.0 / 48.0;
        let beta_bar = 4.0 / (1.0 - 24.0 * sig) * (4.0 + 3.0 * sig + (24.0 + 24.0 * sig + 9.0 * sig * sig - 192.0 * sig).sqrt());
        assert!((beta_bar - 68.724_991_373_359_91).abs() < 1e-9, "{beta_bar}");
        assert!((p.beta - 1.5 * beta_bar).abs() < 1e-12 * p.beta);

        let c = derive_constants(&s, l, &p);
        assert!(c.delta_tau_prime > 0.0);
        assert!(2.0 * p.tau >= p.beta);
        let report = validate(&p, &c, &s);
        assert!(report.assumptions_hold(), "{report:?}");
        assert!(report.in_sufficient_region(), "{report:?}");
    }

    #[test]
    fn sigma_outside_region() {
        let s = identity_spectrum();
        let p = SolverParams::new(100.0, 200.0, 300.0, 0.05).unwrap();
        let c = derive_constants(&s, 1.0, &p);
        let r = validate(&p, &c, &s);
        assert!(!r.check("region_sigma").unwrap().passed);
        assert!(!r.in_sufficient_region());
    }

    #[test]
    fn tau_below_half_norm_fails() {
        let s = Spectrum {
            norm: 2.0,
            min_eig_aat: 1.0,
            kappa: 4.0,
        };
        let beta = 10.0;
        let p = SolverParams::new(100.0, beta, beta * 4.0 / 4.0, 0.01).unwrap();
        let c = derive_constants(&s, 1.0, &p);
        let r = validate(&p, &c, &s);
        assert!(!r.check("tau_dominates_norm").unwrap().passed);
        assert!(!r.assumptions_hold());
    }

    #[test]
    fn c2_increases_then_decreases_in_tau() {
        // C2 is a concave quadratic in tau: re-evaluate on a grid and compare
        // with the closed-form vertex.
        let s = identity_spectrum();
        let l = 1.0;
        let p = select_parameters(&s, l, 0.5).unwrap();
        let (lo, hi) = tau_interval(&s, l, p.beta, p.sigma);
        let c2_at = |tau: f64| derive_constants(&s, l, &SolverParams { tau, ..p }).c2;
        assert!(c2_at(lo + 1e-6 * (hi - lo)) > 0.0);
        assert!(c2_at(hi - 1e-6 * (hi - lo)) > 0.0);
        assert!(c2_at(hi + 0.01 * (hi - lo)) < 0.0);
        let ell = l * std::f64::consts::SQRT_2;
        let vertex = (1.0 - 16.0 * ell / p.beta) * p.beta / (24.0 * p.sigma);
        let below = c2_at(vertex * 0.99);
        let at = c2_at(vertex);
        let above = c2_at(vertex * 1.01);
        assert!(at > below && at > above);
    }

    #[test]
    fn selection_rejects_bad_inputs() {
        let s = identity_spectrum();
        assert!(select_parameters(&s, 1.0, 1.0).is_err());
        assert!(select_parameters(&s, 0.0, 0.5).is_err());
        let sing = Spectrum {
            norm: 1.0,
            min_eig_aat: 0.0,
            kappa: f64::INFINITY,
        };
        assert!(matches!(select_parameters(&sing, 1.0, 0.5), Err(Error::NotSurjective { .. })));
        assert!(SolverParams::new(1.0, 1.0, 1.0, 1.5).is_err());
        assert!(SolverParams::new(1.0, -1.0, 1.0, 0.5).is_err());
    }
}
