use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::functions::{ProxFunction, SmoothCoupling};
use crate::linop::DenseOperator;

/// Which boundedness hypotheses an instance satisfies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    pub h_coercive: bool,
    pub a_invertible: bool,
    pub f_coercive: bool,
    pub g_coercive: bool,
}

impl AssumptionFlags {
    /// Either `H` is coercive, or `A` is invertible and both `F` and `G` are.
    pub fn boundedness_guaranteed(&self) -> bool {
        self.h_coercive || (self.a_invertible && self.f_coercive && self.g_coercive)
    }
}

/// A point `(x, y, z, u)` of the primal-dual space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

/// `min F(Ax) + G(y) + H(x, y)` over `x in R^m`, `y in R^q`, with `A: R^m -> R^p`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub f: ProxFunction,
    pub g: ProxFunction,
    pub h: SmoothCoupling,
    pub a: DenseOperator,
    pub q: usize,
    pub flags: AssumptionFlags,
    pub analytic_solution: Option<PrimalDualPoint>,
    /// A known value of `inf H`, when one is available.
    pub inf_h: Option<f64>,
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(name: impl Into<String>, f: ProxFunction, g: ProxFunction, h: SmoothCoupling, a: DenseOperator, q: usize) -> Result<Self> {
        f.validate()?;
        g.validate()?;
        if let Some(quad) = h.as_quadratic() {
            let k = quad.k_rows();
            let mm = quad.m_rows();
            if let Some(row) = k.first() {
                check_len("H: K columns vs A columns", a.cols(), row.len())?;
            }
            if let Some(row) = mm.first() {
                check_len("H: M columns vs y dimension", q, row.len())?;
            }
        }
        Ok(Self {
            name: name.into(),
            f,
            g,
            h,
            a,
            q,
            flags: AssumptionFlags::default(),
            analytic_solution: None,
            inf_h: None,
            seed: None,
        })
    }

    /// `(m, q, p)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.cols(), self.q, self.a.rows())
    }

    /// `inf F + inf G + inf H` when `inf H` is known.
    pub fn psi_lower_bound_hint(&self) -> Option<f64> {
        self.inf_h
            .map(|ih| self.f.lower_bound() + self.g.lower_bound() + ih)
    }

    /// `F(Ax) + G(y) + H(x, y)`
    pub fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        let ax = self.a.apply_unchecked(x);
        self.f.evaluate(&ax) + self.g.evaluate(y) + self.h.value(x, y)
    }
}
