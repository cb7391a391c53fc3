//! Oracles for the nonsmooth terms `F`, `G` (value and proximal map) and
//! the smooth coupling `H` (value, block gradients, Lipschitz constant).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linop::symmetric_max_eigenvalue;

/// Value returned outside the domain of an extended-real function. IEEE
/// infinity propagates through sums and compares above every finite value.
pub const PLUS_INFINITY: f64 = f64::INFINITY;

/// Catalog of proximable functions. All are separable over coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxFunction {
    /// `0`
    Zero,
    /// `weight * ||v||_1`
    L1 { weight: f64 },
    /// `weight * #{i : v_i != 0}`
    L0 { weight: f64 },
    /// `weight / 2 * ||v||^2`
    SquaredL2 { weight: f64 },
    /// `0` on `[lo, hi]^d`, `+inf` elsewhere.
    BoxIndicator { lo: f64, hi: f64 },
}

impl ProxFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::L1 { weight } | Self::L0 { weight } | Self::SquaredL2 { weight } => {
                if weight.is_finite() && weight >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!("weight must be finite and >= 0, got {weight}")))
                }
            }
            Self::BoxIndicator { lo, hi } => {
                if lo <= hi && !lo.is_nan() && !hi.is_nan() {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!("empty box [{lo}, {hi}]")))
                }
            }
        }
    }

    /// A finite `b` with `evaluate(v) >= b` for every `v`.
    pub fn lower_bound(&self) -> f64 {
        0.0
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Whether the function tends to `+inf` as `||v|| -> inf`.
    pub fn is_coercive(&self) -> bool {
        match *self {
            Self::Zero | Self::L0 { .. } => false,
            Self::L1 { weight } | Self::SquaredL2 { weight } => weight > 0.0,
            Self::BoxIndicator { lo, hi } => lo.is_finite() && hi.is_finite(),
        }
    }

    pub fn evaluate(&self, v: &[f64]) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::L1 { weight } => weight * v.iter().map(|x| x.abs()).sum::<f64>(),
            Self::L0 { weight } => weight * v.iter().filter(|x| **x != 0.0).count() as f64,
            Self::SquaredL2 { weight } => 0.5 * weight * v.iter().map(|x| x * x).sum::<f64>(),
            Self::BoxIndicator { lo, hi } => {
                if v.iter().all(|x| *x >= lo && *x <= hi) {
                    0.0
                } else {
                    PLUS_INFINITY
                }
            }
        }
    }

    /// An element of `argmin_w f(w) + 1/(2 gamma) ||v - w||^2`.
    ///
    /// When the minimizer is not unique the one of smallest norm is
    /// returned; for `L0` the tie `|v_i| = sqrt(2 gamma weight)` maps to 0.
    pub fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        debug_assert!(gamma > 0.0);
        match *self {
            Self::Zero => v.to_vec(),
            Self::L1 { weight } => {
                let t = gamma * weight;
                v.iter().map(|&x| soft_threshold(x, t)).collect()
            }
            Self::L0 { weight } => {
                let t = (2.0 * gamma * weight).sqrt();
                v.iter()
                    .map(|&x| if x.abs() > t { x } else { 0.0 })
                    .collect()
            }
            Self::SquaredL2 { weight } => {
                let s = 1.0 / (1.0 + gamma * weight);
                v.iter().map(|&x| s * x).collect()
            }
            Self::BoxIndicator { lo, hi } => v.iter().map(|&x| x.clamp(lo, hi)).collect(),
        }
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Dense quadratic coupling `H(x, y) = weight / 2 * ||K x + M y - b||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoupling {
    rows: usize,
    m: usize,
    q: usize,
    k: Vec<f64>,
    mm: Vec<f64>,
    b: Vec<f64>,
    weight: f64,
}

impl QuadraticCoupling {
    /// `k` is `rows x m`, `mm` is `rows x q`, both row-major.
    pub fn new(rows: usize, m: usize, q: usize, k: Vec<f64>, mm: Vec<f64>, b: Vec<f64>, weight: f64) -> Result<Self> {
        check_len("quadratic K", rows * m, k.len())?;
        check_len("quadratic M", rows * q, mm.len())?;
        check_len("quadratic b", rows, b.len())?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Invalid(format!("quadratic weight must be >= 0, got {weight}")));
        }
        Ok(Self { rows, m, q, k, mm, b, weight })
    }

    pub fn from_rows(k: &[Vec<f64>], mm: &[Vec<f64>], b: Vec<f64>, weight: f64) -> Result<Self> {
        let rows = b.len();
        check_len("quadratic K rows", rows, k.len())?;
        check_len("quadratic M rows", rows, mm.len())?;
        let m = k.first().map_or(0, Vec::len);
        let q = mm.first().map_or(0, Vec::len);
        let mut kf = Vec::with_capacity(rows * m);
        for r in k {
            check_len("quadratic K row", m, r.len())?;
            kf.extend_from_slice(r);
        }
        let mut mf = Vec::with_capacity(rows * q);
        for r in mm {
            check_len("quadratic M row", q, r.len())?;
            mf.extend_from_slice(r);
        }
        Self::new(rows, m, q, kf, mf, b, weight)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn k_rows(&self) -> Vec<Vec<f64>> {
        if self.m == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.k.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    pub fn m_rows(&self) -> Vec<Vec<f64>> {
        if self.q == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.mm.chunks(self.q).map(<[f64]>::to_vec).collect()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn residual(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let kx: f64 = self.k[r * self.m..(r + 1) * self.m]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum();
                let my: f64 = self.mm[r * self.q..(r + 1) * self.q]
                    .iter()
                    .zip(y)
                    .map(|(a, b)| a * b)
                    .sum();
                kx + my - self.b[r]
            })
            .collect()
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * self.weight * self.residual(x, y).iter().map(|r| r * r).sum::<f64>()
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let r = self.residual(x, y);
        let mut g = vec![0.0; self.m];
        for (row, ri) in r.iter().enumerate() {
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += self.k[row * self.m + j] * ri;
            }
        }
        g.iter_mut().for_each(|v| *v *= self.weight);
        g
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let r = self.residual(x, y);
        let mut g = vec![0.0; self.q];
        for (row, ri) in r.iter().enumerate() {
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += self.mm[row * self.q + j] * ri;
            }
        }
        g.iter_mut().for_each(|v| *v *= self.weight);
        g
    }

    /// Spectral norm of the Hessian `weight * [K M]^T [K M]`, computed as the
    /// largest eigenvalue of the smaller Gram matrix of `[K M]`.
    fn hessian_norm(&self) -> f64 {
        let n = self.m + self.q;
        let row = |r: usize, j: usize| {
            if j < self.m {
                self.k[r * self.m + j]
            } else {
                self.mm[r * self.q + j - self.m]
            }
        };
        let lmax = if self.rows <= n {
            let mut g = vec![0.0; self.rows * self.rows];
            for i in 0..self.rows {
                for j in i..self.rows {
                    let v: f64 = (0..n).map(|c| row(i, c) * row(j, c)).sum();
                    g[i * self.rows + j] = v;
                    g[j * self.rows + i] = v;
                }
            }
            symmetric_max_eigenvalue(self.rows, g)
        } else {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..self.rows).map(|r| row(r, i) * row(r, j)).sum();
                    g[i * n + j] = v;
                    g[j * n + i] = v;
                }
            }
            symmetric_max_eigenvalue(n, g)
        };
        self.weight * lmax.max(0.0)
    }
}

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// User-registered smooth coupling: value and block gradients as callbacks,
/// with a declared Lipschitz constant valid on the box `[lo, hi]^(m+q)`.
#[derive(Clone)]
pub struct CustomCoupling {
    pub name: String,
    pub value: Arc<ValueFn>,
    pub grad_x: Arc<GradFn>,
    pub grad_y: Arc<GradFn>,
    pub lipschitz: f64,
    pub domain_box: (f64, f64),
}

impl fmt::Debug for CustomCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCoupling")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("domain_box", &self.domain_box)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum CouplingKind {
    Quadratic(QuadraticCoupling),
    Custom(CustomCoupling),
}

/// The smooth term `H(x, y)` with a Lipschitz constant `L` for its full
/// gradient; the block constants are all taken as `L * sqrt(2)`.
#[derive(Debug, Clone)]
pub struct SmoothCoupling {
    kind: CouplingKind,
    lipschitz: f64,
}

impl SmoothCoupling {
    /// Quadratic coupling with `L` set to the exact spectral norm of the Hessian.
    ///
    /// A vanishing Hessian gets `L = f64::EPSILON`, since every positive number
    /// is a valid constant for a constant gradient.
    pub fn quadratic(q: QuadraticCoupling) -> Self {
        let lipschitz = q.hessian_norm().max(f64::EPSILON);
        Self {
            kind: CouplingKind::Quadratic(q),
            lipschitz,
        }
    }

    /// Separable quadratic `1/2 ||P x - c||^2 + 1/2 ||R y - d||^2`, built as a
    /// block-stacked [`QuadraticCoupling`].
    pub fn separable(p: &[Vec<f64>], c: &[f64], r: &[Vec<f64>], d: &[f64], m: usize, q: usize) -> Result<Self> {
        let rows = c.len() + d.len();
        let mut k = Vec::with_capacity(rows);
        let mut mm = Vec::with_capacity(rows);
        for row in p {
            check_len("separable P row", m, row.len())?;
            k.push(row.clone());
            mm.push(vec![0.0; q]);
        }
        for row in r {
            check_len("separable R row", q, row.len())?;
            k.push(vec![0.0; m]);
            mm.push(row.clone());
        }
        let mut b = c.to_vec();
        b.extend_from_slice(d);
        if k.len() != rows {
            return Err(Error::Invalid("separable: row counts of P/R must match c/d".into()));
        }
        let quad = QuadraticCoupling::new(
            rows,
            m,
            q,
            k.concat(),
            mm.concat(),
            b,
            1.0,
        )?;
        Ok(Self::quadratic(quad))
    }

    pub fn custom(c: CustomCoupling) -> Result<Self> {
        if !(c.lipschitz.is_finite() && c.lipschitz > 0.0) {
            return Err(Error::Invalid("custom coupling needs a declared L > 0".into()));
        }
        let lipschitz = c.lipschitz;
        Ok(Self {
            kind: CouplingKind::Custom(c),
            lipschitz,
        })
    }

    /// Replaces `L` by a larger declared constant.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= self.lipschitz && lipschitz.is_finite()) {
            return Err(Error::Invalid(format!(
                "declared L = {lipschitz} is below the certified {}",
                self.lipschitz
            )));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticCoupling> {
        match &self.kind {
            CouplingKind::Quadratic(q) => Some(q),
            CouplingKind::Custom(_) => None,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `L * sqrt(2)`, the common value of the block constants.
    pub fn ell_plus(&self) -> f64 {
        self.lipschitz * std::f64::consts::SQRT_2
    }

    /// Box on which `L` is asserted. Quadratics are globally Lipschitz.
    pub fn domain_box(&self) -> (f64, f64) {
        match &self.kind {
            CouplingKind::Quadratic(_) => (f64::NEG_INFINITY, f64::INFINITY),
            CouplingKind::Custom(c) => c.domain_box,
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            CouplingKind::Quadratic(q) => q.value(x, y),
            CouplingKind::Custom(c) => (c.value)(x, y),
        }
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.kind {
            CouplingKind::Quadratic(q) => q.grad_x(x, y),
            CouplingKind::Custom(c) => (c.grad_x)(x, y),
        }
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.kind {
            CouplingKind::Quadratic(q) => q.grad_y(x, y),
            CouplingKind::Custom(c) => (c.grad_y)(x, y),
        }
    }

    /// Largest observed ratio `|||grad H(a) - grad H(b)||| / |||a - b|||` over
    /// the given pairs of points `(x, y)`.
    pub fn sampled_lipschitz_ratio(&self, pairs: &[((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))]) -> f64 {
        let mut worst: f64 = 0.0;
        for ((xa, ya), (xb, yb)) in pairs {
            let gx = crate::vector::sub(&self.grad_x(xa, ya), &self.grad_x(xb, yb));
            let gy = crate::vector::sub(&self.grad_y(xa, ya), &self.grad_y(xb, yb));
            let num = crate::vector::product_norm(&[&gx, &gy]);
            let dx = crate::vector::sub(xa, xb);
            let dy = crate::vector::sub(ya, yb);
            let den = crate::vector::product_norm(&[&dx, &dy]);
            if den > 0.0 {
                worst = worst.max(num / den);
            }
        }
        worst
    }
}
