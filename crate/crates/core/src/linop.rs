//! Dense linear operators `A: R^m -> R^p` together with the spectral data
//! every step-size and constant formula depends on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Relative cutoff below which `lambda_min(AA^T)` is treated as zero.
pub const SURJECTIVITY_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// `||A||`, `lambda_min(AA^T)` and the condition number `kappa(AA^T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub norm: f64,
    pub min_eig_aat: f64,
    pub kappa: f64,
}

impl Spectrum {
    pub fn norm_sq(&self) -> f64 {
        self.norm * self.norm
    }

    pub fn is_surjective(&self) -> bool {
        self.min_eig_aat > SURJECTIVITY_TOL * self.norm_sq()
    }
}

/// Row-major dense matrix with cached spectral quantities.
///
/// Immutable after construction, so a single operator can be shared by any
/// number of concurrent solver runs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    spectrum: Spectrum,
}

impl DenseOperator {
    /// Builds an operator from row-major `entries` of shape `rows x cols`.
    ///
    /// Rank-deficient matrices are accepted; the caller checks
    /// [`DenseOperator::require_surjective`] when the constants need it.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid("operator must have at least one row and column".into()));
        }
        check_len("operator entries", rows * cols, entries.len())?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("operator entries must be finite".into()));
        }
        let spectrum = match spectral_quantities(rows, cols, &entries) {
            Ok(s) => s,
            Err(Error::NotSurjective { min_eig, norm_sq }) => Spectrum {
                norm: norm_sq.sqrt(),
                min_eig_aat: min_eig.max(0.0),
                kappa: f64::INFINITY,
            },
            Err(e) => return Err(e),
        };
        Ok(Self {
            rows,
            cols,
            entries,
            spectrum,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(p * m);
        for row in rows {
            check_len("operator row", m, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(p, m, entries)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            entries[i * n + i] = *d;
        }
        Self::new(n, n, entries)
    }

    /// Forward-difference operator of shape `(m-1) x m` with rows `e_{i+1} - e_i`.
    pub fn first_difference(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Invalid("first difference needs m >= 2".into()));
        }
        let mut entries = vec![0.0; (m - 1) * m];
        for i in 0..m - 1 {
            entries[i * m + i] = -1.0;
            entries[i * m + i + 1] = 1.0;
        }
        Self::new(m - 1, m, entries)
    }

    /// Loads a comma-separated matrix, one row per line. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Invalid(format!("matrix csv: {e}")))?;
            let row = record
                .iter()
                .map(|cell| {
                    cell.parse::<f64>().map_err(|e| {
                        Error::Invalid(format!("matrix csv row {}: `{cell}`: {e}", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn norm(&self) -> f64 {
        self.spectrum.norm
    }

    pub fn min_eig_aat(&self) -> f64 {
        self.spectrum.min_eig_aat
    }

    pub fn kappa(&self) -> f64 {
        self.spectrum.kappa
    }

    pub fn is_surjective(&self) -> bool {
        self.spectrum.is_surjective()
    }

    pub fn require_surjective(&self) -> Result<&Spectrum> {
        if self.is_surjective() {
            Ok(&self.spectrum)
        } else {
            Err(Error::NotSurjective {
                min_eig: self.spectrum.min_eig_aat,
                norm_sq: self.spectrum.norm_sq(),
            })
        }
    }

    /// `A x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply", self.cols, x.len())?;
        Ok(self.apply_unchecked(x))
    }

    /// `A^T v`
    pub fn adjoint_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint_apply", self.rows, v.len())?;
        Ok(self.adjoint_apply_unchecked(v))
    }

    /// `B x = tau x - beta A^T A x`
    pub fn coupling_matrix_apply(&self, tau: f64, beta: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_len("coupling_matrix_apply", self.cols, x.len())?;
        Ok(self.coupling_matrix_apply_unchecked(tau, beta, x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub(crate) fn adjoint_apply_unchecked(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, vi) in self.entries.chunks_exact(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    pub(crate) fn coupling_matrix_apply_unchecked(&self, tau: f64, beta: f64, x: &[f64]) -> Vec<f64> {
        let atax = self.adjoint_apply_unchecked(&self.apply_unchecked(x));
        x.iter()
            .zip(&atax)
            .map(|(xi, gi)| tau * xi - beta * gi)
            .collect()
    }
}

/// Computes `||A||`, `lambda_min(AA^T)` and `kappa(AA^T)` from the row-major
/// `rows x cols` matrix `entries` using a cyclic Jacobi eigensolver on the
/// Gram matrices.
///
/// Returns [`Error::NotSurjective`] when `lambda_min(AA^T) <= 1e-12 ||A||^2`.
pub fn spectral_quantities(rows: usize, cols: usize, entries: &[f64]) -> Result<Spectrum> {
    if rows == 0 || cols == 0 {
        return Err(Error::Invalid("spectral quantities of an empty matrix".into()));
    }
    check_len("spectral_quantities", rows * cols, entries.len())?;

    let aat = gram_rows(rows, cols, entries);
    let eig_aat = symmetric_eigenvalues(rows, aat);
    let max_eig = if rows <= cols {
        eig_aat.iter().copied().fold(0.0, f64::max)
    } else {
        let ata = gram_cols(rows, cols, entries);
        symmetric_eigenvalues(cols, ata)
            .into_iter()
            .fold(0.0, f64::max)
    };
    let min_eig = if rows > cols {
        0.0
    } else {
        eig_aat.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let norm_sq = max_eig.max(0.0);
    if norm_sq == 0.0 || min_eig <= SURJECTIVITY_TOL * norm_sq {
        return Err(Error::NotSurjective { min_eig, norm_sq });
    }
    Ok(Spectrum {
        norm: norm_sq.sqrt(),
        min_eig_aat: min_eig,
        kappa: norm_sq / min_eig,
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_max_eigenvalue(n: usize, matrix: Vec<f64>) -> f64 {
    symmetric_eigenvalues(n, matrix)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues (unsorted) of the symmetric `n x n` row-major matrix by the
/// cyclic Jacobi method.
pub fn symmetric_eigenvalues(n: usize, mut a: Vec<f64>) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn gram_rows(rows: usize, cols: usize, entries: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; rows * rows];
    for i in 0..rows {
        for j in i..rows {
            let ri = &entries[i * cols..(i + 1) * cols];
            let rj = &entries[j * cols..(j + 1) * cols];
            let v: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            g[i * rows + j] = v;
            g[j * rows + i] = v;
        }
    }
    g
}

fn gram_cols(rows: usize, cols: usize, entries: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in i..cols {
            let v: f64 = (0..rows)
                .map(|k| entries[k * cols + i] * entries[k * cols + j])
                .sum();
            g[i * cols + j] = v;
            g[j * cols + i] = v;
        }
    }
    g
}
