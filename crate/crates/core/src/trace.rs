//! Per-iteration records and their CSV / JSON serializations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::PrimalDualPoint;

pub const CSV_HEADER: &str =
    "n,psi,lagrangian,objective,feasibility,dx,dy,dz,du,subgrad_norm,kkt_gx,kkt_y,kkt_z,kkt_feas";

/// Stationarity and feasibility residuals at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    #[serde(with = "real")]
    pub grad_x: f64,
    #[serde(with = "real")]
    pub y: f64,
    #[serde(with = "real")]
    pub z: f64,
    #[serde(with = "real")]
    pub feas: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.grad_x.max(self.y).max(self.z).max(self.feas)
    }
}

/// Values recorded after iteration `n` (the state `(x_n, y_n, z_n, u_n, x_{n-1}, u_{n-1})`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    #[serde(with = "real")]
    pub psi: f64,
    #[serde(with = "real")]
    pub lagrangian: f64,
    #[serde(with = "real")]
    pub objective: f64,
    #[serde(with = "real")]
    pub feasibility: f64,
    #[serde(with = "real")]
    pub dx: f64,
    #[serde(with = "real")]
    pub dy: f64,
    #[serde(with = "real")]
    pub dz: f64,
    #[serde(with = "real")]
    pub du: f64,
    #[serde(with = "real")]
    pub subgrad_norm: f64,
    pub kkt: KktResidual,
}

impl IterationRecord {
    pub fn max_step(&self) -> f64 {
        self.dx.max(self.dy).max(self.dz).max(self.du)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `L_beta` at the starting point; `Psi` is undefined there.
    #[serde(with = "real")]
    pub initial_lagrangian: f64,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    /// `(x_n, y_n, z_n, u_n)` for `n = 0..=N` when iterate recording is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterates: Option<Vec<PrimalDualPoint>>,
    pub final_point: PrimalDualPoint,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn psi_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.psi).collect()
    }

    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("trace json: {e}")))
    }
}

/// Floats are written with 17 significant digits so the text round-trips.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn records_to_csv(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 300);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}", r.n);
        for v in [
            r.psi,
            r.lagrangian,
            r.objective,
            r.feasibility,
            r.dx,
            r.dy,
            r.dz,
            r.du,
            r.subgrad_norm,
            r.kkt.grad_x,
            r.kkt.y,
            r.kkt.z,
            r.kkt.feas,
        ] {
            out.push(',');
            out.push_str(&format_real(v));
        }
        out.push('\n');
    }
    out
}

/// Parses a trace CSV; the header must match [`CSV_HEADER`] exactly.
pub fn records_from_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Invalid(format!("trace csv header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != CSV_HEADER {
        return Err(Error::Invalid(format!(
            "trace csv header mismatch: expected `{CSV_HEADER}`, got `{headers}`"
        )));
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Invalid(format!("trace csv row {}: {e}", i + 2)))?;
        if row.len() != 14 {
            return Err(Error::Invalid(format!(
                "trace csv row {}: expected 14 fields, got {}",
                i + 2,
                row.len()
            )));
        }
        let n = row[0]
            .parse::<usize>()
            .map_err(|e| Error::Invalid(format!("trace csv row {} column n: {e}", i + 2)))?;
        let mut v = [0.0; 13];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = row[k + 1].parse::<f64>().map_err(|e| {
                Error::Invalid(format!("trace csv row {} column {}: {e}", i + 2, k + 2))
            })?;
        }
        records.push(IterationRecord {
            n,
            psi: v[0],
            lagrangian: v[1],
            objective: v[2],
            feasibility: v[3],
            dx: v[4],
            dy: v[5],
            dz: v[6],
            du: v[7],
            subgrad_norm: v[8],
            kkt: KktResidual {
                grad_x: v[9],
                y: v[10],
                z: v[11],
                feas: v[12],
            },
        });
    }
    Ok(records)
}

/// Serde adapter: finite floats as JSON numbers, non-finite ones as strings.
pub mod real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_real(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("not a real number: {t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(n: usize, psi: f64) -> IterationRecord {
        IterationRecord {
            n,
            psi,
            lagrangian: psi - 0.25,
            objective: 1.0 / 3.0,
            feasibility: 1e-300,
            dx: 0.1,
            dy: 0.0,
            dz: 2.5e-17,
            du: 7.0,
            subgrad_norm: f64::INFINITY,
            kkt: KktResidual {
                grad_x: 0.0,
                y: 1.0,
                z: -0.0,
                feas: std::f64::consts::PI,
            },
        }
    }

    #[test]
    fn csv_header_and_shape() {
        let csv = records_to_csv(&[record(1, 2.0), record(2, 1.5)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,2.0000000000000000e0,"));
        assert!(first.contains(",inf,"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let err = records_from_csv("n,psi\n1,2\n").unwrap_err();
        assert!(err.to_string().contains("header mismatch"));
    }

    #[test]
    fn json_round_trip_with_infinity() {
        let t = IterationTrace {
            initial_lagrangian: f64::INFINITY,
            records: vec![record(1, 0.1 + 0.2)],
            status: RunStatus::MaxIterations,
            iterates: None,
            final_point: PrimalDualPoint {
                x: vec![1.0],
                y: vec![],
                z: vec![1.0],
                u: vec![0.0],
            },
        };
        let back = IterationTrace::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn csv_round_trips_exactly(vals in proptest::collection::vec(proptest::num::f64::ANY, 13)) {
            let r = IterationRecord {
                n: 7,
                psi: vals[0], lagrangian: vals[1], objective: vals[2], feasibility: vals[3],
                dx: vals[4], dy: vals[5], dz: vals[6], du: vals[7], subgrad_norm: vals[8],
                kkt: KktResidual { grad_x: vals[9], y: vals[10], z: vals[11], feas: vals[12] },
            };
            let back = records_from_csv(&records_to_csv(&[r])).unwrap();
            let a = [r.psi, r.lagrangian, r.objective, r.feasibility, r.dx, r.dy, r.dz, r.du,
                     r.subgrad_norm, r.kkt.grad_x, r.kkt.y, r.kkt.z, r.kkt.feas];
            let b = &back[0];
            let bb = [b.psi, b.lagrangian, b.objective, b.feasibility, b.dx, b.dy, b.dz, b.du,
                      b.subgrad_norm, b.kkt.grad_x, b.kkt.y, b.kkt.z, b.kkt.feas];
            for (x, y) in a.iter().zip(bb.iter()) {
                prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }
}
