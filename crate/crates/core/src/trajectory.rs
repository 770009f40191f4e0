//! Run output and its CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::TrajectoryRecord;
use crate::error::Error;
use crate::solvers::{EvalPoint, Method, SolverState};

pub const CSV_HEADER: [&str; 10] = [
    "k",
    "F_gap",
    "eta",
    "psi",
    "E",
    "bound",
    "residual_y",
    "residual_z",
    "grad_drift",
    "y_increment",
];

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: Method,
    pub eval_point: EvalPoint,
    pub step: f64,
    pub lipschitz: f64,
    pub strong_convexity: f64,
    pub instance: Option<String>,
    pub records: Vec<TrajectoryRecord>,
    pub final_state: SolverState,
    pub divergence: Option<Error>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl Trajectory {
    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.f_gap)
    }

    /// `min_k (bound_k − F_gap_k)` over records that carry a bound.
    pub fn bound_slack_min(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.bound.map(|b| b - r.f_gap))
            .reduce(f64::min)
    }

    pub fn csv_row(record: &TrajectoryRecord) -> [String; 10] {
        [
            record.k.to_string(),
            format_float(record.f_gap),
            opt(record.eta.map(|c| c.value)),
            format_float(record.psi.value),
            opt(record.energy.map(|e| e.value)),
            opt(record.bound),
            opt(record.residual_y),
            opt(record.residual_z),
            format_float(record.grad_drift),
            format_float(record.y_increment),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record(Self::csv_row(r))?;
        }
        w.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// JSON document with run metadata and the full record list.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Doc<'a> {
            method: Method,
            eval_point: EvalPoint,
            step: f64,
            instance: &'a Option<String>,
            divergence: Option<String>,
            records: &'a [TrajectoryRecord],
        }
        serde_json::to_value(Doc {
            method: self.method,
            eval_point: self.eval_point,
            step: self.step,
            instance: &self.instance,
            divergence: self.divergence.as_ref().map(|e| e.to_string()),
            records: &self.records,
        })
        .expect("records serialize")
    }
}

/// Writes `contents` to a sibling temporary file, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
