//! End-to-end experiments: A-free oscillation and concentration sequences,
//! lower semicontinuity, relaxation by recovery sequences and Jensen-type
//! inequalities for atomic Young measures.

mod jensen;
mod lsc;
mod relax;
mod sequences;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{builtin_operator, OperatorSpec};

pub use jensen::{
    jensen_check, AtomicMeasure, JensenCase, JensenConfig, JensenLocation, OneHomogeneous,
    RegularCase, SingularCase,
};
pub use lsc::{lsc_experiment, Family, LscConfig};
pub use relax::{relaxation_experiment, RelaxConfig, Target};
pub use sequences::{
    check_kernel, concentration_limit, concentration_sequence, oscillation_sequence, KERNEL_TOL,
};

/// Operator reference inside a config: a built-in by name, a path to an
/// operator file, or an inline operator object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpRef {
    Builtin {
        builtin: String,
        d: usize,
        #[serde(default = "one")]
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeff: Option<Vec<Vec<f64>>>,
    },
    Path(String),
    Inline(serde_json::Value),
}

fn one() -> usize {
    1
}

impl OpRef {
    /// Relative paths are resolved against `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<OperatorSpec> {
        match self {
            OpRef::Builtin {
                builtin,
                d,
                m,
                coeff,
            } => {
                let mat = match coeff {
                    Some(rows) => {
                        let r = rows.len();
                        let c = rows.first().map_or(0, Vec::len);
                        if rows.iter().any(|row| row.len() != c) {
                            return Err(Error::Shape("ragged coefficient matrix".into()));
                        }
                        Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
                    }
                    None => None,
                };
                builtin_operator(builtin, *d, *m, mat.as_ref())
            }
            OpRef::Path(p) => {
                let path = match base {
                    Some(b) if Path::new(p).is_relative() => b.join(p),
                    _ => Path::new(p).to_path_buf(),
                };
                OperatorSpec::from_json_str(&std::fs::read_to_string(path)?)
            }
            OpRef::Inline(v) => OperatorSpec::from_json_str(&v.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesRow {
    pub j: u32,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub series: Vec<SeriesRow>,
    pub limit_value: Option<f64>,
    /// Tail-minimum liminf estimate (lsc) or best achieved value (relax).
    pub estimate: Option<f64>,
    pub gap: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub as_expected: bool,
    pub details: serde_json::Value,
}

impl ExperimentReport {
    /// Columns `j,F_j,residual_j`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,F_j,residual_j")?;
        for row in &self.series {
            writeln!(w, "{},{:.17e},{:.17e}", row.j, row.value, row.residual)?;
        }
        Ok(())
    }
}

pub(crate) fn check_js(js: &[u32]) -> Result<()> {
    if js.is_empty() || js[0] == 0 || js.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "j-list must be nonempty, positive and strictly increasing, got {js:?}"
        )));
    }
    Ok(())
}

/// Minimum over the final third of a series.
pub fn tail_minimum(values: &[f64]) -> f64 {
    let start = values.len() - values.len().div_ceil(3);
    values[start..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
