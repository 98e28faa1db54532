use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExperimentReport, OpRef, Verdict};
use crate::envelope::{envelope_recession, EnvelopeConfig};
use crate::error::{Error, Result};
use crate::integrand::{Integrand, IntegrandSpec, RecessionMode};
use crate::linalg::norm;
use crate::operator::OperatorSpec;
use crate::sphere::SphereSampling;
use crate::wave_cone::{wavecone_membership, wavecone_span};

/// `Σ_k w_k δ_{P_k}` with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub weights: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl AtomicMeasure {
    fn check(&self, n: usize, unit: bool) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.points.len() {
            return Err(Error::Shape(
                "atomic measure needs one weight per point".into(),
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidArgument(
                "atomic weights must be nonnegative and sum to one".into(),
            ));
        }
        for p in &self.points {
            if p.len() != n {
                return Err(Error::Shape(format!("atom of length {} in R^{n}", p.len())));
            }
            if unit && (norm(p) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "atoms of ν^∞ must lie on the unit sphere".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.points[0].len()];
        for (w, p) in self.weights.iter().zip(&self.points) {
            for (bi, pi) in b.iter_mut().zip(p) {
                *bi += w * pi;
            }
        }
        b
    }
}

/// A positively 1-homogeneous function `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OneHomogeneous {
    /// `g = f^#`, analytic when available and the upper estimate otherwise.
    Recession { integrand: IntegrandSpec },
    /// `g = (Q_A f)^#` tabulated from envelope ratios on `t_grid`.
    EnvelopeRecession {
        integrand: IntegrandSpec,
        #[serde(default = "default_t_grid")]
        t_grid: Vec<f64>,
        #[serde(default = "small_envelope")]
        envelope: EnvelopeConfig,
    },
}

fn default_t_grid() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}

fn small_envelope() -> EnvelopeConfig {
    EnvelopeConfig {
        grid: vec![32, 32],
        restarts: 4,
        max_iters: 200,
        ..EnvelopeConfig::default()
    }
}

impl OneHomogeneous {
    fn eval(&self, op: &OperatorSpec, p: &[f64]) -> Result<f64> {
        let r = norm(p);
        if r == 0.0 {
            return Ok(0.0);
        }
        let x0 = vec![0.0; op.dim()];
        match self {
            OneHomogeneous::Recession { integrand } => recession(&integrand.build()?, &x0, p),
            OneHomogeneous::EnvelopeRecession {
                integrand,
                t_grid,
                envelope,
            } => {
                let f = integrand.build()?;
                Ok(envelope_recession(op, &f, &x0, p, t_grid, envelope)?.upper * r)
            }
        }
    }
}

fn recession(f: &Integrand, x: &[f64], p: &[f64]) -> Result<f64> {
    let mode = if f.has_recession() {
        RecessionMode::Analytic
    } else {
        RecessionMode::Upper
    };
    f.recession_value(x, p, mode)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularCase {
    pub nu: AtomicMeasure,
    /// Density `dλ/dL^d` at the sampled point.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub nu_inf: Option<AtomicMeasure>,
    pub h: IntegrandSpec,
    #[serde(default = "tight")]
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularCase {
    pub nu_inf: AtomicMeasure,
    pub g: OneHomogeneous,
    #[serde(default = "tight")]
    pub tol: f64,
}

fn tight() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JensenLocation {
    Regular,
    Singular,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JensenConfig {
    pub op: OpRef,
    #[serde(default)]
    pub regular: Vec<RegularCase>,
    #[serde(default)]
    pub singular: Vec<SingularCase>,
    #[serde(default)]
    pub expect: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct JensenCase {
    pub location: JensenLocation,
    pub index: usize,
    pub barycenter: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub holds: bool,
    /// False when a hypothesis fails; the inequality is then reported only.
    pub checked: bool,
    pub hypotheses: serde_json::Value,
}

fn regular_case(op: &OperatorSpec, i: usize, c: &RegularCase) -> Result<JensenCase> {
    let n = op.state_dim();
    c.nu.check(n, false)?;
    if !(c.lambda >= 0.0) {
        return Err(Error::InvalidArgument(
            "λ-density must be nonnegative".into(),
        ));
    }
    let h = c.h.build()?;
    let x0 = vec![0.0; op.dim()];
    let mut bary = c.nu.barycenter();
    let mut rhs: f64 =
        c.nu.weights
            .iter()
            .zip(&c.nu.points)
            .map(|(w, p)| w * h.eval(&x0, p))
            .sum();
    if let Some(inf) = &c.nu_inf {
        inf.check(n, true)?;
        for (b, v) in bary.iter_mut().zip(inf.barycenter()) {
            *b += c.lambda * v;
        }
        for (w, p) in inf.weights.iter().zip(&inf.points) {
            rhs += c.lambda * w * recession(&h, &x0, p)?;
        }
    }
    let lhs = h.eval(&x0, &bary);
    Ok(JensenCase {
        location: JensenLocation::Regular,
        index: i,
        barycenter: bary,
        lhs,
        rhs,
        tol: c.tol,
        holds: lhs <= rhs + c.tol,
        checked: h.quasiconvex,
        hypotheses: json!({ "quasiconvex": h.quasiconvex }),
    })
}

fn singular_case(op: &OperatorSpec, i: usize, c: &SingularCase) -> Result<JensenCase> {
    c.nu_inf.check(op.state_dim(), true)?;
    let sampling = SphereSampling::default_for(op.dim());
    let bary = c.nu_inf.barycenter();
    let member = if norm(&bary) == 0.0 {
        true
    } else {
        wavecone_membership(op, &bary, &sampling)?.member
    };
    let span = wavecone_span(op, &sampling);
    let support_dist = c
        .nu_inf
        .points
        .iter()
        .map(|p| span.distance(p))
        .fold(0.0, f64::max);
    let in_span = support_dist <= 1e-8;
    let lhs = c.g.eval(op, &bary)?;
    let mut rhs = 0.0;
    for (w, p) in c.nu_inf.weights.iter().zip(&c.nu_inf.points) {
        rhs += w * c.g.eval(op, p)?;
    }
    Ok(JensenCase {
        location: JensenLocation::Singular,
        index: i,
        barycenter: bary,
        lhs,
        rhs,
        tol: c.tol,
        holds: lhs <= rhs + c.tol,
        checked: member && in_span,
        hypotheses: json!({
            "barycenter_in_wave_cone": member,
            "support_in_span": in_span,
            "support_distance": support_dist,
        }),
    })
}

/// Jensen-type inequalities at regular points (`location = Regular`), at
/// singular points (`Singular`) or both (`None`). Cases whose hypotheses fail
/// are reported with `checked = false` and do not affect the verdict.
pub fn jensen_check(
    cfg: &JensenConfig,
    location: Option<JensenLocation>,
    base: Option<&Path>,
) -> Result<ExperimentReport> {
    let op = cfg.op.resolve(base)?;
    let mut cases = Vec::new();
    if location != Some(JensenLocation::Singular) {
        for (i, c) in cfg.regular.iter().enumerate() {
            cases.push(regular_case(&op, i, c)?);
        }
    }
    if location != Some(JensenLocation::Regular) {
        for (i, c) in cfg.singular.iter().enumerate() {
            cases.push(singular_case(&op, i, c)?);
        }
    }
    let checked: Vec<&JensenCase> = cases.iter().filter(|c| c.checked).collect();
    let gap = checked
        .iter()
        .map(|c| c.rhs - c.lhs)
        .fold(f64::INFINITY, f64::min);
    let verdict = if !checked.is_empty() && checked.iter().all(|c| c.holds) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let tol = checked.iter().map(|c| c.tol).fold(0.0, f64::max);
    Ok(ExperimentReport {
        experiment: "jensen".into(),
        series: Vec::new(),
        limit_value: None,
        estimate: None,
        gap: if gap.is_finite() { gap } else { 0.0 },
        tol,
        verdict,
        expected: cfg.expect,
        as_expected: verdict == cfg.expect,
        details: json!({
            "cases": cases,
            "hypothesis_violations": cases.iter().filter(|c| !c.checked).count(),
        }),
    })
}
