//! Linear-growth integrands `f(x, A)`, recession estimates, the
//! `S`-transform and midpoint convexity checks along wave-cone directions.

use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// `(a0, unit direction, |p|, nodes, values, slopes)` of a tabulated line.
type LineTable = (Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>, Vec<f64>);

pub type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// A pure function `f(x, A)` with `|f(x, A)| ≤ M(1 + |A|)` and optional
/// analytic recession function and subgradient in `A`.
#[derive(Clone)]
pub struct Integrand {
    pub name: String,
    eval: EvalFn,
    subgradient: Option<GradFn>,
    recession: Option<EvalFn>,
    pub growth_m: f64,
    pub lip_a: Option<f64>,
    /// Constant `c` of a linear modulus `ω(t) = c t`.
    pub modulus: Option<f64>,
    pub convex: bool,
    pub quasiconvex: bool,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("name", &self.name)
            .field("growth_m", &self.growth_m)
            .field("lip_a", &self.lip_a)
            .field("convex", &self.convex)
            .field("has_recession", &self.recession.is_some())
            .field("has_subgradient", &self.subgradient.is_some())
            .finish()
    }
}

impl Integrand {
    pub fn new<F>(name: impl Into<String>, growth_m: f64, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Integrand {
            name: name.into(),
            eval: Arc::new(eval),
            subgradient: None,
            recession: None,
            growth_m,
            lip_a: None,
            modulus: None,
            convex: false,
            quasiconvex: false,
        }
    }

    pub fn with_subgradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.subgradient = Some(Arc::new(g));
        self
    }

    pub fn with_recession<R>(mut self, r: R) -> Self
    where
        R: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.recession = Some(Arc::new(r));
        self
    }

    pub fn with_lipschitz(mut self, lip: f64) -> Self {
        self.lip_a = Some(lip);
        self
    }

    /// Marks the integrand convex (hence quasiconvex for every operator).
    pub fn convex(mut self) -> Self {
        self.convex = true;
        self.quasiconvex = true;
        self
    }

    pub fn eval(&self, x: &[f64], a: &[f64]) -> f64 {
        (self.eval)(x, a)
    }

    pub fn has_subgradient(&self) -> bool {
        self.subgradient.is_some()
    }

    pub fn has_recession(&self) -> bool {
        self.recession.is_some()
    }

    /// Writes a subgradient in `A` into `out`.
    pub fn subgradient(&self, x: &[f64], a: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.subgradient.as_ref().ok_or(Error::MissingSubgradient)?;
        g(x, a, out);
        Ok(())
    }

    pub fn analytic_recession(&self, x: &[f64], a: &[f64]) -> Option<f64> {
        self.recession.as_ref().map(|r| r(x, a))
    }

    /// Recession value in the requested mode; `Analytic` falls back to the
    /// upper estimate when no closed form is registered.
    pub fn recession_value(&self, x: &[f64], a: &[f64], mode: RecessionMode) -> Result<f64> {
        match mode {
            RecessionMode::Analytic => match self.analytic_recession(x, a) {
                Some(v) => Ok(v),
                None => Ok(estimate_recession_default(self, x, a)?.upper),
            },
            RecessionMode::Upper => Ok(estimate_recession_default(self, x, a)?.upper),
            RecessionMode::Lower => Ok(estimate_recession_default(self, x, a)?.lower),
        }
    }

    /// Largest ratio `|f(x, A)| / (M (1 + |A|))` over the given samples;
    /// at most one when the declared growth bound holds.
    pub fn growth_ratio(&self, samples: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        samples
            .iter()
            .map(|(x, a)| self.eval(x, a).abs() / (self.growth_m * (1.0 + norm(a))))
            .fold(0.0, f64::max)
    }

    /// Multiplies by the spatial weight `1 + c|x − x0|`. Growth and Lipschitz
    /// constants are adjusted for points of the unit cube around `x0`.
    pub fn with_x_weight(self, c: f64, x0: Vec<f64>) -> Self {
        let diam = (x0.len() as f64).sqrt();
        let w = Arc::new(move |x: &[f64]| {
            1.0 + c * x
                .iter()
                .zip(&x0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        });
        let scale = 1.0 + c.abs() * diam;
        Integrand {
            name: format!("{}_weighted", self.name),
            eval: {
                let (b, w) = (self.eval.clone(), w.clone());
                Arc::new(move |x, a| w(x) * b(x, a))
            },
            subgradient: self.subgradient.clone().map(|g| {
                let w = w.clone();
                Arc::new(move |x: &[f64], a: &[f64], out: &mut [f64]| {
                    g(x, a, out);
                    let s = w(x);
                    out.iter_mut().for_each(|v| *v *= s);
                }) as GradFn
            }),
            recession: self.recession.clone().map(|r| {
                let w = w.clone();
                Arc::new(move |x: &[f64], a: &[f64]| w(x) * r(x, a)) as EvalFn
            }),
            growth_m: self.growth_m * scale,
            lip_a: self.lip_a.map(|l| l * scale),
            modulus: Some(c.abs() * self.growth_m),
            convex: self.convex && c >= 0.0,
            quasiconvex: self.quasiconvex && c >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecessionMode {
    Analytic,
    Upper,
    Lower,
}

/// Serializable selector for the built-in integrands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum IntegrandKind {
    /// `|A|`
    Abs,
    /// `√(1 + |A|²)`
    Area,
    /// `dist(A, {−P, +P})`
    Twowell { well: Vec<f64> },
    /// `a|A| + b|A·e|`
    Aniso { a: f64, b: f64, e: Vec<f64> },
    /// `|A|(2 + sin(log(1 + |A|)))/2`, whose recession function does not exist.
    Oscillating,
    /// `f ≡ c`
    Constant { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XWeight {
    pub c: f64,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrandSpec {
    #[serde(flatten)]
    pub kind: IntegrandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<XWeight>,
}

impl IntegrandSpec {
    pub fn build(&self) -> Result<Integrand> {
        let f = build_kind(&self.kind)?;
        Ok(match &self.weight {
            Some(w) => f.with_x_weight(w.c, w.x0.clone()),
            None => f,
        })
    }

    /// Named built-in with default parameters for state dimension `n`:
    /// wells at `±e1`, anisotropy `|A| + |A·e1|`.
    pub fn named(name: &str, n: usize) -> Result<Self> {
        let e1 = {
            let mut e = vec![0.0; n.max(1)];
            e[0] = 1.0;
            e
        };
        let kind = match name {
            "abs" => IntegrandKind::Abs,
            "area" => IntegrandKind::Area,
            "twowell" => IntegrandKind::Twowell { well: e1 },
            "aniso" => IntegrandKind::Aniso {
                a: 1.0,
                b: 1.0,
                e: e1,
            },
            "oscillating" => IntegrandKind::Oscillating,
            "constant" => IntegrandKind::Constant { c: 1.0 },
            other => return Err(Error::UnknownName(other.to_string())),
        };
        Ok(IntegrandSpec { kind, weight: None })
    }
}

/// Names accepted by [`IntegrandSpec::named`].
pub const BUILTIN_NAMES: [&str; 6] = ["abs", "area", "twowell", "aniso", "oscillating", "constant"];

fn unit_or_zero(a: &[f64], out: &mut [f64]) {
    let n = norm(a);
    for (o, v) in out.iter_mut().zip(a) {
        *o = if n > 0.0 { v / n } else { 0.0 };
    }
}

fn build_kind(kind: &IntegrandKind) -> Result<Integrand> {
    Ok(match kind {
        IntegrandKind::Abs => Integrand::new("abs", 1.0, |_, a| norm(a))
            .with_recession(|_, a| norm(a))
            .with_subgradient(|_, a, out| unit_or_zero(a, out))
            .with_lipschitz(1.0)
            .convex(),
        IntegrandKind::Area => Integrand::new("area", 1.0, |_, a| (1.0 + dot(a, a)).sqrt())
            .with_recession(|_, a| norm(a))
            .with_subgradient(|_, a, out| {
                let s = (1.0 + dot(a, a)).sqrt();
                for (o, v) in out.iter_mut().zip(a) {
                    *o = v / s;
                }
            })
            .with_lipschitz(1.0)
            .convex(),
        IntegrandKind::Twowell { well } => {
            if norm(well) == 0.0 {
                return Err(Error::ZeroVector);
            }
            let p = well.clone();
            let q = well.clone();
            let m = norm(well).max(1.0);
            Integrand::new("twowell", m, move |_, a| two_well(&p, a).0)
                .with_recession(|_, a| norm(a))
                .with_subgradient(move |_, a, out| {
                    let (_, sign) = two_well(&q, a);
                    let diff: Vec<f64> = a.iter().zip(&q).map(|(x, w)| x - sign * w).collect();
                    unit_or_zero(&diff, out);
                })
                .with_lipschitz(1.0)
        }
        IntegrandKind::Aniso { a, b, e } => {
            if *a < 0.0 || *b < 0.0 {
                return Err(Error::InvalidArgument(
                    "anisotropic weights must be nonnegative".into(),
                ));
            }
            let (a, b) = (*a, *b);
            let ne = norm(e);
            let e1 = e.clone();
            let e2 = e.clone();
            let e3 = e.clone();
            Integrand::new("aniso", a + b * ne, move |_, x| {
                a * norm(x) + b * dot(x, &e1).abs()
            })
            .with_recession(move |_, x| a * norm(x) + b * dot(x, &e2).abs())
            .with_subgradient(move |_, x, out| {
                unit_or_zero(x, out);
                let s = dot(x, &e3);
                let sg = if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                for (o, ej) in out.iter_mut().zip(&e3) {
                    *o = a * *o + b * sg * ej;
                }
            })
            .with_lipschitz(a + b * ne)
            .convex()
        }
        IntegrandKind::Oscillating => Integrand::new("oscillating", 1.5, |_, a| {
            let r = norm(a);
            r * (2.0 + (1.0 + r).ln().sin()) / 2.0
        })
        .with_subgradient(|_, a, out| {
            let r = norm(a);
            let l = (1.0 + r).ln();
            let slope = (2.0 + l.sin()) / 2.0 + r * l.cos() / (2.0 * (1.0 + r));
            unit_or_zero(a, out);
            out.iter_mut().for_each(|v| *v *= slope);
        })
        .with_lipschitz(2.0),
        IntegrandKind::Constant { c } => {
            let c = *c;
            Integrand::new("constant", c.abs(), move |_, _| c)
                .with_recession(|_, _| 0.0)
                .with_subgradient(|_, _, out| out.iter_mut().for_each(|v| *v = 0.0))
                .with_lipschitz(0.0)
                .convex()
        }
    })
}

/// Distance to `{−P, +P}` and the sign of the nearer well.
fn two_well(p: &[f64], a: &[f64]) -> (f64, f64) {
    let plus: f64 = a
        .iter()
        .zip(p)
        .map(|(x, w)| (x - w) * (x - w))
        .sum::<f64>()
        .sqrt();
    let minus: f64 = a
        .iter()
        .zip(p)
        .map(|(x, w)| (x + w) * (x + w))
        .sum::<f64>()
        .sqrt();
    if plus <= minus {
        (plus, 1.0)
    } else {
        (minus, -1.0)
    }
}

/// Piecewise-linear interpolation of tabulated values along the line
/// `A0 + t·P`, extended to `R^N` by adding `penalty · dist(A, line)`.
pub fn tabulated_line(
    a0: Vec<f64>,
    p: Vec<f64>,
    ts: Vec<f64>,
    values: Vec<f64>,
    penalty: f64,
) -> Result<Integrand> {
    if ts.len() < 2 || ts.len() != values.len() || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "tabulation needs ≥ 2 increasing nodes".into(),
        ));
    }
    let pn = norm(&p);
    if pn == 0.0 {
        return Err(Error::ZeroVector);
    }
    let u: Vec<f64> = p.iter().map(|v| v / pn).collect();
    let slopes: Vec<f64> = ts
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .collect();
    let max_slope = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let table = Arc::new((a0, u, pn, ts, values, slopes));
    let locate = |tab: &LineTable, a: &[f64]| {
        let (a0, u, pn, ts, _, _) = tab;
        let rel: Vec<f64> = a.iter().zip(a0).map(|(x, y)| x - y).collect();
        let s = dot(&rel, u);
        let perp: Vec<f64> = rel.iter().zip(u).map(|(r, e)| r - s * e).collect();
        let t = s / pn;
        let seg = match ts.iter().position(|&tk| tk > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => ts.len() - 2,
        };
        (t, seg, perp)
    };
    let t1 = table.clone();
    let t2 = table.clone();
    Ok(Integrand::new(
        "tabulated_line",
        max_slope / pn + penalty + values_abs_max(&t1.4),
        move |_, a| {
            let (t, seg, perp) = locate(&t1, a);
            let (_, _, _, ts, vals, slopes) = &*t1;
            vals[seg] + slopes[seg] * (t - ts[seg]) + penalty * norm(&perp)
        },
    )
    .with_subgradient(move |_, a, out| {
        let (_, seg, perp) = locate(&t2, a);
        let (_, u, pn, _, _, slopes) = &*t2;
        let pnorm = norm(&perp);
        for (j, o) in out.iter_mut().enumerate() {
            *o = slopes[seg] / pn * u[j]
                + if pnorm > 0.0 {
                    penalty * perp[j] / pnorm
                } else {
                    0.0
                };
        }
    })
    .with_lipschitz(max_slope / pn + penalty))
}

fn values_abs_max(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecessionEstimate {
    pub upper: f64,
    pub lower: f64,
    pub exists: bool,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecessionConfig {
    pub t_max: f64,
    pub levels: usize,
    pub tol: f64,
}

impl Default for RecessionConfig {
    /// Ratio ≈ 1.5 between consecutive scales up to `10⁶`.
    fn default() -> Self {
        RecessionConfig {
            t_max: 1e6,
            levels: 35,
            tol: 1e-3,
        }
    }
}

/// Geometric scales `t_max^{i/(levels−1)}`, `i = 0..levels`.
pub fn geometric_grid(t_max: f64, levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|i| t_max.powf(i as f64 / (levels - 1) as f64))
        .collect()
}

/// Upper and lower recession estimates from a sequence `g(t)/t` sampled on
/// a geometric grid, as max/min over the top half of the grid.
pub fn recession_from_samples(t_grid: &[f64], ratios: &[f64], tol: f64) -> RecessionEstimate {
    let start = t_grid.len() / 2;
    let tail = &ratios[start..];
    let upper = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lower = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    RecessionEstimate {
        upper,
        lower,
        exists: (upper - lower).abs() <= tol * (1.0 + upper.abs()),
        t_grid: t_grid.to_vec(),
    }
}

pub fn estimate_recession(
    f: &Integrand,
    x: &[f64],
    a: &[f64],
    t_max: f64,
    levels: usize,
) -> Result<RecessionEstimate> {
    estimate_recession_with(
        f,
        x,
        a,
        RecessionConfig {
            t_max,
            levels,
            ..RecessionConfig::default()
        },
    )
}

pub fn estimate_recession_default(
    f: &Integrand,
    x: &[f64],
    a: &[f64],
) -> Result<RecessionEstimate> {
    estimate_recession_with(f, x, a, RecessionConfig::default())
}

pub fn estimate_recession_with(
    f: &Integrand,
    x: &[f64],
    a: &[f64],
    cfg: RecessionConfig,
) -> Result<RecessionEstimate> {
    if !(cfg.t_max >= 1e3) || cfg.levels < 20 {
        return Err(Error::InvalidArgument(format!(
            "recession grid needs t_max ≥ 1e3 and ≥ 20 levels (got {}, {})",
            cfg.t_max, cfg.levels
        )));
    }
    if f.lip_a.is_none() {
        warn!(
            "integrand '{}' declares no Lipschitz constant; t-only recession limits may not apply",
            f.name
        );
    }
    let t_grid = geometric_grid(cfg.t_max, cfg.levels);
    let r = norm(a);
    if r == 0.0 {
        return Ok(RecessionEstimate {
            upper: 0.0,
            lower: 0.0,
            exists: true,
            t_grid,
        });
    }
    let dir: Vec<f64> = a.iter().map(|v| v / r).collect();
    let ratios: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let at: Vec<f64> = dir.iter().map(|v| v * t).collect();
            f.eval(x, &at) / t
        })
        .collect();
    let mut est = recession_from_samples(&t_grid, &ratios, cfg.tol);
    est.upper *= r;
    est.lower *= r;
    est.exists = (est.upper - est.lower).abs() <= cfg.tol * (1.0 + est.upper.abs());
    Ok(est)
}

/// `(1 − |Â|) f(x, Â/(1 − |Â|))` on the open unit ball.
pub fn s_transform(f: &Integrand, x: &[f64], ahat: &[f64]) -> Result<f64> {
    let r = norm(ahat);
    if r >= 1.0 || !r.is_finite() {
        return Err(Error::OutOfBall(r));
    }
    let s = 1.0 - r;
    let a: Vec<f64> = ahat.iter().map(|v| v / s).collect();
    Ok(s * f.eval(x, &a))
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub s: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
    pub worst_gap: f64,
}

/// Midpoint test `f(A) ≤ ½f(A − sP) + ½f(A + sP) + tol` for every base
/// point, direction and `s = span·j/steps`, `j = 1..=steps`.
pub fn lambda_convexity_check(
    f: &Integrand,
    x: &[f64],
    cone_dirs: &[Vec<f64>],
    base_points: &[Vec<f64>],
    span: f64,
    steps: usize,
    tol: f64,
) -> ConvexityReport {
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for a in base_points {
        let fa = f.eval(x, a);
        for p in cone_dirs {
            for j in 1..=steps {
                let s = span * j as f64 / steps as f64;
                let plus: Vec<f64> = a.iter().zip(p).map(|(u, v)| u + s * v).collect();
                let minus: Vec<f64> = a.iter().zip(p).map(|(u, v)| u - s * v).collect();
                let gap = fa - 0.5 * f.eval(x, &plus) - 0.5 * f.eval(x, &minus);
                checked += 1;
                worst = worst.max(gap);
                if gap > tol {
                    violations.push(Violation {
                        base: a.clone(),
                        direction: p.clone(),
                        s,
                        gap,
                    });
                }
            }
        }
    }
    ConvexityReport {
        checked,
        violations,
        worst_gap: worst,
    }
}
