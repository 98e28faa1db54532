//! Numerical A-quasiconvex envelopes `Q_A f(x0, A0)`: the infimum of cell
//! averages `⨍ f(x0, A0 + w)` over zero-mean periodic A-free fields `w`,
//! approached by projected subgradient descent. Two-phase laminates give
//! cheap certified upper bounds.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::integrand::{recession_from_samples, Integrand, RecessionEstimate};
use crate::kernel::laminate_profile;
use crate::linalg::{self, null_space};
use crate::operator::OperatorSpec;
use crate::projection::{cached_projector_table, mollify_periodic, ProjectorTable};
use crate::sphere::SphereSampling;
use crate::wave_cone::{self, projective_distance};

/// Initial field of one restart plus the laminate it came from, if any.
type Start = (StartKind, PeriodicField, Option<(Vec<i64>, Vec<f64>)>);

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Backtracking {
    pub initial_step: f64,
    pub shrink: f64,
    pub growth: f64,
    pub max_shrinks: usize,
}

impl Default for Backtracking {
    fn default() -> Self {
        Backtracking {
            initial_step: 1.0,
            shrink: 0.5,
            growth: 2.0,
            max_shrinks: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeConfig {
    /// Grid per axis; empty means the default for the operator's dimension.
    pub grid: Vec<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub step: Backtracking,
    pub stop_rel: f64,
    pub stop_window: usize,
    pub warm_starts: bool,
    /// Laminate warm-start interface width in grid cells.
    pub warm_eps_cells: f64,
    pub seed: u64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            grid: Vec::new(),
            restarts: 8,
            max_iters: 500,
            step: Backtracking::default(),
            stop_rel: 1e-6,
            stop_window: 50,
            warm_starts: true,
            warm_eps_cells: 1.0,
            seed: 0,
        }
    }
}

impl EnvelopeConfig {
    pub fn resolved_grid(&self, d: usize) -> Vec<usize> {
        if !self.grid.is_empty() {
            return self.grid.clone();
        }
        match d {
            1 => vec![256],
            2 => vec![64, 64],
            _ => vec![16; d],
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "restarts and max_iters must be at least 1".into(),
            ));
        }
        if !self.grid.is_empty() && self.grid.len() != d {
            return Err(Error::GridMismatch(format!(
                "grid {:?} for dimension {d}",
                self.grid
            )));
        }
        let s = &self.step;
        if !(s.initial_step > 0.0 && s.shrink > 0.0 && s.shrink < 1.0 && s.growth >= 1.0) {
            return Err(Error::InvalidArgument(
                "invalid backtracking parameters".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Zero,
    Laminate,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub kind: StartKind,
    pub initial_value: f64,
    pub value: f64,
    pub iterations: usize,
    /// Laminate frequency and amplitude direction, for laminate starts.
    pub frequency: Option<Vec<i64>>,
    pub direction: Option<Vec<f64>>,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeResult {
    /// Best cell average found; an upper bound for the discrete envelope.
    pub value: f64,
    pub f_at_a0: f64,
    /// Best two-phase laminate bound among the warm-start candidates.
    pub laminate_bound: Option<f64>,
    #[serde(skip)]
    pub argmin_field: PeriodicField,
    /// Trace of the winning restart.
    pub trace: Vec<f64>,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub grid: Vec<usize>,
}

pub fn quasiconvex_envelope(
    op: &OperatorSpec,
    f: &Integrand,
    x0: &[f64],
    a0: &[f64],
    cfg: &EnvelopeConfig,
) -> Result<EnvelopeResult> {
    if a0.len() != op.state_dim() {
        return Err(Error::Shape(format!(
            "A0 has length {}, operator state dimension is {}",
            a0.len(),
            op.state_dim()
        )));
    }
    if !f.has_subgradient() {
        return Err(Error::MissingSubgradient);
    }
    cfg.validate(op.dim())?;
    let dims = cfg.resolved_grid(op.dim());
    let table = cached_projector_table(op, &dims)?;
    let f_at_a0 = f.eval(x0, a0);

    let mut starts: Vec<Start> = vec![(
        StartKind::Zero,
        PeriodicField::zeros(&dims, op.state_dim()),
        None,
    )];
    let mut laminate_bound = None;
    if cfg.warm_starts && cfg.restarts > 1 {
        let cands = laminate_candidates(op, f, x0, a0);
        laminate_bound = cands.first().map(|c| c.bound.value);
        let want = cfg.restarts.div_ceil(2).min(cfg.restarts - 1);
        for c in cands.into_iter().take(want) {
            let field = laminate_field(&table, &c, cfg.warm_eps_cells)?;
            starts.push((StartKind::Laminate, field, Some((c.frequency, c.direction))));
        }
    }
    let mut k = 0u64;
    while starts.len() < cfg.restarts {
        let field = random_field(
            &table,
            cfg.seed.wrapping_add(k),
            0.5 * linalg::norm(a0).max(1.0),
        )?;
        starts.push((StartKind::Random, field, None));
        k += 1;
    }

    let runs: Vec<(RestartSummary, PeriodicField)> = starts
        .into_par_iter()
        .map(|(kind, w0, tag)| {
            let (w, trace) = descend(&table, f, x0, a0, w0, cfg);
            let (frequency, direction) = match tag {
                Some((k, p)) => (Some(k), Some(p)),
                None => (None, None),
            };
            let summary = RestartSummary {
                kind,
                initial_value: trace[0],
                value: *trace.last().expect("nonempty trace"),
                iterations: trace.len() - 1,
                frequency,
                direction,
                trace,
            };
            (summary, w)
        })
        .collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].0.value.total_cmp(&runs[b].0.value))
        .expect("at least one restart");
    let (restarts, mut fields): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let argmin_field = fields.swap_remove(best);
    debug!(
        "envelope at {a0:?}: best restart {best} with value {}",
        restarts[best].value
    );
    Ok(EnvelopeResult {
        value: restarts[best].value,
        f_at_a0,
        laminate_bound,
        trace: restarts[best].trace.clone(),
        best_restart: best,
        argmin_field,
        restarts,
        grid: dims,
    })
}

/// Cell average `⨍ f(x0, A0 + w)`.
pub fn cell_average(f: &Integrand, x0: &[f64], a0: &[f64], w: &PeriodicField) -> f64 {
    let n = a0.len();
    let mut a = vec![0.0; n];
    let mut total = 0.0;
    for chunk in w.values().chunks(n) {
        for ((ai, b), c) in a.iter_mut().zip(a0).zip(chunk) {
            *ai = b + c;
        }
        total += f.eval(x0, &a);
    }
    total / w.node_count() as f64
}

fn descend(
    table: &ProjectorTable,
    f: &Integrand,
    x0: &[f64],
    a0: &[f64],
    w0: PeriodicField,
    cfg: &EnvelopeConfig,
) -> (PeriodicField, Vec<f64>) {
    let n = a0.len();
    let mut w = w0;
    let mut value = cell_average(f, x0, a0, &w);
    let mut trace = vec![value];
    let mut step = cfg.step.initial_step;
    let mut failures = 0usize;
    let mut grad = PeriodicField::zeros(w.dims(), n);
    let mut a = vec![0.0; n];
    for it in 0..cfg.max_iters {
        for i in 0..w.node_count() {
            for ((ai, b), c) in a.iter_mut().zip(a0).zip(w.node(i)) {
                *ai = b + c;
            }
            f.subgradient(x0, &a, grad.node_mut(i))
                .expect("checked subgradient");
        }
        let dir = match table.apply_with_residue(&grad) {
            Ok((d, _)) => d,
            Err(_) => break,
        };
        if dir.sup_norm() == 0.0 {
            break;
        }
        // after two failed searches the trial step follows a diminishing schedule
        let mut trial = if failures >= 2 {
            cfg.step.initial_step / (1.0 + it as f64)
        } else {
            (step * cfg.step.growth).min(1e3 * cfg.step.initial_step)
        };
        let mut accepted = None;
        for _ in 0..=cfg.step.max_shrinks {
            let mut cand = w.clone();
            cand.axpy(-trial, &dir);
            let v = cell_average(f, x0, a0, &cand);
            if v < value {
                accepted = Some((cand, v));
                break;
            }
            trial *= cfg.step.shrink;
        }
        match accepted {
            Some((cand, v)) => {
                w = cand;
                value = v;
                step = trial;
                failures = 0;
            }
            None => failures += 1,
        }
        trace.push(value);
        let k = trace.len() - 1;
        if failures > 3 {
            break;
        }
        if k >= cfg.stop_window {
            let old = trace[k - cfg.stop_window];
            if old - value <= cfg.stop_rel * old.abs() {
                break;
            }
        }
    }
    // remove accumulated rounding outside the A-free subspace
    if let Ok((p, _)) = table.apply_with_residue(&w) {
        let v = cell_average(f, x0, a0, &p);
        if v <= value {
            w = p;
            *trace.last_mut().expect("nonempty") = v;
        }
    }
    (w, trace)
}

fn random_field(table: &ProjectorTable, seed: u64, amplitude: f64) -> Result<PeriodicField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0e17_e10e);
    let dims = table.dims().to_vec();
    let n = table.ncomp();
    let mut z = PeriodicField::zeros(&dims, n);
    for v in z.values_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    let z = mollify_periodic(&z, 3.0);
    let w = table.apply_with_residue(&z)?.0;
    let norm = w.l2_norm();
    Ok(if norm > 0.0 {
        w.scaled(amplitude / norm)
    } else {
        w
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaminateBound {
    pub value: f64,
    pub theta: f64,
    pub s: f64,
}

/// Grids for the two-phase laminate search.
#[derive(Debug, Clone, Copy)]
pub struct LaminateGrid {
    pub theta_points: usize,
    pub s_per_octave: i32,
    pub octaves: i32,
}

impl Default for LaminateGrid {
    /// 1001 values of θ and `s = 2^{j/8}`, `|j| ≤ 80`, plus `s = 0`.
    fn default() -> Self {
        LaminateGrid {
            theta_points: 1001,
            s_per_octave: 8,
            octaves: 10,
        }
    }
}

/// Best laminate `θ f(A0 + (1−θ)sP) + (1−θ) f(A0 − θsP)` for a wave-cone
/// direction `P0`; an upper bound for `Q_A f(A0)`.
pub fn laminate_oracle(
    op: &OperatorSpec,
    f: &Integrand,
    x0: &[f64],
    a0: &[f64],
    p0: &[f64],
) -> Result<LaminateBound> {
    let rep = wave_cone::wavecone_membership(op, p0, &SphereSampling::default_for(op.dim()))?;
    if !rep.member {
        return Err(Error::NotInWaveCone {
            residual: rep.residual,
        });
    }
    Ok(laminate_search(f, x0, a0, p0, LaminateGrid::default()))
}

/// The laminate search without the membership check.
pub fn laminate_search(
    f: &Integrand,
    x0: &[f64],
    a0: &[f64],
    p0: &[f64],
    grid: LaminateGrid,
) -> LaminateBound {
    let eval = |theta: f64, s: f64| -> f64 {
        let plus: Vec<f64> = a0
            .iter()
            .zip(p0)
            .map(|(a, p)| a + (1.0 - theta) * s * p)
            .collect();
        let minus: Vec<f64> = a0.iter().zip(p0).map(|(a, p)| a - theta * s * p).collect();
        theta * f.eval(x0, &plus) + (1.0 - theta) * f.eval(x0, &minus)
    };
    let m = grid.s_per_octave * grid.octaves;
    let mut ss: Vec<f64> = vec![0.0];
    ss.extend((-m..=m).map(|j| 2f64.powf(j as f64 / grid.s_per_octave as f64)));
    let thetas: Vec<f64> = (0..grid.theta_points)
        .map(|i| i as f64 / (grid.theta_points - 1) as f64)
        .collect();
    let mut best = LaminateBound {
        value: f.eval(x0, a0),
        theta: 0.0,
        s: 0.0,
    };
    for &theta in &thetas {
        for &s in &ss {
            let v = eval(theta, s);
            if v < best.value {
                best = LaminateBound { value: v, theta, s };
            }
        }
    }
    if best.s > 0.0 {
        // golden refinement in s between the neighbouring grid scales
        let r = 2f64.powf(1.0 / grid.s_per_octave as f64);
        let (mut lo, mut hi) = (best.s / r, best.s * r);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if eval(best.theta, c) < eval(best.theta, d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        let s = 0.5 * (lo + hi);
        let v = eval(best.theta, s);
        if v < best.value {
            best = LaminateBound {
                value: v,
                theta: best.theta,
                s,
            };
        }
    }
    best
}

#[derive(Debug, Clone)]
struct LaminateCandidate {
    frequency: Vec<i64>,
    direction: Vec<f64>,
    bound: LaminateBound,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer frequencies with entries in `[−3, 3]`, one per `±k`.
fn lattice_directions(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let total = 7usize.pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let k: Vec<i64> = (0..d)
            .map(|_| {
                let v = (c % 7) as i64 - 3;
                c /= 7;
                v
            })
            .collect();
        let first = k.iter().find(|v| **v != 0);
        if first.is_none_or(|v| *v < 0) {
            continue;
        }
        if k.iter().fold(0, |g, &v| gcd(g, v)) != 1 {
            continue;
        }
        out.push(k);
    }
    out
}

/// Laminate directions `P ∈ ker M(k)` over small lattice frequencies,
/// ranked by their laminate bound.
fn laminate_candidates(
    op: &OperatorSpec,
    f: &Integrand,
    x0: &[f64],
    a0: &[f64],
) -> Vec<LaminateCandidate> {
    let coarse = LaminateGrid {
        theta_points: 101,
        s_per_octave: 4,
        octaves: 10,
    };
    let n = op.state_dim();
    let mut cands: Vec<LaminateCandidate> = lattice_directions(op.dim())
        .par_iter()
        .flat_map_iter(|k| {
            let xi: Vec<f64> = k.iter().map(|&v| v as f64).collect();
            let ns = null_space(
                &op.principal_symbol(&xi).real_part,
                wave_cone::DEFAULT_RANK_TOL,
            );
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            let proj = ns.projector();
            let mut push = |v: Vec<f64>| {
                let nv = linalg::norm(&v);
                if nv > 1e-8 {
                    let u: Vec<f64> = v.iter().map(|x| x / nv).collect();
                    if dirs.iter().all(|q| projective_distance(q, &u) > 1e-8) {
                        dirs.push(u);
                    }
                }
            };
            for c in 0..ns.dim() {
                push(ns.basis.column(c).iter().cloned().collect());
            }
            if ns.dim() > 1 {
                for i in 0..n {
                    push(proj.column(i).iter().cloned().collect());
                }
            }
            dirs.into_iter()
                .map(|p| {
                    let bound = laminate_search(f, x0, a0, &p, coarse);
                    LaminateCandidate {
                        frequency: k.clone(),
                        direction: p,
                        bound,
                    }
                })
                .collect::<Vec<_>>()
        })
        .filter(|c| c.bound.s > 0.0)
        .collect();
    cands.sort_by(|a, b| a.bound.value.total_cmp(&b.bound.value));
    for c in cands.iter_mut() {
        c.bound = laminate_search(f, x0, a0, &c.direction, LaminateGrid::default());
    }
    cands.sort_by(|a, b| a.bound.value.total_cmp(&b.bound.value));
    cands
}

fn laminate_field(
    table: &ProjectorTable,
    c: &LaminateCandidate,
    eps_cells: f64,
) -> Result<PeriodicField> {
    let dims = table.dims().to_vec();
    let eps = eps_cells
        * c.frequency
            .iter()
            .zip(&dims)
            .map(|(&k, &m)| k.abs() as f64 / m as f64)
            .fold(0.0, f64::max);
    let LaminateBound { theta, s, .. } = c.bound;
    let p = c.direction.clone();
    let k: Vec<f64> = c.frequency.iter().map(|&v| v as f64).collect();
    let raw = PeriodicField::from_fn(&dims, p.len(), |x, out| {
        let chi = laminate_profile(linalg::dot(&k, x), theta, eps);
        for (o, pj) in out.iter_mut().zip(&p) {
            *o = s * chi * pj;
        }
    });
    Ok(table.apply_with_residue(&raw)?.0)
}

/// Recession estimate of `t ↦ Q_A f(x0, t·dir)/t` on the given scales, with
/// the existence flag judged at optimisation-noise tolerance `2e−2`.
pub fn envelope_recession(
    op: &OperatorSpec,
    f: &Integrand,
    x0: &[f64],
    dir: &[f64],
    t_grid: &[f64],
    cfg: &EnvelopeConfig,
) -> Result<RecessionEstimate> {
    let r = linalg::norm(dir);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    if t_grid.len() < 2 || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument(
            "t grid needs at least two positive scales".into(),
        ));
    }
    let unit: Vec<f64> = dir.iter().map(|v| v / r).collect();
    let mut ratios = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let a: Vec<f64> = unit.iter().map(|v| v * t).collect();
        ratios.push(quasiconvex_envelope(op, f, x0, &a, cfg)?.value / t);
    }
    Ok(recession_from_samples(t_grid, &ratios, 2e-2))
}
