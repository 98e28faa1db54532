use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExperimentReport, OpRef, SeriesRow, Verdict};
use crate::envelope::{quasiconvex_envelope, EnvelopeConfig, EnvelopeResult};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::PeriodicField;
use crate::integrand::{Integrand, IntegrandSpec};
use crate::kernel::smooth_step;
use crate::operator::OperatorSpec;
use crate::projection::{apply_operator, sobolev_negative_norm};

/// The absolutely continuous target density on the centred unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Constant {
        value: Vec<f64>,
    },
    /// `u(x) = value + G x` with `G` given as `N` rows of length `d`.
    Affine {
        value: Vec<f64>,
        gradient: Vec<Vec<f64>>,
    },
}

impl Target {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Target::Constant { value } => out.copy_from_slice(value),
            Target::Affine { value, gradient } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = value[i] + gradient[i].iter().zip(x).map(|(g, xa)| g * xa).sum::<f64>();
                }
            }
        }
    }

    fn check(&self, n: usize, d: usize) -> Result<()> {
        let ok = match self {
            Target::Constant { value } => value.len() == n,
            Target::Affine { value, gradient } => {
                value.len() == n && gradient.len() == n && gradient.iter().all(|r| r.len() == d)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("target does not match N={n}, d={d}")))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub op: OpRef,
    pub integrand: IntegrandSpec,
    pub target: Target,
    /// Evaluation grid; empty means 128 cells per axis.
    #[serde(default)]
    pub grid: Vec<usize>,
    #[serde(default = "default_meshes")]
    pub meshes: Vec<usize>,
    #[serde(default = "default_js")]
    pub js: Vec<u32>,
    /// Pairs `(m, j)` whose corrector grid `grid/(m·j)` is coarser than this
    /// are skipped.
    #[serde(default = "default_min_cells")]
    pub min_corrector_cells: usize,
    /// Cutoff transition width as a fraction of the mesh cube side.
    #[serde(default = "default_margin")]
    pub cutoff_margin: f64,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub expect: Verdict,
}

fn default_meshes() -> Vec<usize> {
    vec![1, 2, 4]
}

fn default_js() -> Vec<u32> {
    vec![1, 2, 4, 8]
}

fn default_min_cells() -> usize {
    8
}

fn default_margin() -> f64 {
    0.02
}

fn default_tol() -> f64 {
    0.05
}

type Key = (Vec<usize>, Vec<u64>);

struct Mesh {
    m: usize,
    centres: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

fn mesh(m: usize, d: usize, target: &Target, n: usize) -> Mesh {
    let dims = vec![m; d];
    let count = m.pow(d as u32);
    let centres: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            fft::unravel(i, &dims)
                .iter()
                .map(|&k| -0.5 + (k as f64 + 0.5) / m as f64)
                .collect()
        })
        .collect();
    let values = centres
        .iter()
        .map(|x| {
            let mut z = vec![0.0; n];
            target.eval(x, &mut z);
            z
        })
        .collect();
    Mesh { m, centres, values }
}

struct EnvelopeCache<'a> {
    op: &'a OperatorSpec,
    f: &'a Integrand,
    x_dependent: bool,
    base: &'a EnvelopeConfig,
    store: HashMap<Key, Arc<EnvelopeResult>>,
}

impl EnvelopeCache<'_> {
    fn key(&self, grid: &[usize], x: &[f64], z: &[f64]) -> Key {
        let mut bits: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
        if self.x_dependent {
            bits.extend(x.iter().map(|v| v.to_bits()));
        }
        (grid.to_vec(), bits)
    }

    /// Envelope results for every cube of the mesh, computing missing keys in
    /// parallel.
    fn fill(&mut self, grid: &[usize], mesh: &Mesh) -> Result<Vec<Arc<EnvelopeResult>>> {
        let keys: Vec<Key> = mesh
            .centres
            .iter()
            .zip(&mesh.values)
            .map(|(x, z)| self.key(grid, x, z))
            .collect();
        let mut todo: Vec<(Key, usize)> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.store.contains_key(k) && !todo.iter().any(|(t, _)| t == k) {
                todo.push((k.clone(), i));
            }
        }
        let cfg = EnvelopeConfig {
            grid: grid.to_vec(),
            ..self.base.clone()
        };
        let (op, f) = (self.op, self.f);
        let fresh = todo
            .par_iter()
            .map(|(k, i)| {
                let r = quasiconvex_envelope(op, f, &mesh.centres[*i], &mesh.values[*i], &cfg)?;
                Ok((k.clone(), Arc::new(r)))
            })
            .collect::<Result<Vec<_>>>()?;
        self.store.extend(fresh);
        Ok(keys.iter().map(|k| self.store[k].clone()).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
struct PairRow {
    m: usize,
    j: u32,
    corrector_grid: Vec<usize>,
    value: f64,
    residual: f64,
    max_slack: f64,
}

/// The corrector field on the evaluation grid: the argmin of cube `i`, tiled
/// `j` times per axis from the cube's corner and multiplied by its cutoff.
fn recovery_field(
    dims: &[usize],
    n: usize,
    mesh: &Mesh,
    j: u32,
    correctors: &[Arc<EnvelopeResult>],
    margin: f64,
) -> PeriodicField {
    let m = mesh.m;
    let per_cube: Vec<usize> = dims.iter().map(|g| g / m).collect();
    let cgrid: Vec<usize> = per_cube.iter().map(|c| c / j as usize).collect();
    let mdims = vec![m; dims.len()];
    let mut v = PeriodicField::zeros(dims, n);
    for node in 0..v.node_count() {
        let idx = fft::unravel(node, dims);
        let cube: Vec<usize> = idx.iter().zip(&per_cube).map(|(i, c)| i / c).collect();
        let local: Vec<usize> = idx.iter().zip(&per_cube).map(|(i, c)| i % c).collect();
        let ci = fft::ravel(&cube, &mdims);
        let s: Vec<usize> = local.iter().zip(&cgrid).map(|(t, e)| t % e).collect();
        let psi: f64 = local
            .iter()
            .zip(&per_cube)
            .map(|(&t, &c)| {
                let y = -0.5 + (t as f64 + 0.5) / c as f64;
                smooth_step((0.5 - y.abs()) / margin)
            })
            .product();
        let w = correctors[ci].argmin_field.node(fft::ravel(&s, &cgrid));
        for (o, wv) in v.node_mut(node).iter_mut().zip(w) {
            *o = psi * wv;
        }
    }
    v
}

/// Compares the best recovery value `G[u + v_j^m]` over the `(m, j)` grid with
/// the midpoint sum of `Q_A f(x_i, u(x_i))` over the finest mesh.
pub fn relaxation_experiment(cfg: &RelaxConfig, base: Option<&Path>) -> Result<ExperimentReport> {
    let op = cfg.op.resolve(base)?;
    let f = cfg.integrand.build()?;
    let d = op.dim();
    let n = op.state_dim();
    cfg.target.check(n, d)?;
    if cfg.meshes.is_empty() || cfg.meshes.contains(&0) {
        return Err(Error::InvalidArgument("meshes must be positive".into()));
    }
    super::check_js(&cfg.js)?;
    if !(cfg.cutoff_margin > 0.0 && cfg.cutoff_margin < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cutoff margin {} outside (0, 1/2)",
            cfg.cutoff_margin
        )));
    }
    let dims = if cfg.grid.is_empty() {
        vec![128; d]
    } else {
        cfg.grid.clone()
    };
    if dims.len() != d {
        return Err(Error::GridMismatch(format!(
            "grid {dims:?} for dimension {d}"
        )));
    }
    let mut cache = EnvelopeCache {
        op: &op,
        f: &f,
        x_dependent: cfg.integrand.weight.is_some(),
        base: &cfg.envelope,
        store: HashMap::new(),
    };

    let finest = mesh(
        *cfg.meshes.iter().max().expect("nonempty"),
        d,
        &cfg.target,
        n,
    );
    let target_grid = cfg.envelope.resolved_grid(d);
    let reference = cache.fill(&target_grid, &finest)?;
    let cube_vol = 1.0 / finest.centres.len() as f64;
    let target: f64 = reference.iter().map(|r| r.value * cube_vol).sum();

    let mut target_u = PeriodicField::zeros(&dims, n);
    for i in 0..target_u.node_count() {
        let x = target_u.coords(i);
        cfg.target.eval(&x, target_u.node_mut(i));
    }
    let cell = target_u.cell_volume();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &m in &cfg.meshes {
        let mh = mesh(m, d, &cfg.target, n);
        for &j in &cfg.js {
            let prod = m * j as usize;
            let cgrid: Option<Vec<usize>> = dims
                .iter()
                .map(|&g| (g % prod == 0 && g / prod >= cfg.min_corrector_cells).then(|| g / prod))
                .collect();
            let Some(cgrid) = cgrid else {
                skipped.push(json!({"m": m, "j": j}));
                continue;
            };
            let correctors = cache.fill(&cgrid, &mh)?;
            let v = recovery_field(&dims, n, &mh, j, &correctors, cfg.cutoff_margin);
            let mut a = vec![0.0; n];
            let value: f64 = (0..v.node_count())
                .map(|i| {
                    let x = v.coords(i);
                    for ((ai, uu), vv) in a.iter_mut().zip(target_u.node(i)).zip(v.node(i)) {
                        *ai = uu + vv;
                    }
                    f.eval(&x, &a)
                })
                .sum::<f64>()
                * cell;
            let vn = v.l2_norm();
            let residual = if vn == 0.0 {
                0.0
            } else {
                sobolev_negative_norm(&apply_operator(&op, &v)?, op.order(), 2.0)? / vn
            };
            let max_slack = correctors
                .iter()
                .zip(cache.fill(&target_grid, &mh)?)
                .map(|(c, r)| c.value - r.value)
                .fold(f64::NEG_INFINITY, f64::max);
            rows.push(PairRow {
                m,
                j,
                corrector_grid: cgrid,
                value,
                residual,
                max_slack,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "no (m, j) pair divides the evaluation grid into large enough corrector cells".into(),
        ));
    }
    let best = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let gap = best - target;
    let verdict = if gap.abs() <= cfg.tol * (1.0 + target.abs()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ExperimentReport {
        experiment: "relax".into(),
        series: rows
            .iter()
            .map(|r| SeriesRow {
                j: r.j,
                value: r.value,
                residual: r.residual,
            })
            .collect(),
        limit_value: Some(target),
        estimate: Some(best),
        gap,
        tol: cfg.tol,
        verdict,
        expected: cfg.expect,
        as_expected: verdict == cfg.expect,
        details: json!({
            "integrand": f.name,
            "grid": dims,
            "target_mesh": finest.m,
            "target_envelope_grid": target_grid,
            "envelope_calls": cache.store.len(),
            "pairs": rows,
            "skipped": skipped,
        }),
    })
}
