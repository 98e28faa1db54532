//! Vector measures on axis-aligned boxes: a gridded absolutely continuous
//! density plus atoms and hyperplane pieces. Functionals with recession
//! terms, the area functional, mollification, blow-ups and empirical
//! Young-measure moments.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::PeriodicField;
use crate::integrand::{Integrand, IntegrandKind, IntegrandSpec, RecessionMode};
use crate::kernel;
use crate::linalg::{dot, norm};
use crate::operator::OperatorSpec;
use crate::sphere::SphereSampling;
use crate::wave_cone;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument(format!(
                "invalid box {lo:?} × {hi:?}"
            )));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn unit_square(d: usize) -> Self {
        BoxDomain {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    /// The centred unit cube `(−1/2, 1/2)^d`.
    pub fn centred_cube(d: usize) -> Self {
        BoxDomain {
            lo: vec![-0.5; d],
            hi: vec![0.5; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// `(d−1)`-dimensional area of `{x·ξ = c}` inside the box, for unit `ξ`.
    pub fn section_area(&self, normal: &[f64], offset: f64) -> f64 {
        // reflect so that every active normal component is positive
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut xi = Vec::new();
        let c = offset;
        let mut flat = 1.0;
        for a in 0..self.dim() {
            let n = normal[a];
            if n.abs() < 1e-15 {
                flat *= self.hi[a] - self.lo[a];
                continue;
            }
            if n > 0.0 {
                lo.push(self.lo[a]);
                hi.push(self.hi[a]);
                xi.push(n);
            } else {
                lo.push(-self.hi[a]);
                hi.push(-self.lo[a]);
                xi.push(-n);
            }
        }
        let k = xi.len();
        if k == 0 {
            return 0.0;
        }
        if k == 1 {
            let t = c / xi[0];
            return if t > lo[0] && t < hi[0] {
                flat
            } else if t == lo[0] || t == hi[0] {
                0.5 * flat
            } else {
                0.0
            };
        }
        // d/dc of the volume of {x·ξ ≤ c} by inclusion–exclusion over vertices
        let fact: f64 = (1..k).map(|i| i as f64).product();
        let prod: f64 = xi.iter().product();
        let mut sum = 0.0;
        for mask in 0..(1usize << k) {
            let mut s = c;
            let mut sign = 1.0;
            for a in 0..k {
                if mask >> a & 1 == 1 {
                    s -= xi[a] * hi[a];
                    sign = -sign;
                } else {
                    s -= xi[a] * lo[a];
                }
            }
            if s > 0.0 {
                sum += sign * s.powi(k as i32 - 1);
            }
        }
        flat * sum / (fact * prod)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Atom {
        x0: Vec<f64>,
    },
    /// `{x·normal = offset}` with unit normal; mass spread uniformly over the section.
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPiece {
    pub geometry: Geometry,
    pub mass: f64,
    pub polar: Vec<f64>,
}

impl SingularPiece {
    /// Normalises `polar` (and a hyperplane normal) and checks `mass ≥ 0`.
    pub fn new(geometry: Geometry, mass: f64, polar: Vec<f64>) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mass must be nonnegative, got {mass}"
            )));
        }
        let pn = norm(&polar);
        if pn == 0.0 {
            return Err(Error::ZeroVector);
        }
        let geometry = match geometry {
            Geometry::Hyperplane { normal, offset } => {
                let nn = norm(&normal);
                if nn == 0.0 {
                    return Err(Error::ZeroVector);
                }
                Geometry::Hyperplane {
                    normal: normal.iter().map(|v| v / nn).collect(),
                    offset: offset / nn,
                }
            }
            g => g,
        };
        Ok(SingularPiece {
            geometry,
            mass,
            polar: polar.iter().map(|v| v / pn).collect(),
        })
    }
}

/// `μ = ρ L^d ⌞ Ω + μ^s` with `ρ` sampled at cell centres of a uniform grid
/// on the box `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub domain: BoxDomain,
    pub density: PeriodicField,
    pub singular: Vec<SingularPiece>,
}

impl GridMeasure {
    pub fn new(
        domain: BoxDomain,
        density: PeriodicField,
        singular: Vec<SingularPiece>,
    ) -> Result<Self> {
        if density.dim() != domain.dim() {
            return Err(Error::DomainMismatch);
        }
        for p in &singular {
            if p.polar.len() != density.ncomp() {
                return Err(Error::Shape(format!(
                    "polar has length {}, density has {} components",
                    p.polar.len(),
                    density.ncomp()
                )));
            }
            if (norm(&p.polar) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "polar vector must have unit norm".into(),
                ));
            }
        }
        Ok(GridMeasure {
            domain,
            density,
            singular,
        })
    }

    pub fn zero(domain: BoxDomain, dims: &[usize], ncomp: usize) -> Self {
        GridMeasure {
            domain,
            density: PeriodicField::zeros(dims, ncomp),
            singular: Vec::new(),
        }
    }

    /// Density given as a function of the physical point.
    pub fn from_density_fn<F: FnMut(&[f64], &mut [f64])>(
        domain: BoxDomain,
        dims: &[usize],
        ncomp: usize,
        mut f: F,
    ) -> Self {
        let lo = domain.lo.clone();
        let hi = domain.hi.clone();
        let density = PeriodicField::from_fn(dims, ncomp, |y, out| {
            let x: Vec<f64> = (0..y.len())
                .map(|a| lo[a] + (hi[a] - lo[a]) * (y[a] + 0.5))
                .collect();
            f(&x, out)
        });
        GridMeasure {
            domain,
            density,
            singular: Vec::new(),
        }
    }

    pub fn with_piece(mut self, piece: SingularPiece) -> Self {
        self.singular.push(piece);
        self
    }

    pub fn dims(&self) -> &[usize] {
        self.density.dims()
    }

    pub fn ncomp(&self) -> usize {
        self.density.ncomp()
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.volume() * self.density.cell_volume()
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        (0..self.domain.dim())
            .map(|a| (self.domain.hi[a] - self.domain.lo[a]) / self.dims()[a] as f64)
            .collect()
    }

    /// Physical centre of cell `i`.
    pub fn cell_centre(&self, i: usize) -> Vec<f64> {
        let idx = fft::unravel(i, self.dims());
        let h = self.cell_widths();
        idx.iter()
            .enumerate()
            .map(|(a, &j)| self.domain.lo[a] + (j as f64 + 0.5) * h[a])
            .collect()
    }

    /// `|μ|(Ω)`.
    pub fn total_variation(&self) -> f64 {
        self.density.l1_norm() * self.domain.volume()
            + self.singular.iter().map(|p| p.mass).sum::<f64>()
    }

    /// Quadrature nodes and weights (summing to the piece's mass) for a
    /// singular piece: the atom itself, or cell-centre projections onto the
    /// hyperplane.
    pub fn piece_quadrature(&self, piece: &SingularPiece) -> Vec<(Vec<f64>, f64)> {
        match &piece.geometry {
            Geometry::Atom { x0 } => vec![(x0.clone(), piece.mass)],
            Geometry::Hyperplane { normal, offset } => {
                let h = self.cell_widths();
                let width: f64 = normal.iter().zip(&h).map(|(n, w)| n.abs() * w).sum();
                let pts: Vec<Vec<f64>> = (0..self.density.node_count())
                    .filter_map(|i| {
                        let x = self.cell_centre(i);
                        let s = dot(&x, normal) - offset;
                        if s >= -0.5 * width && s < 0.5 * width {
                            let p: Vec<f64> =
                                x.iter().zip(normal).map(|(xa, na)| xa - s * na).collect();
                            self.domain.contains(&p).then_some(p)
                        } else {
                            None
                        }
                    })
                    .collect();
                let w = if pts.is_empty() {
                    0.0
                } else {
                    piece.mass / pts.len() as f64
                };
                pts.into_iter().map(|p| (p, w)).collect()
            }
        }
    }

    /// Writes the density as a field file and the domain plus singular
    /// pieces as a JSON sidecar referring to it.
    pub fn save(&self, sidecar: &Path, density_path: &Path) -> Result<()> {
        self.density.save(density_path)?;
        let rel = density_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = MeasureFile {
            domain: self.domain.clone(),
            density: rel,
            singular: self.singular.clone(),
        };
        std::fs::write(sidecar, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Reads a sidecar; the density path is resolved relative to it.
    pub fn load(sidecar: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(sidecar)?;
        let file: MeasureFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let base = sidecar.parent().unwrap_or_else(|| Path::new("."));
        let density = PeriodicField::load(&base.join(&file.density))?;
        let pieces = file
            .singular
            .into_iter()
            .map(|p| SingularPiece::new(p.geometry, p.mass, p.polar))
            .collect::<Result<Vec<_>>>()?;
        let domain = BoxDomain::new(file.domain.lo, file.domain.hi)?;
        Self::new(domain, density, pieces)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureFile {
    domain: BoxDomain,
    density: String,
    #[serde(default)]
    singular: Vec<SingularPiece>,
}

/// `Σ_cells f(x_c, ρ(x_c)) |cell| + Σ_pieces ∫ f^∞(x, polar) d|μ^s|`.
pub fn evaluate_functional(f: &Integrand, mu: &GridMeasure, mode: RecessionMode) -> Result<f64> {
    evaluate_weighted(f, mu, mode, &|_| 1.0)
}

fn evaluate_weighted(
    f: &Integrand,
    mu: &GridMeasure,
    mode: RecessionMode,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<f64> {
    let vol = mu.cell_volume();
    let terms: Vec<f64> = (0..mu.density.node_count())
        .into_par_iter()
        .map(|i| {
            let x = mu.cell_centre(i);
            phi(&x) * f.eval(&x, mu.density.node(i))
        })
        .collect();
    let bulk = terms.iter().sum::<f64>() * vol;
    let mut sing = 0.0;
    for piece in &mu.singular {
        if piece.mass == 0.0 {
            continue;
        }
        for (x, w) in mu.piece_quadrature(piece) {
            sing += phi(&x) * recession_at(f, &x, &piece.polar, mode)? * w;
        }
    }
    Ok(bulk + sing)
}

fn recession_at(f: &Integrand, x: &[f64], polar: &[f64], mode: RecessionMode) -> Result<f64> {
    if mode == RecessionMode::Analytic && !f.has_recession() {
        let est = crate::integrand::estimate_recession_default(f, x, polar)?;
        if !est.exists {
            return Err(Error::MissingRecession(format!(
                "'{}' has no analytic recession and its estimates disagree ({} vs {})",
                f.name, est.upper, est.lower
            )));
        }
        return Ok(est.upper);
    }
    f.recession_value(x, polar, mode)
}

/// `∫ √(1 + |ρ|²) dx + |μ^s|(Ω)`.
pub fn area_functional(mu: &GridMeasure) -> f64 {
    let bulk: f64 = mu
        .density
        .values()
        .chunks(mu.ncomp())
        .map(|c| (1.0 + dot(c, c)).sqrt())
        .sum::<f64>()
        * mu.cell_volume();
    bulk + mu.singular.iter().map(|p| p.mass).sum::<f64>()
}

/// Absolutely continuous measure whose density is the density of `mu` plus
/// its singular pieces spread to the grid by linear (cloud-in-cell) weights.
pub fn splat_singular(mu: &GridMeasure) -> PeriodicField {
    let mut out = mu.density.clone();
    let vol = mu.cell_volume();
    let dims = mu.dims().to_vec();
    let h = mu.cell_widths();
    for piece in &mu.singular {
        for (x, w) in mu.piece_quadrature(piece) {
            // per-axis neighbouring cell centres and linear weights
            let axes: Vec<[(usize, f64); 2]> = (0..dims.len())
                .map(|a| {
                    let t = (x[a] - mu.domain.lo[a]) / h[a] - 0.5;
                    let m = dims[a];
                    if t <= 0.0 {
                        [(0, 1.0), (0, 0.0)]
                    } else if t >= (m - 1) as f64 {
                        [(m - 1, 1.0), (m - 1, 0.0)]
                    } else {
                        let j = t.floor() as usize;
                        let frac = t - j as f64;
                        [(j, 1.0 - frac), (j + 1, frac)]
                    }
                })
                .collect();
            for corner in 0..(1usize << dims.len()) {
                let mut idx = vec![0; dims.len()];
                let mut weight = w / vol;
                for a in 0..dims.len() {
                    let (j, wa) = axes[a][corner >> a & 1];
                    idx[a] = j;
                    weight *= wa;
                }
                if weight == 0.0 {
                    continue;
                }
                let node = out.node_mut(fft::ravel(&idx, &dims));
                for (v, p) in node.iter_mut().zip(&piece.polar) {
                    *v += weight * p;
                }
            }
        }
    }
    out
}

/// Splats the singular part onto the grid and convolves with the tensor bump
/// of radius `eps` cells (zero extension outside `Ω`).
pub fn mollify_measure(mu: &GridMeasure, eps: f64) -> Result<GridMeasure> {
    if !(eps >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mollifier radius {eps} must be at least one cell"
        )));
    }
    let mut cur = splat_singular(mu);
    let w = kernel::grid_weights(eps);
    let half = (w.len() / 2) as i64;
    let dims = mu.dims().to_vec();
    let n = mu.ncomp();
    for axis in 0..dims.len() {
        let m = dims[axis] as i64;
        let stride: usize = dims[axis + 1..].iter().product();
        let mut next = PeriodicField::zeros(&dims, n);
        for i in 0..cur.node_count() {
            let j = ((i / stride) % dims[axis]) as i64;
            let base = i as i64 - j * stride as i64;
            let out = next.node_mut(i);
            for (o, wk) in w.iter().enumerate() {
                let jj = j + o as i64 - half;
                if jj < 0 || jj >= m {
                    continue;
                }
                let src = (base + jj * stride as i64) as usize;
                for (c, v) in cur.node(src).iter().enumerate() {
                    out[c] += wk * v;
                }
            }
        }
        cur = next;
    }
    Ok(GridMeasure {
        domain: mu.domain.clone(),
        density: cur,
        singular: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupScaling {
    /// `c = r^{−d}`
    Lebesgue,
    /// `c = 1/|μ|(Q_r(x0))`
    Mass,
}

/// Multilinear interpolation of the density at a physical point, clamped to
/// the outermost cell centres.
pub fn interpolate_density(mu: &GridMeasure, x: &[f64], out: &mut [f64]) {
    let dims = mu.dims();
    let h = mu.cell_widths();
    let axes: Vec<(usize, usize, f64)> = (0..dims.len())
        .map(|a| {
            let t = ((x[a] - mu.domain.lo[a]) / h[a] - 0.5).clamp(0.0, (dims[a] - 1) as f64);
            let j = (t.floor() as usize).min(dims[a].saturating_sub(2));
            if dims[a] == 1 {
                (0, 0, 0.0)
            } else {
                (j, j + 1, t - j as f64)
            }
        })
        .collect();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut idx = vec![0; dims.len()];
    for corner in 0..(1usize << dims.len()) {
        let mut w = 1.0;
        for a in 0..dims.len() {
            let (j0, j1, t) = axes[a];
            if corner >> a & 1 == 1 {
                idx[a] = j1;
                w *= t;
            } else {
                idx[a] = j0;
                w *= 1.0 - t;
            }
        }
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(mu.density.node(fft::ravel(&idx, dims))) {
            *o += w * v;
        }
    }
}

/// `c · T^{(x0,r)}_# μ` on the centred unit cube, with `T(x) = (x − x0)/r`.
pub fn blowup_measure(
    mu: &GridMeasure,
    x0: &[f64],
    r: f64,
    scaling: BlowupScaling,
) -> Result<GridMeasure> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveScale(r));
    }
    let d = mu.domain.dim();
    if x0.len() != d {
        return Err(Error::Shape(format!(
            "point has length {}, domain dimension is {d}",
            x0.len()
        )));
    }
    let inside = (0..d).all(|a| {
        x0[a] - 0.5 * r >= mu.domain.lo[a] - 1e-12 && x0[a] + 0.5 * r <= mu.domain.hi[a] + 1e-12
    });
    if !inside {
        return Err(Error::OutOfDomain);
    }
    let cube = BoxDomain::centred_cube(d);
    let dims = mu.dims().to_vec();
    let n = mu.ncomp();
    let raw = PeriodicField::from_fn(&dims, n, |y, out| {
        let x: Vec<f64> = (0..d).map(|a| x0[a] + r * y[a]).collect();
        interpolate_density(mu, &x, out);
    });
    let rd = r.powi(d as i32);
    // singular pieces restricted to Q_r(x0), in blown-up coordinates
    let qr = BoxDomain {
        lo: (0..d).map(|a| x0[a] - 0.5 * r).collect(),
        hi: (0..d).map(|a| x0[a] + 0.5 * r).collect(),
    };
    let mut pieces = Vec::new();
    for p in &mu.singular {
        match &p.geometry {
            Geometry::Atom { x0: xa } => {
                if qr.contains(xa) {
                    let y: Vec<f64> = (0..d).map(|a| (xa[a] - x0[a]) / r).collect();
                    pieces.push((Geometry::Atom { x0: y }, p.mass, p.polar.clone()));
                }
            }
            Geometry::Hyperplane { normal, offset } => {
                let full = mu.domain.section_area(normal, *offset);
                let part = qr.section_area(normal, *offset);
                if part > 0.0 && full > 0.0 {
                    let y_off = (offset - dot(x0, normal)) / r;
                    pieces.push((
                        Geometry::Hyperplane {
                            normal: normal.clone(),
                            offset: y_off,
                        },
                        p.mass * part / full,
                        p.polar.clone(),
                    ));
                }
            }
        }
    }
    let c = match scaling {
        BlowupScaling::Lebesgue => 1.0 / rd,
        BlowupScaling::Mass => {
            let ac = raw.l1_norm() * rd;
            let total = ac + pieces.iter().map(|p| p.1).sum::<f64>();
            if total == 0.0 {
                return Err(Error::InvalidArgument(
                    "measure vanishes on the blow-up cube".into(),
                ));
            }
            1.0 / total
        }
    };
    let density = raw.scaled(c * rd);
    let singular = pieces
        .into_iter()
        .map(|(g, m, p)| SingularPiece::new(g, c * m, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridMeasure {
        domain: cube,
        density,
        singular,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarCheck {
    pub piece: usize,
    pub polar: Vec<f64>,
    pub member: bool,
    pub residual: f64,
    pub witness_xi: Vec<f64>,
}

/// Wave-cone membership of every singular polar; non-members are flagged.
pub fn singular_polar_check(mu: &GridMeasure, op: &OperatorSpec) -> Result<Vec<PolarCheck>> {
    let sampling = SphereSampling::default_for(op.dim());
    mu.singular
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let rep = wave_cone::wavecone_membership(op, &p.polar, &sampling)?;
            Ok(PolarCheck {
                piece: i,
                polar: p.polar.clone(),
                member: rep.member,
                residual: rep.residual,
                witness_xi: rep.witness_xi,
            })
        })
        .collect()
}

/// Spatial weight `φ(x) = Π_a t_a^{p_a}` in box-relative coordinates
/// `t = (x − lo)/(hi − lo) ∈ [0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialWeight {
    pub powers: Vec<u32>,
}

impl MonomialWeight {
    pub fn eval(&self, domain: &BoxDomain, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .enumerate()
            .map(|(a, &p)| ((x[a] - domain.lo[a]) / (domain.hi[a] - domain.lo[a])).powi(p as i32))
            .product()
    }
}

#[derive(Debug, Clone)]
pub struct TestPair {
    pub weight: MonomialWeight,
    pub label: String,
    pub h: Integrand,
}

/// The fixed battery: the first 8 monomials by total degree times
/// `|A|`, `√(1+|A|²)`, `|A·e1|` and `|A·e_N|`.
pub fn default_battery(d: usize, n: usize) -> Result<Vec<TestPair>> {
    let mut monomials: Vec<Vec<u32>> = Vec::new();
    let mut deg = 0u32;
    while monomials.len() < 8 {
        let mut level: Vec<Vec<u32>> = Vec::new();
        enumerate_degree(d, deg, &mut Vec::new(), &mut level);
        level.reverse();
        monomials.extend(level);
        deg += 1;
    }
    monomials.truncate(8);
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let hs = [
        ("abs", IntegrandKind::Abs),
        ("area", IntegrandKind::Area),
        (
            "proj_first",
            IntegrandKind::Aniso {
                a: 0.0,
                b: 1.0,
                e: unit(0),
            },
        ),
        (
            "proj_last",
            IntegrandKind::Aniso {
                a: 0.0,
                b: 1.0,
                e: unit(n - 1),
            },
        ),
    ];
    let mut out = Vec::new();
    for p in &monomials {
        for (label, kind) in &hs {
            out.push(TestPair {
                weight: MonomialWeight { powers: p.clone() },
                label: format!("x^{p:?}*{label}"),
                h: IntegrandSpec {
                    kind: kind.clone(),
                    weight: None,
                }
                .build()?,
            });
        }
    }
    Ok(out)
}

fn enumerate_degree(d: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == d - 1 {
        let mut p = prefix.clone();
        p.push(deg - prefix.iter().sum::<u32>());
        out.push(p);
        return;
    }
    let used: u32 = prefix.iter().sum();
    for k in 0..=(deg - used) {
        prefix.push(k);
        enumerate_degree(d, deg, prefix, out);
        prefix.pop();
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDiagnostics {
    pub label: String,
    pub last: f64,
    pub cesaro: f64,
    /// `max − min` over the final third of the sequence.
    pub tail_spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalYoungMeasure {
    pub labels: Vec<String>,
    /// `moments[j][pair]`.
    pub moments: Vec<Vec<f64>>,
    pub diagnostics: Vec<PairDiagnostics>,
    /// Average over the final third of the splatted densities.
    #[serde(skip)]
    pub barycenter_field: PeriodicField,
}

/// Pairings `⟨⟨φ⊗h, δ[μ_j]⟩⟩` for the battery plus extra integrands paired
/// with `φ ≡ 1`.
pub fn ym_moments(
    sequence: &[GridMeasure],
    pairs: &[TestPair],
    extras: &[Integrand],
) -> Result<EmpiricalYoungMeasure> {
    let first = sequence
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty measure sequence".into()))?;
    if sequence
        .iter()
        .any(|m| m.domain != first.domain || m.dims() != first.dims() || m.ncomp() != first.ncomp())
    {
        return Err(Error::DomainMismatch);
    }
    let d = first.domain.dim();
    let mut all: Vec<TestPair> = pairs.to_vec();
    for h in extras {
        all.push(TestPair {
            weight: MonomialWeight { powers: vec![0; d] },
            label: format!("1*{}", h.name),
            h: h.clone(),
        });
    }
    let moments: Vec<Vec<f64>> = sequence
        .par_iter()
        .map(|mu| {
            all.iter()
                .map(|p| {
                    let dom = mu.domain.clone();
                    let w = p.weight.clone();
                    evaluate_weighted(&p.h, mu, RecessionMode::Analytic, &move |x| w.eval(&dom, x))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let tail_start = sequence.len() - sequence.len().div_ceil(3);
    let diagnostics = all
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let series: Vec<f64> = moments.iter().map(|m| m[k]).collect();
            let tail = &series[tail_start..];
            PairDiagnostics {
                label: p.label.clone(),
                last: *series.last().expect("nonempty"),
                cesaro: series.iter().sum::<f64>() / series.len() as f64,
                tail_spread: tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - tail.iter().cloned().fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let mut bary = PeriodicField::zeros(first.dims(), first.ncomp());
    let tail = &sequence[tail_start..];
    for mu in tail {
        bary.axpy(1.0 / tail.len() as f64, &splat_singular(mu));
    }
    Ok(EmpiricalYoungMeasure {
        labels: all.iter().map(|p| p.label.clone()).collect(),
        moments,
        diagnostics,
        barycenter_field: bary,
    })
}
