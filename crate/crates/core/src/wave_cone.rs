//! Constant-rank checks, wave-cone membership, `V_A = span Λ_A` and
//! characteristic sets, computed by sphere sampling plus local refinement.
//!
//! The wave cone is `Λ_A = ⋃_{|ξ|=1} ker M(ξ)`, where `M` is the real part of
//! the principal symbol. Membership of `P` is decided by minimising the
//! scale-free residual `‖M(ξ)P‖ / (‖M(ξ)‖_F ‖P‖)` over the sphere.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, null_space};
use crate::operator::OperatorSpec;
use crate::sphere::{canonical, SphereSampling};

/// Relative singular-value threshold for ranks and kernels.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Residual below which a vector counts as a wave-cone member.
pub const DEFAULT_MEMBER_TOL: f64 = 1e-6;
/// Singular-value cutoff when orthonormalising accumulated kernels.
pub const SPAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct RankProfile {
    pub ranks: Vec<usize>,
    pub min_rank: usize,
    pub max_rank: usize,
    pub tol: f64,
    pub is_constant: bool,
    pub min_witness: Vec<f64>,
    pub max_witness: Vec<f64>,
}

pub fn rank_profile(op: &OperatorSpec, sampling: &SphereSampling, tol: f64) -> Result<RankProfile> {
    if sampling.is_empty() {
        return Err(Error::InvalidArgument("empty sampling".into()));
    }
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::InvalidArgument(format!(
            "rank tolerance {tol} outside (0, 1e-2]"
        )));
    }
    let ranks: Vec<(usize, f64)> = sampling
        .points
        .par_iter()
        .map(|xi| {
            let m = op.principal_symbol(xi).real_part;
            let sv = linalg::singular_values(&m);
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let r = if smax == 0.0 {
                0
            } else {
                sv.iter().filter(|&&s| s > tol * smax).count()
            };
            (r, smax)
        })
        .collect();
    if ranks.iter().all(|&(_, s)| s == 0.0) {
        return Err(Error::DegenerateOperator);
    }
    let (mut imin, mut imax) = (0, 0);
    for (i, &(r, _)) in ranks.iter().enumerate() {
        if r < ranks[imin].0 {
            imin = i;
        }
        if r > ranks[imax].0 {
            imax = i;
        }
    }
    let min_rank = ranks[imin].0;
    let max_rank = ranks[imax].0;
    Ok(RankProfile {
        ranks: ranks.into_iter().map(|(r, _)| r).collect(),
        min_rank,
        max_rank,
        tol,
        is_constant: min_rank == max_rank,
        min_witness: sampling.points[imin].clone(),
        max_witness: sampling.points[imax].clone(),
    })
}

/// Rank profile at the default sampling and tolerance.
pub fn default_rank_profile(op: &OperatorSpec) -> Result<RankProfile> {
    rank_profile(op, &SphereSampling::default_for(op.dim()), DEFAULT_RANK_TOL)
}

/// `‖M(ξ)P‖ / (‖M(ξ)‖_F ‖P‖)`; zero where the symbol vanishes.
pub fn normalized_residual(op: &OperatorSpec, p: &[f64], xi: &[f64]) -> f64 {
    let m = op.principal_symbol(xi).real_part;
    let mf = m.norm();
    let pn = linalg::norm(p);
    if mf == 0.0 || pn == 0.0 {
        return 0.0;
    }
    let mp = &m * DVector::from_column_slice(p);
    mp.norm() / (mf * pn)
}

#[derive(Debug, Clone, Copy)]
pub struct MembershipConfig {
    pub tol_member: f64,
    pub refine_starts: usize,
    pub max_iters: usize,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        MembershipConfig {
            tol_member: DEFAULT_MEMBER_TOL,
            refine_starts: 4,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveConeReport {
    pub query: Vec<f64>,
    pub coarse_residual: f64,
    pub residual: f64,
    pub witness_xi: Vec<f64>,
    pub member: bool,
    pub tol_member: f64,
}

pub fn wavecone_membership(
    op: &OperatorSpec,
    p: &[f64],
    sampling: &SphereSampling,
) -> Result<WaveConeReport> {
    wavecone_membership_with(op, p, sampling, MembershipConfig::default())
}

pub fn wavecone_membership_with(
    op: &OperatorSpec,
    p: &[f64],
    sampling: &SphereSampling,
    cfg: MembershipConfig,
) -> Result<WaveConeReport> {
    if p.len() != op.state_dim() {
        return Err(Error::Shape(format!(
            "vector has length {}, operator state dimension is {}",
            p.len(),
            op.state_dim()
        )));
    }
    if linalg::norm(p) == 0.0 {
        return Err(Error::ZeroVector);
    }
    if sampling.is_empty() {
        return Err(Error::InvalidArgument("empty sampling".into()));
    }
    let coarse: Vec<f64> = sampling
        .points
        .par_iter()
        .map(|xi| normalized_residual(op, p, xi))
        .collect();
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|&a, &b| coarse[a].total_cmp(&coarse[b]));
    let coarse_best = coarse[order[0]];

    let h = sampling.spacing();
    let mut best = (coarse_best, sampling.points[order[0]].clone());
    for &i in order.iter().take(cfg.refine_starts) {
        let (r, xi) = refine(
            |xi| normalized_residual(op, p, xi),
            &sampling.points[i],
            h,
            cfg.max_iters,
        );
        if r < best.0 {
            best = (r, xi);
        }
    }
    Ok(WaveConeReport {
        query: p.to_vec(),
        coarse_residual: coarse_best,
        residual: best.0,
        witness_xi: best.1,
        member: best.0 <= cfg.tol_member,
        tol_member: cfg.tol_member,
    })
}

/// Orthonormal basis of `V_A`, accumulated from the sampled kernels.
#[derive(Debug, Clone)]
pub struct WaveConeSpan {
    /// `N × dim` with orthonormal columns.
    pub basis: DMatrix<f64>,
    pub constant_rank: bool,
}

impl WaveConeSpan {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|c| self.basis.column(c).iter().cloned().collect())
            .collect()
    }

    pub fn distance(&self, v: &[f64]) -> f64 {
        linalg::distance_to_span(&self.basis, v)
    }
}

pub fn wavecone_span(op: &OperatorSpec, sampling: &SphereSampling) -> WaveConeSpan {
    let constant_rank = match rank_profile(op, sampling, DEFAULT_RANK_TOL) {
        Ok(p) => p.is_constant,
        Err(_) => false,
    };
    if !constant_rank {
        warn!("wave-cone span computed for an operator failing the constant rank check");
    }
    let n = op.state_dim();
    let projectors: Vec<DMatrix<f64>> = sampling
        .points
        .par_iter()
        .map(|xi| null_space(&op.principal_symbol(xi).real_part, DEFAULT_RANK_TOL).projector())
        .collect();
    let gram = projectors.iter().fold(DMatrix::zeros(n, n), |a, b| a + b);
    WaveConeSpan {
        basis: linalg::gram_range(&gram, SPAN_TOL),
        constant_rank,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicSetReport {
    pub p0: Vec<f64>,
    /// One unit representative per antipodal pair `±ξ`.
    pub roots: Vec<Vec<f64>>,
    pub subspace_dim: usize,
    pub subspace_basis: Vec<Vec<f64>>,
    /// Largest distance of a root from the fitted subspace.
    pub fit_residual: f64,
    /// Largest normalised residual over unit vectors of the fitted subspace;
    /// small values mean the whole subspace consists of roots.
    pub max_deviation: f64,
    pub is_subspace: bool,
}

const ROOT_CANDIDATE_RESIDUAL: f64 = 0.25;
const MAX_ROOT_CANDIDATES: usize = 256;

pub fn characteristic_set(
    op: &OperatorSpec,
    p0: &[f64],
    sampling: &SphereSampling,
) -> Result<CharacteristicSetReport> {
    let cfg = MembershipConfig::default();
    let membership = wavecone_membership_with(op, p0, sampling, cfg)?;
    if !membership.member {
        return Err(Error::NotInWaveCone {
            residual: membership.residual,
        });
    }
    let residual = |xi: &[f64]| normalized_residual(op, p0, xi);
    let coarse: Vec<f64> = sampling.points.par_iter().map(|xi| residual(xi)).collect();
    let mut order: Vec<usize> = (0..coarse.len())
        .filter(|&i| coarse[i] <= ROOT_CANDIDATE_RESIDUAL)
        .collect();
    order.sort_by(|&a, &b| coarse[a].total_cmp(&coarse[b]));

    let h = sampling.spacing();
    let mut seeds: Vec<&Vec<f64>> = Vec::new();
    for &i in &order {
        let p = &sampling.points[i];
        if seeds.iter().all(|q| projective_distance(p, q) > 2.0 * h) {
            seeds.push(p);
            if seeds.len() == MAX_ROOT_CANDIDATES {
                break;
            }
        }
    }
    seeds.push(&membership.witness_xi);

    let refined: Vec<(f64, Vec<f64>)> = seeds
        .par_iter()
        .map(|s| refine(residual, s, h, cfg.max_iters))
        .collect();
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for (r, xi) in refined {
        if r <= cfg.tol_member && roots.iter().all(|q| projective_distance(&xi, q) > 1e-4) {
            roots.push(canonical(xi));
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let d = op.dim();
    let mut rmat = DMatrix::zeros(d, roots.len());
    for (c, r) in roots.iter().enumerate() {
        rmat.set_column(c, &DVector::from_column_slice(r));
    }
    let mut gram = &rmat * rmat.transpose();
    gram /= roots.len().max(1) as f64;
    let basis = linalg::gram_range(&gram, 1e-4);
    let subspace_dim = basis.ncols();
    let fit_residual = roots
        .iter()
        .map(|r| linalg::distance_to_span(&basis, r))
        .fold(0.0, f64::max);

    let probes: Vec<Vec<f64>> = match subspace_dim {
        0 => Vec::new(),
        1 => vec![basis.column(0).iter().cloned().collect()],
        k => SphereSampling::with_count(k, 64)
            .points
            .iter()
            .map(|c| {
                (&basis * DVector::from_column_slice(c))
                    .iter()
                    .cloned()
                    .collect()
            })
            .collect(),
    };
    let max_deviation = probes.iter().map(|xi| residual(xi)).fold(0.0, f64::max);
    Ok(CharacteristicSetReport {
        p0: p0.to_vec(),
        roots,
        subspace_dim,
        subspace_basis: (0..subspace_dim)
            .map(|c| basis.column(c).iter().cloned().collect())
            .collect(),
        fit_residual,
        max_deviation,
        is_subspace: subspace_dim > 0 && max_deviation <= cfg.tol_member,
    })
}

/// Distance between the lines spanned by unit vectors `a` and `b`.
pub fn projective_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus: f64 = a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum();
    let minus: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    plus.min(minus).sqrt()
}

/// Per-sample diagnostics for CSV dumps.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub xi: Vec<f64>,
    pub rank: usize,
    pub residual: Option<f64>,
}

pub fn sample_rows(
    op: &OperatorSpec,
    p: Option<&[f64]>,
    sampling: &SphereSampling,
    tol: f64,
) -> Vec<SampleRow> {
    sampling
        .points
        .par_iter()
        .map(|xi| SampleRow {
            xi: xi.clone(),
            rank: linalg::rank(&op.principal_symbol(xi).real_part, tol),
            residual: p.map(|p| normalized_residual(op, p, xi)),
        })
        .collect()
}

/// Minimise `f` on the unit sphere near `start` using a local chart
/// `t ↦ normalize(start + Σ t_i b_i)` over an orthonormal tangent basis.
/// Golden-section search in `d = 2`, Nelder–Mead otherwise.
pub(crate) fn refine<F>(f: F, start: &[f64], h: f64, max_iters: usize) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len();
    if d == 1 {
        return (f(start), start.to_vec());
    }
    let tangents = tangent_basis(start);
    let chart = |t: &[f64]| -> Vec<f64> {
        let mut x = start.to_vec();
        for (ti, b) in t.iter().zip(&tangents) {
            for (xj, bj) in x.iter_mut().zip(b) {
                *xj += ti * bj;
            }
        }
        let n = linalg::norm(&x);
        x.iter().map(|v| v / n).collect()
    };
    let g = |t: &[f64]| f(&chart(t));
    let f0 = f(start);
    let (val, t) = if d == 2 {
        golden_section(|s| g(&[s]), -2.0 * h, 2.0 * h, max_iters)
            .map_or((f64::INFINITY, vec![0.0]), |(v, s)| (v, vec![s]))
    } else {
        nelder_mead(&g, d - 1, 2.0 * h, max_iters)
    };
    if val < f0 {
        (val, chart(&t))
    } else {
        (f0, start.to_vec())
    }
}

fn tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        for b in &basis {
            let c = linalg::dot(&e, b);
            for (ej, bj) in e.iter_mut().zip(b) {
                *ej -= c * bj;
            }
        }
        let n = linalg::norm(&e);
        if n > 1e-8 {
            basis.push(e.iter().map(|v| v / n).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

fn golden_section<G: Fn(f64) -> f64>(
    g: G,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> Option<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..iters {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    Some(if fc < fd { (fc, c) } else { (fd, d) })
}

fn nelder_mead<G: Fn(&[f64]) -> f64>(g: &G, n: usize, size: f64, iters: usize) -> (f64, Vec<f64>) {
    let mut simplex: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = size;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| g(v)).collect();
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = simplex[1..]
            .iter()
            .map(|v| {
                linalg::norm(
                    &v.iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                )
            })
            .fold(0.0, f64::max);
        if spread < 1e-14 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = g(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = g(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let xc = if fr < vals[n] {
                along(0.5)
            } else {
                along(-0.5)
            };
            let fc = g(&xc);
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = simplex[i]
                        .iter()
                        .zip(&best)
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    vals[i] = g(&simplex[i]);
                }
            }
        }
    }
    let i = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    (vals[i], simplex[i].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{builtin_operator, MultiIndex};

    fn diag_op() -> OperatorSpec {
        let e = |i: usize| {
            let mut m = DMatrix::zeros(2, 2);
            m[(i, i)] = 1.0;
            (MultiIndex::unit(2, i), m)
        };
        OperatorSpec::new(2, 2, 2, 1, [e(0), e(1)]).unwrap()
    }

    #[test]
    fn curl_rank_two_matches_hand_svd() {
        let op = builtin_operator("curl", 2, 2, None).unwrap();
        let prof =
            rank_profile(&op, &SphereSampling::with_count(2, 256), DEFAULT_RANK_TOL).unwrap();
        assert!(prof.is_constant);
        assert_eq!((prof.min_rank, prof.max_rank), (2, 2));
        for t in 0..8 {
            let a = 0.4 + t as f64 * 0.7;
            let xi = [a.cos(), a.sin()];
            assert_eq!(linalg::rank(&op.principal_symbol(&xi).real_part, 1e-8), 2);
        }
    }

    #[test]
    fn div_has_constant_rank_one() {
        let op = builtin_operator("div", 2, 1, None).unwrap();
        let prof = rank_profile(&op, &SphereSampling::with_count(2, 37), DEFAULT_RANK_TOL).unwrap();
        assert!(prof.is_constant);
        assert_eq!(prof.min_rank, 1);
    }

    #[test]
    fn diag_symbol_drops_rank_on_axes() {
        let op = diag_op();
        let prof = default_rank_profile(&op).unwrap();
        assert!(!prof.is_constant);
        assert_eq!((prof.min_rank, prof.max_rank), (1, 2));
        assert!(prof.min_witness.iter().filter(|x| **x == 0.0).count() == 1);
    }

    #[test]
    fn rank_profile_errors() {
        let op = builtin_operator("div", 2, 1, None).unwrap();
        let s = SphereSampling::with_count(2, 8);
        assert!(rank_profile(&op, &s, 0.5).is_err());
        // a sampling that only hits the zero set of ξ1 ↦ [ξ1 0]
        let only_x = OperatorSpec::new(
            2,
            2,
            1,
            1,
            [(
                MultiIndex::unit(2, 0),
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            )],
        )
        .unwrap();
        let s = SphereSampling::from_points(2, vec![vec![0.0, 1.0]]);
        assert!(matches!(
            rank_profile(&only_x, &s, 1e-8),
            Err(Error::DegenerateOperator)
        ));
    }

    #[test]
    fn rank_one_matrix_is_member() {
        let op = builtin_operator("curl", 2, 2, None).unwrap();
        let s = SphereSampling::default_for(2);
        let r = wavecone_membership(&op, &[1.0, 0.0, 0.0, 0.0], &s).unwrap();
        assert!(r.member);
        assert!(r.residual <= 1e-8);
        assert!(projective_distance(&r.witness_xi, &[1.0, 0.0]) < 1e-3);
    }

    #[test]
    fn identity_is_not_member() {
        let op = builtin_operator("curl", 2, 2, None).unwrap();
        let s = SphereSampling::default_for(2);
        let r = wavecone_membership(&op, &[1.0, 0.0, 0.0, 1.0], &s).unwrap();
        assert!(!r.member);
        assert!(r.residual >= 0.1);
        // brute force over 10^4 directions
        let brute = (0..10_000)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 10_000.0;
                normalized_residual(&op, &[1.0, 0.0, 0.0, 1.0], &[t.cos(), t.sin()])
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - r.residual).abs() < 1e-9);
    }

    #[test]
    fn divergence_cone_is_everything() {
        let op = builtin_operator("div", 2, 1, None).unwrap();
        let s = SphereSampling::default_for(2);
        for p in [[1.0, 2.0], [-0.3, 0.1], [0.0, 1.0]] {
            let r = wavecone_membership(&op, &p, &s).unwrap();
            assert!(r.member, "{p:?}");
            assert!(linalg::dot(&r.witness_xi, &p).abs() < 1e-6 * linalg::norm(&p));
        }
        assert!(matches!(
            wavecone_membership(&op, &[0.0, 0.0], &s),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn off_grid_roots_are_refined() {
        // P = a ⊗ η with η at an angle between samples
        let op = builtin_operator("curl", 2, 1, None).unwrap();
        let t: f64 = 0.123_456;
        let p = [t.cos(), t.sin()];
        let r = wavecone_membership(&op, &p, &SphereSampling::with_count(2, 90)).unwrap();
        assert!(r.member);
        assert!(r.residual < 1e-10);
        assert!(projective_distance(&r.witness_xi, &p) < 1e-8);
    }

    #[test]
    fn refinement_in_three_dimensions() {
        let op = builtin_operator("curl", 3, 1, None).unwrap();
        let eta = [0.3, -0.4, 0.866_025];
        let n = linalg::norm(&eta);
        let p: Vec<f64> = eta.iter().map(|x| x / n).collect();
        let r = wavecone_membership(&op, &p, &SphereSampling::with_count(3, 400)).unwrap();
        assert!(r.member, "residual {}", r.residual);
        assert!(projective_distance(&r.witness_xi, &p) < 1e-4);
    }

    #[test]
    fn spans() {
        let s = SphereSampling::default_for(2);
        let div = builtin_operator("div", 2, 1, None).unwrap();
        assert_eq!(wavecone_span(&div, &s).dim(), 2);
        let curl = builtin_operator("curl", 2, 2, None).unwrap();
        assert_eq!(wavecone_span(&curl, &s).dim(), 4);
        let a0 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let lap = builtin_operator("laplace_coeff", 2, 1, Some(&a0)).unwrap();
        let span = wavecone_span(&lap, &s);
        assert_eq!(span.dim(), 1);
        assert!(span.distance(&[0.0, 1.0]) < 1e-12);
        // kernel is ξ-independent
        for xi in [[1.0, 0.0], [0.6, 0.8], [-0.2, 0.9]] {
            let ns = null_space(&lap.principal_symbol(&xi).real_part, 1e-10);
            assert_eq!(ns.dim(), 1);
            assert!((ns.basis[(1, 0)].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn characteristic_sets() {
        let s = SphereSampling::default_for(2);
        let div = builtin_operator("div", 2, 1, None).unwrap();
        let rep = characteristic_set(&div, &[0.0, 1.0], &s).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!(projective_distance(&rep.roots[0], &[1.0, 0.0]) < 1e-8);
        assert_eq!(rep.subspace_dim, 1);
        assert!(rep.is_subspace);

        let curl = builtin_operator("curl", 2, 2, None).unwrap();
        let rep = characteristic_set(&curl, &[1.0, 0.0, 0.0, 0.0], &s).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!(projective_distance(&rep.roots[0], &[1.0, 0.0]) < 1e-8);
        assert_eq!(rep.subspace_dim, 1);

        let cc = builtin_operator("curlcurl", 2, 1, None).unwrap();
        let rep = characteristic_set(&cc, &[1.0, 0.0, 0.0], &s).unwrap();
        assert_eq!(rep.subspace_dim, 1);
        assert!(rep
            .roots
            .iter()
            .all(|r| projective_distance(r, &[1.0, 0.0]) < 1e-3));

        assert!(matches!(
            characteristic_set(&curl, &[1.0, 0.0, 0.0, 1.0], &s),
            Err(Error::NotInWaveCone { .. })
        ));
    }

    #[test]
    fn whole_plane_of_roots() {
        let a0 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let lap = builtin_operator("laplace_coeff", 2, 1, Some(&a0)).unwrap();
        let rep =
            characteristic_set(&lap, &[0.0, 1.0], &SphereSampling::with_count(2, 64)).unwrap();
        assert_eq!(rep.subspace_dim, 2);
        assert!(rep.is_subspace);
    }
}
