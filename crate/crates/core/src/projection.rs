//! Fourier-multiplier projection onto zero-mean periodic A-free fields,
//! operator application, negative Sobolev norms and the periodic
//! correction pipeline (cutoff, mollify, recentre, project).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{self, FftNd};
use crate::field::PeriodicField;
use crate::kernel;
use crate::linalg::null_space;
use crate::operator::OperatorSpec;
use crate::wave_cone;

/// Null-space threshold for the per-frequency projectors.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Orthogonal projectors `P(ξ)` onto `ker M(ξ)` for every lattice frequency.
/// `P(0) = 0` and unpaired Nyquist frequencies are zero as well.
#[derive(Debug)]
pub struct ProjectorTable {
    dims: Vec<usize>,
    ncomp: usize,
    /// `N × N` row-major blocks, one per flat frequency index.
    data: Vec<f64>,
    fft: FftNd,
}

pub fn build_projector_table(op: &OperatorSpec, dims: &[usize]) -> Result<ProjectorTable> {
    if dims.len() != op.dim() {
        return Err(Error::GridMismatch(format!(
            "grid has dimension {}, operator acts in dimension {}",
            dims.len(),
            op.dim()
        )));
    }
    if !op.is_homogeneous() {
        return Err(Error::NonHomogeneousOperator);
    }
    let profile = wave_cone::default_rank_profile(op)?;
    if !profile.is_constant {
        return Err(Error::ConstantRankViolation {
            min_rank: profile.min_rank,
            max_rank: profile.max_rank,
        });
    }
    let n = op.state_dim();
    let total: usize = dims.iter().product();
    // one SVD per ±ξ pair keeps P(−ξ) = P(ξ) exact
    let blocks: Vec<Option<Vec<f64>>> = (0..total)
        .into_par_iter()
        .map(|f| {
            if f == 0 || fft::is_unpaired(f, dims) || fft::negated(f, dims) < f {
                return None;
            }
            let xi: Vec<f64> = fft::frequency_vector(f, dims)
                .iter()
                .map(|&k| k as f64)
                .collect();
            let p = null_space(&op.principal_symbol(&xi).real_part, PROJECTOR_TOL).projector();
            let p = (&p + p.transpose()) * 0.5;
            let mut out = vec![0.0; n * n];
            for r in 0..n {
                for c in 0..n {
                    out[r * n + c] = p[(r, c)];
                }
            }
            Some(out)
        })
        .collect();
    let mut data = vec![0.0; total * n * n];
    for f in 0..total {
        let g = fft::negated(f, dims);
        let src = if g < f { &blocks[g] } else { &blocks[f] };
        if let Some(b) = src {
            data[f * n * n..(f + 1) * n * n].copy_from_slice(b);
        }
    }
    Ok(ProjectorTable {
        dims: dims.to_vec(),
        ncomp: n,
        data,
        fft: FftNd::new(dims),
    })
}

/// Builds the table once per `(operator, grid)` pair and reuses it afterwards.
pub fn cached_projector_table(op: &OperatorSpec, dims: &[usize]) -> Result<Arc<ProjectorTable>> {
    type TableCache = Mutex<HashMap<(String, Vec<usize>), Arc<ProjectorTable>>>;
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let key = (op.to_json_string(), dims.to_vec());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&key) {
        return Ok(t.clone());
    }
    let table = Arc::new(build_projector_table(op, dims)?);
    cache.lock().expect("cache lock").insert(key, table.clone());
    Ok(table)
}

impl ProjectorTable {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }

    /// The projector at a flat frequency index.
    pub fn matrix(&self, flat: usize) -> DMatrix<f64> {
        let n = self.ncomp;
        DMatrix::from_row_slice(n, n, &self.data[flat * n * n..(flat + 1) * n * n])
    }

    /// The projector at an integer frequency, wrapped onto the lattice.
    pub fn matrix_at(&self, xi: &[i64]) -> DMatrix<f64> {
        let idx: Vec<usize> = xi
            .iter()
            .zip(&self.dims)
            .map(|(&k, &m)| k.rem_euclid(m as i64) as usize)
            .collect();
        self.matrix(fft::ravel(&idx, &self.dims))
    }

    /// Applies `P(ξ)` to per-component spectra in place.
    pub fn apply_spectrum(&self, spec: &mut [Vec<Complex64>]) {
        let n = self.ncomp;
        let total = self.fft.len();
        let mut v = vec![Complex64::default(); n];
        for f in 0..total {
            let block = &self.data[f * n * n..(f + 1) * n * n];
            for (c, slot) in v.iter_mut().enumerate() {
                *slot = spec[c][f];
            }
            for r in 0..n {
                let row = &block[r * n..(r + 1) * n];
                spec[r][f] = row.iter().zip(&v).map(|(p, z)| z * *p).sum();
            }
        }
    }

    /// `Pu` together with the largest imaginary residue of the inverse transform.
    pub fn apply_with_residue(&self, u: &PeriodicField) -> Result<(PeriodicField, f64)> {
        if u.dims() != self.dims.as_slice() || u.ncomp() != self.ncomp {
            return Err(Error::GridMismatch(format!(
                "field {:?}×{} vs table {:?}×{}",
                u.dims(),
                u.ncomp(),
                self.dims,
                self.ncomp
            )));
        }
        let mut spec = u.spectrum(&self.fft);
        self.apply_spectrum(&mut spec);
        Ok(PeriodicField::from_spectrum(&self.dims, spec, &self.fft))
    }
}

pub fn project_afree(table: &ProjectorTable, u: &PeriodicField) -> Result<PeriodicField> {
    table.apply_with_residue(u).map(|(p, _)| p)
}

/// `Σ_α (2πiξ)^α A_α û(ξ)` transformed back to a real `n`-component field.
/// Unpaired Nyquist modes are dropped.
pub fn apply_operator(op: &OperatorSpec, u: &PeriodicField) -> Result<PeriodicField> {
    check_operator_grid(op, u)?;
    let dims = u.dims();
    let fft = FftNd::new(dims);
    let spec = u.spectrum(&fft);
    let out = symbol_times_spectrum(op, dims, &spec);
    Ok(PeriodicField::from_spectrum(dims, out, &fft).0)
}

fn check_operator_grid(op: &OperatorSpec, u: &PeriodicField) -> Result<()> {
    if u.dim() != op.dim() || u.ncomp() != op.state_dim() {
        return Err(Error::GridMismatch(format!(
            "field {:?}×{} does not fit an operator with d={}, N={}",
            u.dims(),
            u.ncomp(),
            op.dim(),
            op.state_dim()
        )));
    }
    Ok(())
}

fn symbol_times_spectrum(
    op: &OperatorSpec,
    dims: &[usize],
    spec: &[Vec<Complex64>],
) -> Vec<Vec<Complex64>> {
    let total: usize = dims.iter().product();
    let n_eq = op.eq_dim();
    let cols: Vec<Vec<Complex64>> = (0..total)
        .into_par_iter()
        .map(|f| {
            if fft::is_unpaired(f, dims) {
                return vec![Complex64::default(); n_eq];
            }
            let xi: Vec<f64> = fft::frequency_vector(f, dims)
                .iter()
                .map(|&k| k as f64)
                .collect();
            let s = op.full_symbol(&xi);
            (0..n_eq)
                .map(|r| (0..spec.len()).map(|c| s[(r, c)] * spec[c][f]).sum())
                .collect()
        })
        .collect();
    (0..n_eq)
        .map(|r| cols.iter().map(|col| col[r]).collect())
        .collect()
}

/// `‖A u‖_{L²} / ‖u‖_{L²}` with `A` applied through its full symbol;
/// zero for the zero field.
pub fn afree_residual(op: &OperatorSpec, u: &PeriodicField) -> Result<f64> {
    check_operator_grid(op, u)?;
    let dims = u.dims();
    let fft = FftNd::new(dims);
    let spec = u.spectrum(&fft);
    let den: f64 = spec.iter().flatten().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return Ok(0.0);
    }
    let num: f64 = symbol_times_spectrum(op, dims, &spec)
        .iter()
        .flatten()
        .map(|z| z.norm_sqr())
        .sum();
    Ok((num / den).sqrt())
}

/// L^q norm of the inverse transform of `û(ξ)/|ξ|^k` (integer `ξ`, no `2π`).
pub fn sobolev_negative_norm(u: &PeriodicField, k: u32, q: f64) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent q = {q} must lie in (1, ∞)"
        )));
    }
    let scale = u.l2_norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mean = crate::linalg::norm(&u.mean());
    if mean > 1e-10 * scale {
        return Err(Error::NonzeroMean(mean));
    }
    let dims = u.dims();
    let fft = FftNd::new(dims);
    let mut spec = u.spectrum(&fft);
    for f in 0..fft.len() {
        let xi = fft::frequency_vector(f, dims);
        let r2: i64 = xi.iter().map(|k| k * k).sum();
        let mult = if r2 == 0 {
            0.0
        } else {
            (r2 as f64).powf(-(k as f64) / 2.0)
        };
        for comp in spec.iter_mut() {
            comp[f] *= mult;
        }
    }
    let (v, _) = PeriodicField::from_spectrum(dims, spec, &fft);
    Ok(v.lq_norm(q))
}

/// Product of per-axis smooth steps: 1 at distance ≥ `margin` from `∂Q`,
/// vanishing on `∂Q`.
pub fn smooth_cutoff(dims: &[usize], margin: f64) -> PeriodicField {
    PeriodicField::from_fn(dims, 1, |x, out| {
        out[0] = x
            .iter()
            .map(|&xa| kernel::smooth_step((0.5 - xa.abs()) / margin))
            .product();
    })
}

/// Periodic convolution with the tensor bump of radius `radius` cells.
pub fn mollify_periodic(u: &PeriodicField, radius: f64) -> PeriodicField {
    let w = kernel::grid_weights(radius);
    let half = (w.len() / 2) as i64;
    let dims = u.dims().to_vec();
    let n = u.ncomp();
    let mut cur = u.clone();
    for axis in 0..dims.len() {
        let m = dims[axis] as i64;
        let stride: usize = dims[axis + 1..].iter().product();
        let mut next = PeriodicField::zeros(&dims, n);
        for i in 0..cur.node_count() {
            let j = ((i / stride) % dims[axis]) as i64;
            let base = i as i64 - j * stride as i64;
            let out = next.node_mut(i);
            for (o, wk) in w.iter().enumerate() {
                let jj = (j + o as i64 - half).rem_euclid(m);
                let src = (base + jj * stride as i64) as usize;
                for (c, v) in cur.node(src).iter().enumerate() {
                    out[c] += wk * v;
                }
            }
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectionDiagnostics {
    /// `afree_residual` of the input field.
    pub input_residual: f64,
    /// `∫ (1 − ψ)|u|`, the mass removed by the cutoff.
    pub cutoff_mass: f64,
    /// Mean subtracted after mollification (Euclidean norm).
    pub removed_mean: f64,
    /// `‖z − u‖_{L¹}`.
    pub l1_change: f64,
    /// `afree_residual` of the output.
    pub output_residual: f64,
}

/// Cutoff near `∂Q`, mollification, mean removal and projection of one field.
/// A radius of at most half a cell makes the mollifier the identity.
pub fn periodic_afree_correction(
    op: &OperatorSpec,
    u: &PeriodicField,
    cutoff_margin: f64,
    mollify_radius: f64,
) -> Result<(PeriodicField, CorrectionDiagnostics)> {
    if !(cutoff_margin > 0.0 && cutoff_margin < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cutoff margin {cutoff_margin} outside (0, 1/2)"
        )));
    }
    if !(mollify_radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mollifier radius {mollify_radius} must be positive"
        )));
    }
    check_operator_grid(op, u)?;
    let table = cached_projector_table(op, u.dims())?;
    let input_residual = afree_residual(op, u)?;
    let psi = smooth_cutoff(u.dims(), cutoff_margin);
    let mut cut = u.clone();
    let mut cutoff_mass = 0.0;
    for i in 0..u.node_count() {
        let s = psi.values()[i];
        let node = cut.node_mut(i);
        cutoff_mass += (1.0 - s) * crate::linalg::norm(node);
        node.iter_mut().for_each(|v| *v *= s);
    }
    cutoff_mass *= u.cell_volume();
    let mut smooth = mollify_periodic(&cut, mollify_radius);
    let removed_mean = crate::linalg::norm(&smooth.mean());
    smooth.subtract_mean();
    let z = project_afree(&table, &smooth)?;
    let diag = CorrectionDiagnostics {
        input_residual,
        cutoff_mass,
        removed_mean,
        l1_change: z.sub(u).l1_norm(),
        output_residual: afree_residual(op, &z)?,
    };
    Ok((z, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::builtin_operator;
    use std::f64::consts::PI;

    #[test]
    fn leray_matches_closed_form() {
        let op = builtin_operator("div", 2, 1, None).unwrap();
        let t = build_projector_table(&op, &[16, 16]).unwrap();
        for xi in [[1i64, 0], [0, 3], [2, -5], [-7, 7], [4, 1], [-3, -2]] {
            let p = t.matrix_at(&xi);
            let r2 = (xi[0] * xi[0] + xi[1] * xi[1]) as f64;
            for a in 0..2 {
                for b in 0..2 {
                    let exact = if a == b { 1.0 } else { 0.0 } - (xi[a] * xi[b]) as f64 / r2;
                    assert!((p[(a, b)] - exact).abs() < 1e-12);
                }
            }
        }
        assert_eq!(t.matrix_at(&[0, 0]).norm(), 0.0);
        assert_eq!(t.matrix_at(&[-8, 3]).norm(), 0.0);
    }

    #[test]
    fn gradient_projector_for_scalar_curl() {
        let op = builtin_operator("curl", 2, 1, None).unwrap();
        let t = build_projector_table(&op, &[8, 8]).unwrap();
        let xi = [3i64, -1];
        let p = t.matrix_at(&xi);
        for a in 0..2 {
            for b in 0..2 {
                assert!((p[(a, b)] - (xi[a] * xi[b]) as f64 / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_preconditions() {
        let a0 = DMatrix::from_row_slice(1, 1, &[1.0]);
        let lap = builtin_operator("laplace_coeff", 2, 1, Some(&a0)).unwrap();
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let lower = OperatorSpec::new(
            2,
            1,
            1,
            2,
            lap.terms()
                .map(|(a, m)| (a.clone(), m.clone()))
                .chain([(crate::operator::MultiIndex::unit(2, 0), b)]),
        )
        .unwrap();
        assert!(matches!(
            build_projector_table(&lower, &[8, 8]),
            Err(Error::NonHomogeneousOperator)
        ));
        let diag = OperatorSpec::new(
            2,
            2,
            2,
            1,
            (0..2).map(|i| {
                let mut m = DMatrix::zeros(2, 2);
                m[(i, i)] = 1.0;
                (crate::operator::MultiIndex::unit(2, i), m)
            }),
        )
        .unwrap();
        assert!(matches!(
            build_projector_table(&diag, &[8, 8]),
            Err(Error::ConstantRankViolation { .. })
        ));
    }

    #[test]
    fn single_mode_norms() {
        let u = PeriodicField::from_fn(&[32, 32], 2, |x, o| {
            let c = (2.0 * PI * x[0]).cos();
            o[0] = 3.0 * c;
            o[1] = 4.0 * c;
        });
        let v = sobolev_negative_norm(&u, 1, 2.0).unwrap();
        assert!((v - 5.0 / 2f64.sqrt()).abs() < 1e-12);
        let u3 = PeriodicField::from_fn(&[32, 32], 1, |x, o| o[0] = (6.0 * PI * x[0]).cos());
        let v3 = sobolev_negative_norm(&u3, 1, 2.0).unwrap();
        assert!((v3 - 1.0 / (3.0 * 2f64.sqrt())).abs() < 1e-12);
        let c = PeriodicField::constant(&[8, 8], &[1.0]);
        assert!(matches!(
            sobolev_negative_norm(&c, 1, 2.0),
            Err(Error::NonzeroMean(_))
        ));
        assert_eq!(
            sobolev_negative_norm(&PeriodicField::zeros(&[8, 8], 1), 1, 2.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn divergence_of_cosine() {
        let op = builtin_operator("div", 2, 1, None).unwrap();
        let u = PeriodicField::from_fn(&[16, 16], 2, |x, o| o[0] = (2.0 * PI * x[0]).cos());
        assert!((afree_residual(&op, &u).unwrap() - 2.0 * PI).abs() < 1e-10);
        let du = apply_operator(&op, &u).unwrap();
        let exact = PeriodicField::from_fn(&[16, 16], 1, |x, o| {
            o[0] = -2.0 * PI * (2.0 * PI * x[0]).sin()
        });
        assert!(du.sub(&exact).sup_norm() < 1e-10);
        assert_eq!(
            afree_residual(&op, &PeriodicField::constant(&[8, 8], &[1.0, 2.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn mollifier_preserves_mean() {
        let u =
            PeriodicField::from_fn(&[16, 12], 1, |x, o| o[0] = (x[0] * 7.0).sin() + x[1] * x[1]);
        let v = mollify_periodic(&u, 2.5);
        assert!((u.mean()[0] - v.mean()[0]).abs() < 1e-14);
        assert_eq!(mollify_periodic(&u, 0.5), u);
    }
}
