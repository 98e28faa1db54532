//! Small dense linear-algebra helpers built on nalgebra's SVD.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Singular-value summary of a matrix together with an orthonormal kernel basis.
#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Columns form an orthonormal basis of the numerical kernel (`cols × dim`).
    pub basis: DMatrix<f64>,
    pub sigma_max: f64,
    pub rank: usize,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `V Vᵀ` onto the kernel.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Numerical kernel of `m`: right singular vectors whose singular value is
/// at most `rel_tol · σ_max`. A zero matrix has the whole space as kernel.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> NullSpace {
    let cols = m.ncols();
    // nalgebra only returns min(rows, cols) right singular vectors, so pad
    // wide matrices with zero rows to get a full V.
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return NullSpace {
            basis: DMatrix::identity(cols, cols),
            sigma_max,
            rank: 0,
        };
    }
    let cutoff = rel_tol * sigma_max;
    let kernel_rows: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= cutoff).collect();
    let mut basis = DMatrix::zeros(cols, kernel_rows.len());
    for (c, &r) in kernel_rows.iter().enumerate() {
        for j in 0..cols {
            basis[(j, c)] = v_t[(r, j)];
        }
    }
    NullSpace {
        basis,
        sigma_max,
        rank: sv.len() - kernel_rows.len(),
    }
}

/// Singular values of `m` (unordered).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    m.singular_values().iter().cloned().collect()
}

/// Numerical rank: number of singular values above `rel_tol · σ_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of the range of a symmetric positive semidefinite
/// Gram matrix `G = Σ v vᵀ`, keeping eigenvectors with `√λ > rel_tol · √λ_max`.
pub fn gram_range(gram: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i].max(0.0).sqrt() > rel_tol * lmax.sqrt())
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(i));
    }
    basis
}

/// Distance from `v` to the column span of the orthonormal `basis`.
pub fn distance_to_span(basis: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    if basis.ncols() == 0 {
        return v.norm();
    }
    let coeffs = basis.transpose() * &v;
    (v - basis * coeffs).norm()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_row_vector() {
        let m = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.dim(), 1);
        assert_eq!(ns.rank, 1);
        let k = ns.basis.column(0);
        assert!((3.0 * k[0] + 4.0 * k[1]).abs() < 1e-14);
        assert!((k.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_full_kernel() {
        let m = DMatrix::zeros(2, 3);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.dim(), 3);
        assert_eq!(ns.rank, 0);
    }

    #[test]
    fn tall_matrix_kernel() {
        // rows span e1 only; kernel is span{e2}
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.0]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.dim(), 1);
        assert!((ns.basis[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gram_range_recovers_span() {
        let mut g = DMatrix::zeros(3, 3);
        for v in [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]] {
            let v = DVector::from_column_slice(&v);
            g += &v * v.transpose();
        }
        let b = gram_range(&g, 1e-10);
        assert_eq!(b.ncols(), 2);
        assert!(distance_to_span(&b, &[0.3, -2.0, 0.0]) < 1e-12);
        assert!((distance_to_span(&b, &[0.0, 0.0, 1.0]) - 1.0).abs() < 1e-12);
    }
}
