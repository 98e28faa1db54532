//! Multi-dimensional complex FFTs on row-major grids and the integer
//! frequency lattice `[−M/2, M/2)` per axis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Separable d-dimensional FFT built from per-axis plans.
pub struct FftNd {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("dims", &self.dims).finish()
    }
}

impl FftNd {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            dims: dims.to_vec(),
            forward: dims.iter().map(|&m| planner.plan_fft_forward(m)).collect(),
            inverse: dims.iter().map(|&m| planner.plan_fft_inverse(m)).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform in place, normalised so that `inverse ∘ forward = id`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let total = self.len();
        for (axis, plan) in plans.iter().enumerate() {
            let m = self.dims[axis];
            if m == 1 {
                continue;
            }
            let stride: usize = self.dims[axis + 1..].iter().product();
            let mut line = vec![Complex64::default(); m];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let block = stride * m;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, z) in line.iter_mut().enumerate() {
                        *z = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, z) in line.iter().enumerate() {
                        data[base + j * stride] = *z;
                    }
                }
            }
        }
    }
}

/// Signed frequency of DFT index `j` on an axis with `m` points.
pub fn frequency(j: usize, m: usize) -> i64 {
    if 2 * j < m {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// Row-major multi-index of a flat index.
pub fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
    idx
}

/// Flat index of a row-major multi-index.
pub fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &m)| acc * m + i)
}

/// Integer frequency vector of a flat spectral index.
pub fn frequency_vector(flat: usize, dims: &[usize]) -> Vec<i64> {
    unravel(flat, dims)
        .iter()
        .zip(dims)
        .map(|(&j, &m)| frequency(j, m))
        .collect()
}

/// True when some coordinate is the `−M/2` mode of an even axis, whose
/// partner `+M/2` is not on the lattice.
pub fn is_unpaired(flat: usize, dims: &[usize]) -> bool {
    unravel(flat, dims)
        .iter()
        .zip(dims)
        .any(|(&j, &m)| m % 2 == 0 && m > 1 && 2 * j == m)
}

/// Flat index of the frequency `−ξ`.
pub fn negated(flat: usize, dims: &[usize]) -> usize {
    let idx: Vec<usize> = unravel(flat, dims)
        .iter()
        .zip(dims)
        .map(|(&j, &m)| (m - j) % m)
        .collect();
    ravel(&idx, dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_single_mode() {
        let dims = [4, 6];
        let fft = FftNd::new(&dims);
        let n = fft.len();
        let orig: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
        // e^{2πi(j0·1/4 + j1·2/6)} lands on frequency (1, 2)
        let mut wave: Vec<Complex64> = (0..n)
            .map(|f| {
                let ix = unravel(f, &dims);
                let ph =
                    2.0 * std::f64::consts::PI * (ix[0] as f64 / 4.0 + 2.0 * ix[1] as f64 / 6.0);
                Complex64::from_polar(1.0, ph)
            })
            .collect();
        fft.forward(&mut wave);
        let peak = ravel(&[1, 2], &dims);
        assert!((wave[peak].re - n as f64).abs() < 1e-9);
        assert_eq!(frequency_vector(peak, &dims), vec![1, 2]);
    }

    #[test]
    fn lattice_helpers() {
        assert_eq!(frequency(3, 6), -3);
        assert_eq!(frequency(2, 5), 2);
        assert_eq!(frequency(3, 5), -2);
        let dims = [4, 5];
        assert!(is_unpaired(ravel(&[2, 0], &dims), &dims));
        assert!(!is_unpaired(ravel(&[1, 3], &dims), &dims));
        let f = ravel(&[1, 3], &dims);
        let g = negated(f, &dims);
        let (a, b) = (frequency_vector(f, &dims), frequency_vector(g, &dims));
        assert_eq!(
            a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>(),
            vec![0, 0]
        );
    }
}
