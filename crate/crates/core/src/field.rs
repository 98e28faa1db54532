//! Real vector fields on uniform grids of the unit torus `Q = (−1/2, 1/2)^d`.
//!
//! Nodes are cell centres `x_j = −1/2 + (j + 1/2)/M` in row-major order and
//! values are stored node-major: component `c` of node `i` is `values[i*N + c]`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{self, FftNd};

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    dims: Vec<usize>,
    ncomp: usize,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(dims: Vec<usize>, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || ncomp == 0 {
            return Err(Error::Shape(format!(
                "invalid grid {dims:?} with {ncomp} components"
            )));
        }
        let nodes: usize = dims.iter().product();
        if values.len() != nodes * ncomp {
            return Err(Error::Shape(format!(
                "expected {} values for grid {:?} × {}, got {}",
                nodes * ncomp,
                dims,
                ncomp,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "field contains non-finite values".into(),
            ));
        }
        Ok(PeriodicField {
            dims,
            ncomp,
            values,
        })
    }

    pub fn zeros(dims: &[usize], ncomp: usize) -> Self {
        let nodes: usize = dims.iter().product();
        PeriodicField {
            dims: dims.to_vec(),
            ncomp,
            values: vec![0.0; nodes * ncomp],
        }
    }

    /// Samples `f(x, out)` at every node.
    pub fn from_fn<F: FnMut(&[f64], &mut [f64])>(dims: &[usize], ncomp: usize, mut f: F) -> Self {
        let mut field = Self::zeros(dims, ncomp);
        let mut x = vec![0.0; dims.len()];
        for i in 0..field.node_count() {
            field.coords_into(i, &mut x);
            let n = ncomp;
            f(&x, &mut field.values[i * n..(i + 1) * n]);
        }
        field
    }

    /// Constant field equal to `c` at every node.
    pub fn constant(dims: &[usize], c: &[f64]) -> Self {
        Self::from_fn(dims, c.len(), |_, out| out.copy_from_slice(c))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.dims.iter().map(|&m| 1.0 / m as f64).product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncomp..(i + 1) * self.ncomp]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.ncomp;
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dims.len()];
        self.coords_into(i, &mut x);
        x
    }

    fn coords_into(&self, i: usize, x: &mut [f64]) {
        let idx = fft::unravel(i, &self.dims);
        for ((xa, &j), &m) in x.iter_mut().zip(&idx).zip(&self.dims) {
            *xa = -0.5 + (j as f64 + 0.5) / m as f64;
        }
    }

    pub fn same_grid(&self, other: &PeriodicField) -> bool {
        self.dims == other.dims && self.ncomp == other.ncomp
    }

    pub fn check_grid(&self, other: &PeriodicField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}×{} vs {:?}×{}",
                self.dims, self.ncomp, other.dims, other.ncomp
            )))
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ncomp];
        for chunk in self.values.chunks(self.ncomp) {
            for (a, v) in m.iter_mut().zip(chunk) {
                *a += v;
            }
        }
        let n = self.node_count() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        for chunk in self.values.chunks_mut(self.ncomp) {
            for (v, a) in chunk.iter_mut().zip(&m) {
                *v -= a;
            }
        }
    }

    /// `(∫ |u|² dx)^{1/2}` with the midpoint rule.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }

    /// `∫ |u| dx` with the Euclidean norm pointwise.
    pub fn l1_norm(&self) -> f64 {
        self.values
            .chunks(self.ncomp)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            * self.cell_volume()
    }

    /// `(∫ |u|^q dx)^{1/q}`.
    pub fn lq_norm(&self, q: f64) -> f64 {
        let s: f64 = self
            .values
            .chunks(self.ncomp)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().powf(q))
            .sum();
        (s * self.cell_volume()).powf(1.0 / q)
    }

    /// Largest pointwise Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.ncomp)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `∫ u · v dx`.
    pub fn inner(&self, other: &PeriodicField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.cell_volume()
    }

    pub fn axpy(&mut self, a: f64, x: &PeriodicField) {
        for (v, w) in self.values.iter_mut().zip(&x.values) {
            *v += a * w;
        }
    }

    pub fn scaled(&self, a: f64) -> PeriodicField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn sub(&self, other: &PeriodicField) -> PeriodicField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Per-component forward transforms, each of length `node_count`.
    pub fn spectrum(&self, fft: &FftNd) -> Vec<Vec<Complex64>> {
        (0..self.ncomp)
            .map(|c| {
                let mut buf: Vec<Complex64> = self
                    .values
                    .iter()
                    .skip(c)
                    .step_by(self.ncomp)
                    .map(|&v| Complex64::new(v, 0.0))
                    .collect();
                fft.forward(&mut buf);
                buf
            })
            .collect()
    }

    /// Inverse of [`spectrum`](Self::spectrum); returns the field and the
    /// largest discarded imaginary part.
    pub fn from_spectrum(
        dims: &[usize],
        mut spec: Vec<Vec<Complex64>>,
        fft: &FftNd,
    ) -> (Self, f64) {
        let ncomp = spec.len();
        let mut out = Self::zeros(dims, ncomp);
        let mut imag = 0.0f64;
        for (c, buf) in spec.iter_mut().enumerate() {
            fft.inverse(buf);
            for (i, z) in buf.iter().enumerate() {
                out.values[i * ncomp + c] = z.re;
                imag = imag.max(z.im.abs());
            }
        }
        (out, imag)
    }

    /// Little-endian binary: `u64 d`, `u64 N`, `d × u64` grid sizes, then
    /// node-major `f64` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        w.write_all(&(self.ncomp as u64).to_le_bytes())?;
        for &m in &self.dims {
            w.write_all(&(m as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)
                .map_err(|e| Error::Parse(format!("truncated field header: {e}")))?;
            Ok(u64::from_le_bytes(word))
        };
        let d = next(&mut r)? as usize;
        let n = next(&mut r)? as usize;
        if d == 0 || d > 8 || n == 0 || n > 1 << 16 {
            return Err(Error::Parse(format!(
                "implausible field header d={d}, N={n}"
            )));
        }
        let mut dims = Vec::with_capacity(d);
        for _ in 0..d {
            dims.push(next(&mut r)? as usize);
        }
        let count = dims
            .iter()
            .try_fold(n, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| Error::Parse("field too large".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != count * 8 {
            return Err(Error::Parse(format!(
                "expected {} value bytes, found {}",
                count * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(dims, n, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(file))
    }

    /// CSV import for `d = 2`: a header line, then rows `i,j,u0,…,u{N−1}`
    /// covering every node exactly once.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() < 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected i,j,u0,...",
                    ln + 1
                )));
            }
            let i: usize = cells[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad index", ln + 1)))?;
            let j: usize = cells[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad index", ln + 1)))?;
            let vals = cells[2..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(format!("line {}: bad value", ln + 1)))?;
            rows.push((i, j, vals));
        }
        let first = rows
            .first()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let ncomp = first.2.len();
        let m0 = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
        let m1 = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
        if rows.len() != m0 * m1 {
            return Err(Error::Shape(format!(
                "CSV has {} rows for a {m0}×{m1} grid",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; m0 * m1 * ncomp];
        for (i, j, vals) in rows {
            if vals.len() != ncomp {
                return Err(Error::Shape("ragged CSV rows".into()));
            }
            let base = (i * m1 + j) * ncomp;
            if !values[base].is_nan() {
                return Err(Error::Parse(format!("duplicate node ({i},{j})")));
            }
            values[base..base + ncomp].copy_from_slice(&vals);
        }
        Self::new(vec![m0, m1], ncomp, values)
    }
}
