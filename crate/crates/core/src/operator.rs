//! Constant-coefficient linear PDE operators `A = Σ_{|α| ≤ k} A_α ∂^α`.
//!
//! An operator maps `N`-vector fields on `R^d` to `n`-vector fields. Its
//! principal symbol is `(2πi)^k Σ_{|α|=k} ξ^α A_α`; the scalar prefactor never
//! changes kernels or ranks, so [`SymbolMatrix`] keeps it symbolic and stores
//! only the real matrix `M(ξ) = Σ_{|α|=k} ξ^α A_α`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multi-index `α = (α_1, …, α_d)`; ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    /// `e_i` in dimension `d`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        MultiIndex(e)
    }

    /// `e_a + e_b` in dimension `d`.
    pub fn pair(d: usize, a: usize, b: usize) -> Self {
        let mut e = vec![0; d];
        e[a] += 1;
        e[b] += 1;
        MultiIndex(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `ξ^α = Π ξ_i^{α_i}`.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(xi)
            .map(|(&a, &x)| x.powi(a as i32))
            .product()
    }

    /// `(2πi ξ)^α` for an integer or real frequency.
    pub fn fourier_factor(&self, xi: &[f64]) -> Complex64 {
        let h = self.order() as i32;
        let scale = (2.0 * PI).powi(h) * self.monomial(xi);
        Complex64::i().powi(h) * scale
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A validated operator in canonical form (no zero terms, true order `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    dim: usize,
    state_dim: usize,
    eq_dim: usize,
    order: u32,
    terms: BTreeMap<MultiIndex, DMatrix<f64>>,
}

/// The real part `M(ξ)` of the principal symbol; the suppressed factor is
/// `(2πi)^phase_power`.
#[derive(Debug, Clone)]
pub struct SymbolMatrix {
    pub xi: Vec<f64>,
    pub real_part: DMatrix<f64>,
    pub phase_power: u32,
}

#[derive(Serialize, Deserialize)]
struct OperatorFile {
    d: usize,
    #[serde(rename = "N")]
    state_dim: usize,
    n: usize,
    k: u32,
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    alpha: Vec<i64>,
    matrix: Vec<Vec<f64>>,
}

impl OperatorSpec {
    /// Validates and canonicalises a term map.
    pub fn new(
        dim: usize,
        state_dim: usize,
        eq_dim: usize,
        order: u32,
        terms: impl IntoIterator<Item = (MultiIndex, DMatrix<f64>)>,
    ) -> Result<Self> {
        if dim == 0 || state_dim == 0 || eq_dim == 0 {
            return Err(Error::Shape("d, N and n must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for (alpha, m) in terms {
            if alpha.entries().len() != dim {
                return Err(Error::Shape(format!(
                    "multi-index {alpha} has length {}, expected {dim}",
                    alpha.entries().len()
                )));
            }
            if m.nrows() != eq_dim || m.ncols() != state_dim {
                return Err(Error::Shape(format!(
                    "term {alpha} has shape {}x{}, expected {eq_dim}x{state_dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("term {alpha} has non-finite entries")));
            }
            if alpha.order() > order {
                return Err(Error::Order(format!(
                    "term {alpha} has order {} above k = {order}",
                    alpha.order()
                )));
            }
            if m.iter().all(|&v| v == 0.0) {
                continue;
            }
            if map.insert(alpha.clone(), m).is_some() {
                return Err(Error::Parse(format!("duplicate multi-index {alpha}")));
            }
        }
        if !map.keys().any(|a| a.order() == order) {
            return Err(Error::Order(format!(
                "no nonzero term of top order {order}"
            )));
        }
        Ok(OperatorSpec {
            dim,
            state_dim,
            eq_dim,
            order,
            terms: map,
        })
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State dimension `N`.
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Equation dimension `n`.
    pub fn eq_dim(&self) -> usize {
        self.eq_dim
    }

    /// Order `k`.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<f64>)> {
        self.terms.iter()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.terms.keys().all(|a| a.order() == self.order)
    }

    /// The top-order part `A^k`.
    pub fn principal_part(&self) -> OperatorSpec {
        OperatorSpec {
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| a.order() == self.order)
                .map(|(a, m)| (a.clone(), m.clone()))
                .collect(),
            ..self.clone()
        }
    }

    /// `Σ_{|α|=h} ξ^α A_α`.
    pub fn symbol_of_order(&self, h: u32, xi: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.eq_dim, self.state_dim);
        for (alpha, a) in self.terms.iter().filter(|(a, _)| a.order() == h) {
            m += a * alpha.monomial(xi);
        }
        m
    }

    pub fn principal_symbol(&self, xi: &[f64]) -> SymbolMatrix {
        assert_eq!(xi.len(), self.dim, "frequency has wrong dimension");
        SymbolMatrix {
            xi: xi.to_vec(),
            real_part: self.symbol_of_order(self.order, xi),
            phase_power: self.order,
        }
    }

    /// Full complex symbol `Σ_α (2πiξ)^α A_α`, the Fourier representation of `A`.
    pub fn full_symbol(&self, xi: &[f64]) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.eq_dim, self.state_dim, Complex64::new(0.0, 0.0));
        for (alpha, a) in &self.terms {
            let c = alpha.fourier_factor(xi);
            m += a.map(|v| c * v);
        }
        m
    }

    /// `T^r_* A = Σ_h r^{k−h} A^h`: each term of order `h` scaled by `r^{k−h}`.
    pub fn rescale(&self, r: f64) -> Result<OperatorSpec> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NonPositiveScale(r));
        }
        let k = self.order;
        let terms = self
            .terms
            .iter()
            .map(|(a, m)| (a.clone(), m * r.powi((k - a.order()) as i32)));
        OperatorSpec::new(self.dim, self.state_dim, self.eq_dim, k, terms)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: OperatorFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut terms = Vec::with_capacity(file.terms.len());
        for t in file.terms {
            if let Some(bad) = t.alpha.iter().find(|&&a| a < 0) {
                return Err(Error::Parse(format!("negative multi-index entry {bad}")));
            }
            let alpha = MultiIndex::new(t.alpha.iter().map(|&a| a as u32).collect());
            let rows = t.matrix.len();
            let cols = t.matrix.first().map_or(0, |r| r.len());
            if t.matrix.iter().any(|r| r.len() != cols) {
                return Err(Error::Shape(format!("ragged matrix for term {alpha}")));
            }
            let flat: Vec<f64> = t.matrix.into_iter().flatten().collect();
            terms.push((alpha, DMatrix::from_row_slice(rows, cols, &flat)));
        }
        OperatorSpec::new(file.d, file.state_dim, file.n, file.k, terms)
    }

    /// Canonical JSON: multi-indices sorted, zero terms absent.
    pub fn to_json_string(&self) -> String {
        let file = OperatorFile {
            d: self.dim,
            state_dim: self.state_dim,
            n: self.eq_dim,
            k: self.order,
            terms: self
                .terms
                .iter()
                .map(|(a, m)| TermFile {
                    alpha: a.entries().iter().map(|&v| v as i64).collect(),
                    matrix: (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("operator serialises")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::from_str(&self.to_json_string()).expect("round trip")
    }
}

/// Standard operators by name: `div`, `curl`, `curlcurl`, `laplace_coeff`.
///
/// Matrix-valued fields use the row-major encoding `u_{ij} ↦ i·d + j` for an
/// `m × d` field. `curlcurl` acts on symmetric `d × d` fields encoded by their
/// upper triangle `(μ_11, μ_12, …, μ_1d, μ_22, …)`. `laplace_coeff` needs the
/// coefficient matrix `a0` and builds `a0 · Δ`.
pub fn builtin_operator(
    name: &str,
    d: usize,
    m: usize,
    a0: Option<&DMatrix<f64>>,
) -> Result<OperatorSpec> {
    if d == 0 {
        return Err(Error::Shape("dimension must be positive".into()));
    }
    match name {
        "div" => {
            let terms = (0..d).map(|j| {
                let mut a = DMatrix::zeros(m, m * d);
                for i in 0..m {
                    a[(i, i * d + j)] = 1.0;
                }
                (MultiIndex::unit(d, j), a)
            });
            OperatorSpec::new(d, m * d, m, 1, terms)
        }
        "curl" => {
            if d < 2 {
                return Err(Error::Shape("curl needs d >= 2".into()));
            }
            let pairs: Vec<(usize, usize)> = (0..d)
                .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
                .collect();
            let n = m * pairs.len();
            let mut mats = vec![DMatrix::zeros(n, m * d); d];
            for i in 0..m {
                for (p, &(a, b)) in pairs.iter().enumerate() {
                    let row = i * pairs.len() + p;
                    // ∂_a u_{ib} − ∂_b u_{ia}
                    mats[a][(row, i * d + b)] += 1.0;
                    mats[b][(row, i * d + a)] -= 1.0;
                }
            }
            let terms = mats
                .into_iter()
                .enumerate()
                .map(|(j, a)| (MultiIndex::unit(d, j), a));
            OperatorSpec::new(d, m * d, n, 1, terms)
        }
        "curlcurl" => curl_curl(d),
        "laplace_coeff" => {
            let a0 = a0.ok_or_else(|| {
                Error::InvalidArgument("laplace_coeff needs a coefficient matrix".into())
            })?;
            let terms = (0..d).map(|i| (MultiIndex::pair(d, i, i), a0.clone()));
            OperatorSpec::new(d, a0.ncols(), a0.nrows(), 2, terms)
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// Index of `μ_{ab}` in the upper-triangle encoding.
fn sym_index(d: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * d - a * (a + 1) / 2 + b
}

fn curl_curl(d: usize) -> Result<OperatorSpec> {
    let n_state = d * (d + 1) / 2;
    if d == 1 {
        return Err(Error::Shape("curlcurl needs d >= 2".into()));
    }
    if d == 2 {
        // ∂22 μ11 − 2 ∂12 μ12 + ∂11 μ22
        let row = |v: [f64; 3]| DMatrix::from_row_slice(1, 3, &v);
        return OperatorSpec::new(
            2,
            3,
            1,
            2,
            [
                (MultiIndex::pair(2, 1, 1), row([1.0, 0.0, 0.0])),
                (MultiIndex::pair(2, 0, 1), row([0.0, -2.0, 0.0])),
                (MultiIndex::pair(2, 0, 0), row([0.0, 0.0, 1.0])),
            ],
        );
    }
    // Saint-Venant: Σ_i ∂_ik μ_ij + ∂_ij μ_ik − ∂_jk μ_ii − ∂_ii μ_jk, one row per j ≤ k.
    let eqs: Vec<(usize, usize)> = (0..d).flat_map(|j| (j..d).map(move |k| (j, k))).collect();
    let mut terms: BTreeMap<MultiIndex, DMatrix<f64>> = BTreeMap::new();
    let mut add = |alpha: MultiIndex, row: usize, col: usize, v: f64| {
        terms
            .entry(alpha)
            .or_insert_with(|| DMatrix::zeros(eqs.len(), n_state))[(row, col)] += v;
    };
    for (row, &(j, k)) in eqs.iter().enumerate() {
        for i in 0..d {
            add(MultiIndex::pair(d, i, k), row, sym_index(d, i, j), 1.0);
            add(MultiIndex::pair(d, i, j), row, sym_index(d, i, k), 1.0);
            add(MultiIndex::pair(d, j, k), row, sym_index(d, i, i), -1.0);
            add(MultiIndex::pair(d, i, i), row, sym_index(d, j, k), -1.0);
        }
    }
    OperatorSpec::new(d, n_state, eqs.len(), 2, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIV2: &str = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[
        {"alpha":[1,0],"matrix":[[1,0]]},{"alpha":[0,1],"matrix":[[0,1]]}]}"#;

    #[test]
    fn parses_divergence() {
        let op = OperatorSpec::from_json_str(DIV2).unwrap();
        assert_eq!(
            (op.dim(), op.state_dim(), op.eq_dim(), op.order()),
            (2, 2, 1, 1)
        );
        assert_eq!(op, builtin_operator("div", 2, 1, None).unwrap());
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let text = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[
            {"alpha":[1,0],"matrix":[[1,0,0]]},{"alpha":[0,1],"matrix":[[0,1]]}]}"#;
        assert!(matches!(
            OperatorSpec::from_json_str(text),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rejects_negative_entries_and_missing_top_order() {
        let neg = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[{"alpha":[-1,2],"matrix":[[1,0]]}]}"#;
        assert!(matches!(
            OperatorSpec::from_json_str(neg),
            Err(Error::Parse(_))
        ));
        let low = r#"{"d":2,"N":2,"n":1,"k":2,"terms":[{"alpha":[1,0],"matrix":[[1,0]]}]}"#;
        assert!(matches!(
            OperatorSpec::from_json_str(low),
            Err(Error::Order(_))
        ));
        let zero_top = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[{"alpha":[1,0],"matrix":[[0,0]]}]}"#;
        assert!(matches!(
            OperatorSpec::from_json_str(zero_top),
            Err(Error::Order(_))
        ));
        assert!(matches!(
            OperatorSpec::from_json_str("{"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn zero_terms_are_dropped() {
        let text = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[
            {"alpha":[1,0],"matrix":[[1,0]]},{"alpha":[0,1],"matrix":[[0,1]]},
            {"alpha":[0,0],"matrix":[[0,0]]}]}"#;
        let op = OperatorSpec::from_json_str(text).unwrap();
        assert_eq!(op.terms().count(), 2);
        assert!(op.is_homogeneous());
    }

    #[test]
    fn curlcurl_parse_matches_builtin() {
        let text = r#"{"d":2,"N":3,"n":1,"k":2,"terms":[
            {"alpha":[0,2],"matrix":[[1,0,0]]},
            {"alpha":[1,1],"matrix":[[0,-2,0]]},
            {"alpha":[2,0],"matrix":[[0,0,1]]}]}"#;
        let op = OperatorSpec::from_json_str(text).unwrap();
        assert_eq!(
            (op.dim(), op.state_dim(), op.eq_dim(), op.order()),
            (2, 3, 1, 2)
        );
        assert_eq!(op, builtin_operator("curlcurl", 2, 1, None).unwrap());
    }

    #[test]
    fn curlcurl_d2_agrees_with_saint_venant_rows() {
        // The general formula in d = 2 yields the rows (1,1) and (2,2) equal to
        // minus the reduced equation and a vanishing (1,2) row.
        let eqs = [(0usize, 0usize), (0, 1), (1, 1)];
        for xi in [[1.0, 1.0], [0.3, -2.0], [1.5, 0.25]] {
            let reduced = builtin_operator("curlcurl", 2, 1, None)
                .unwrap()
                .principal_symbol(&xi)
                .real_part;
            for (r, &(j, k)) in eqs.iter().enumerate() {
                let mut row = [0.0; 3];
                for i in 0..2 {
                    row[sym_index(2, i, j)] += xi[i] * xi[k];
                    row[sym_index(2, i, k)] += xi[i] * xi[j];
                    row[sym_index(2, i, i)] -= xi[j] * xi[k];
                    row[sym_index(2, j, k)] -= xi[i] * xi[i];
                }
                let sign = if r == 1 { 0.0 } else { -1.0 };
                for c in 0..3 {
                    assert!((row[c] - sign * reduced[(0, c)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn builtin_curl_d2_m2() {
        let op = builtin_operator("curl", 2, 2, None).unwrap();
        assert_eq!((op.state_dim(), op.eq_dim()), (4, 2));
        let e1 = op.symbol_of_order(1, &[1.0, 0.0]);
        let e2 = op.symbol_of_order(1, &[0.0, 1.0]);
        // (1,0) picks ∂1 u_{i2}; (0,1) picks −∂2 u_{i1}
        assert_eq!(
            e1,
            DMatrix::from_row_slice(2, 4, &[0., 1., 0., 0., 0., 0., 0., 1.])
        );
        assert_eq!(
            e2,
            DMatrix::from_row_slice(2, 4, &[-1., 0., 0., 0., 0., 0., -1., 0.])
        );
    }

    #[test]
    fn builtin_div_d3() {
        let op = builtin_operator("div", 3, 1, None).unwrap();
        assert_eq!((op.state_dim(), op.eq_dim(), op.order()), (3, 1, 1));
        assert!(matches!(
            builtin_operator("grad", 2, 1, None),
            Err(Error::UnknownName(_))
        ));
    }

    #[test]
    fn principal_symbols() {
        let div = builtin_operator("div", 2, 1, None).unwrap();
        let s = div.principal_symbol(&[3.0, 4.0]);
        assert_eq!(s.real_part, DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
        assert_eq!(s.phase_power, 1);

        let curl = builtin_operator("curl", 2, 1, None).unwrap();
        let s = curl.principal_symbol(&[1.0, 0.0]);
        assert_eq!(s.real_part, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));

        let cc = builtin_operator("curlcurl", 2, 1, None).unwrap();
        let s = cc.principal_symbol(&[1.0, 1.0]);
        assert_eq!(
            s.real_part,
            DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 1.0])
        );

        assert_eq!(
            div.principal_symbol(&[0.0, 0.0]).real_part,
            DMatrix::zeros(1, 2)
        );
    }

    #[test]
    fn curlcurl_d3_kernel_is_symmetrised_rank_one() {
        let op = builtin_operator("curlcurl", 3, 1, None).unwrap();
        assert_eq!((op.state_dim(), op.eq_dim()), (6, 6));
        let xi = [0.3, -0.5, 0.8];
        let a = [1.0, 2.0, -0.5];
        // μ = a ⊙ ξ
        let mut mu = vec![0.0; 6];
        for i in 0..3 {
            for j in i..3 {
                mu[sym_index(3, i, j)] = 0.5 * (a[i] * xi[j] + a[j] * xi[i]);
            }
        }
        let m = op.principal_symbol(&xi).real_part;
        let r = &m * nalgebra::DVector::from_vec(mu);
        assert!(r.norm() < 1e-12);
        assert_eq!(crate::linalg::rank(&m, 1e-8), 3);
    }

    #[test]
    fn rescale_scales_lower_order_terms() {
        let a0 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let lap = builtin_operator("laplace_coeff", 2, 1, Some(&a0)).unwrap();
        let mut terms: Vec<_> = lap.terms().map(|(a, m)| (a.clone(), m.clone())).collect();
        terms.push((
            MultiIndex::unit(2, 0),
            DMatrix::from_row_slice(1, 2, &[0.0, 3.0]),
        ));
        let op = OperatorSpec::new(2, 2, 1, 2, terms).unwrap();
        let r = op.rescale(0.1).unwrap();
        for (a, m) in r.terms() {
            let orig = op.terms.get(a).unwrap();
            let expected = if a.order() == 2 {
                orig.clone()
            } else {
                orig * 0.1
            };
            assert_eq!(*m, expected);
        }
        assert_eq!(op.rescale(1.0).unwrap(), op);
        assert_eq!(lap.rescale(0.37).unwrap(), lap);
        assert!(matches!(op.rescale(0.0), Err(Error::NonPositiveScale(_))));
        assert!(matches!(op.rescale(-2.0), Err(Error::NonPositiveScale(_))));
    }

    #[test]
    fn full_symbol_of_divergence() {
        let div = builtin_operator("div", 2, 1, None).unwrap();
        let s = div.full_symbol(&[1.0, 0.0]);
        assert!((s[(0, 0)] - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-14);
        assert_eq!(s[(0, 1)], Complex64::new(0.0, 0.0));
    }
}
