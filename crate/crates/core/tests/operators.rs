use aflib::operator::{builtin_operator, MultiIndex, OperatorSpec};
use aflib::sphere::SphereSampling;
use aflib::wave_cone::{
    characteristic_set, default_rank_profile, normalized_residual, projective_distance,
    rank_profile, wavecone_membership, wavecone_span, DEFAULT_RANK_TOL,
};
use aflib::Error;
use nalgebra::{DMatrix, DVector};

const DIV2: &str = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[
    {"alpha":[1,0],"matrix":[[1,0]]},
    {"alpha":[0,1],"matrix":[[0,1]]}]}"#;

const CURLCURL2: &str = r#"{"d":2,"N":3,"n":1,"k":2,"terms":[
    {"alpha":[0,2],"matrix":[[1,0,0]]},
    {"alpha":[1,1],"matrix":[[0,-2,0]]},
    {"alpha":[2,0],"matrix":[[0,0,1]]}]}"#;

/// Symbol of the row-wise curl on `m × 2` matrices, written out by hand:
/// row `i` is `ξ1 P_{i2} − ξ2 P_{i1}`.
fn hand_curl2(m: usize, xi: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        s[(i, 2 * i + 1)] = xi[0];
        s[(i, 2 * i)] = -xi[1];
    }
    s
}

fn hand_residual(s: &DMatrix<f64>, p: &[f64]) -> f64 {
    let pv = DVector::from_column_slice(p);
    (s * &pv).norm() / (s.norm() * pv.norm())
}

fn svd_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&v| v > 1e-10 * top).count()
}

#[test]
fn parses_divergence_text() {
    let op = OperatorSpec::from_json_str(DIV2).unwrap();
    assert_eq!(
        (op.dim(), op.state_dim(), op.eq_dim(), op.order()),
        (2, 2, 1, 1)
    );
    assert_eq!(op, builtin_operator("div", 2, 1, None).unwrap());
}

#[test]
fn mismatched_term_shapes_are_rejected() {
    let bad = r#"{"d":2,"N":2,"n":1,"k":1,"terms":[
        {"alpha":[1,0],"matrix":[[1,0,0]]},
        {"alpha":[0,1],"matrix":[[0,1]]}]}"#;
    assert!(matches!(
        OperatorSpec::from_json_str(bad),
        Err(Error::Shape(_))
    ));
}

#[test]
fn curl_curl_text_matches_builtin() {
    let op = OperatorSpec::from_json_str(CURLCURL2).unwrap();
    assert_eq!(
        (op.dim(), op.state_dim(), op.eq_dim(), op.order()),
        (2, 3, 1, 2)
    );
    assert_eq!(op, builtin_operator("curlcurl", 2, 1, None).unwrap());
}

#[test]
fn builtin_shapes() {
    let div3 = builtin_operator("div", 3, 1, None).unwrap();
    assert_eq!((div3.state_dim(), div3.eq_dim(), div3.order()), (3, 1, 1));

    let curl = builtin_operator("curl", 2, 2, None).unwrap();
    assert_eq!((curl.state_dim(), curl.eq_dim()), (4, 2));
    let terms: Vec<_> = curl.terms().collect();
    let d1 = terms.iter().find(|(a, _)| a.entries() == [1, 0]).unwrap().1;
    let d2 = terms.iter().find(|(a, _)| a.entries() == [0, 1]).unwrap().1;
    let want1 = DMatrix::from_row_slice(2, 4, &[0., 1., 0., 0., 0., 0., 0., 1.]);
    let want2 = DMatrix::from_row_slice(2, 4, &[-1., 0., 0., 0., 0., 0., -1., 0.]);
    assert_eq!(d1, &want1);
    assert_eq!(d2, &want2);
}

#[test]
fn principal_symbols_by_substitution() {
    let div = builtin_operator("div", 2, 1, None).unwrap();
    assert_eq!(
        div.principal_symbol(&[3.0, 4.0]).real_part.as_slice(),
        &[3.0, 4.0]
    );

    let curl = builtin_operator("curl", 2, 1, None).unwrap();
    assert_eq!(
        curl.principal_symbol(&[1.0, 0.0]).real_part.as_slice(),
        &[0.0, 1.0]
    );

    let cc = builtin_operator("curlcurl", 2, 1, None).unwrap();
    let s = cc.principal_symbol(&[1.0, 1.0]);
    assert_eq!(s.phase_power, 2);
    assert_eq!(s.real_part.as_slice(), &[1.0, -2.0, 1.0]);
    for xi in [[0.3, -1.7], [2.0, 0.5], [-1.1, -0.4]] {
        let want = [xi[1] * xi[1], -2.0 * xi[0] * xi[1], xi[0] * xi[0]];
        let got = cc.principal_symbol(&xi).real_part;
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14);
        }
    }
}

#[test]
fn rescaling_weights_lower_order_terms() {
    let a0 = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
    let b = DMatrix::from_row_slice(1, 2, &[3.0, -1.0]);
    let op = OperatorSpec::new(
        2,
        2,
        1,
        2,
        [
            (MultiIndex::new(vec![2, 0]), a0.clone()),
            (MultiIndex::new(vec![0, 2]), a0.clone()),
            (MultiIndex::new(vec![1, 0]), b.clone()),
        ],
    )
    .unwrap();
    let r = op.rescale(0.1).unwrap();
    for (alpha, m) in r.terms() {
        if alpha.order() == 2 {
            assert_eq!(m, &a0);
        } else {
            assert!((m - &b * 0.1).abs().max() < 1e-15);
        }
    }
    assert_eq!(op.rescale(1.0).unwrap(), op);
    let div = builtin_operator("div", 2, 1, None).unwrap();
    assert_eq!(div.rescale(0.37).unwrap(), div);
    assert!(matches!(op.rescale(0.0), Err(Error::NonPositiveScale(_))));
}

#[test]
fn curl_rank_agrees_with_direct_svd() {
    let op = builtin_operator("curl", 2, 2, None).unwrap();
    let prof = rank_profile(&op, &SphereSampling::with_count(2, 256), DEFAULT_RANK_TOL).unwrap();
    assert!(prof.is_constant);
    assert_eq!((prof.min_rank, prof.max_rank), (2, 2));
    let dirs = [
        [1.0, 0.0],
        [0.0, 1.0],
        [1.0, 1.0],
        [1.0, -1.0],
        [0.3, 0.9],
        [-2.0, 0.1],
        [0.7, -0.2],
        [5.0, 3.0],
    ];
    for xi in dirs {
        assert_eq!(svd_rank(&hand_curl2(2, &xi)), 2);
        assert_eq!(op.principal_symbol(&xi).real_part, hand_curl2(2, &xi));
    }
}

#[test]
fn builtins_have_constant_rank() {
    for (name, d, m) in [
        ("div", 2, 1),
        ("div", 3, 2),
        ("curl", 2, 1),
        ("curl", 3, 1),
        ("curlcurl", 2, 1),
        ("curlcurl", 3, 1),
    ] {
        let op = builtin_operator(name, d, m, None).unwrap();
        assert!(
            default_rank_profile(&op).unwrap().is_constant,
            "{name} d={d} m={m}"
        );
    }
}

#[test]
fn diagonal_symbol_drops_rank_on_axes() {
    let e = |i: usize| {
        let mut m = DMatrix::zeros(2, 2);
        m[(i, i)] = 1.0;
        m
    };
    let op = OperatorSpec::new(
        2,
        2,
        2,
        1,
        [
            (MultiIndex::unit(2, 0), e(0)),
            (MultiIndex::unit(2, 1), e(1)),
        ],
    )
    .unwrap();
    let prof = default_rank_profile(&op).unwrap();
    assert_eq!((prof.min_rank, prof.max_rank), (1, 2));
    assert!(!prof.is_constant);
    assert!(prof.min_witness[0].abs() < 1e-12 || prof.min_witness[1].abs() < 1e-12);
}

#[test]
fn rank_one_matrix_is_in_curl_cone() {
    let op = builtin_operator("curl", 2, 2, None).unwrap();
    let p = [1.0, 0.0, 0.0, 0.0];
    let rep = wavecone_membership(&op, &p, &SphereSampling::default_for(2)).unwrap();
    assert!(rep.member);
    assert!(rep.residual <= 1e-8);
    assert!(projective_distance(&rep.witness_xi, &[1.0, 0.0]) < 1e-6);
    assert!(hand_residual(&hand_curl2(2, &[1.0, 0.0]), &p) == 0.0);
}

#[test]
fn identity_is_not_in_curl_cone() {
    let op = builtin_operator("curl", 2, 2, None).unwrap();
    let p = [1.0, 0.0, 0.0, 1.0];
    let brute = (0..10_000)
        .map(|j| {
            let t = std::f64::consts::PI * j as f64 / 10_000.0;
            hand_residual(&hand_curl2(2, &[t.cos(), t.sin()]), &p)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(brute >= 0.1);
    let rep = wavecone_membership(&op, &p, &SphereSampling::default_for(2)).unwrap();
    assert!(!rep.member);
    assert!((rep.residual - brute).abs() < 1e-9);
}

#[test]
fn divergence_cone_contains_every_direction() {
    let op = builtin_operator("div", 2, 1, None).unwrap();
    for p in [[1.0, 0.0], [0.3, -2.0], [-1.0, 1.0]] {
        let rep = wavecone_membership(&op, &p, &SphereSampling::default_for(2)).unwrap();
        assert!(rep.member);
        let dot = rep.witness_xi[0] * p[0] + rep.witness_xi[1] * p[1];
        assert!(dot.abs() < 1e-6 * (p[0].hypot(p[1])));
    }
}

#[test]
fn wave_cone_spans() {
    let s = SphereSampling::default_for(2);
    assert_eq!(
        wavecone_span(&builtin_operator("div", 2, 1, None).unwrap(), &s).dim(),
        2
    );
    assert_eq!(
        wavecone_span(&builtin_operator("curl", 2, 2, None).unwrap(), &s).dim(),
        4
    );

    let a0 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let lap = builtin_operator("laplace_coeff", 2, 1, Some(&a0)).unwrap();
    let span = wavecone_span(&lap, &s);
    assert_eq!(span.dim(), 1);
    assert!(span.distance(&[0.0, 1.0]) < 1e-10);
    for xi in [[1.0, 0.0], [0.6, 0.8], [-0.2, 1.3]] {
        let m = lap.principal_symbol(&xi).real_part;
        assert_eq!(svd_rank(&m), 1);
        assert_eq!((&m * DVector::from_column_slice(&[0.0, 1.0])).norm(), 0.0);
    }
}

fn single_root_along_e1(op: &OperatorSpec, p0: &[f64]) {
    let rep = characteristic_set(op, p0, &SphereSampling::default_for(op.dim())).unwrap();
    assert_eq!(rep.subspace_dim, 1);
    assert!(!rep.roots.is_empty());
    for r in &rep.roots {
        assert!(projective_distance(r, &[1.0, 0.0]) < 1e-6, "root {r:?}");
    }
    assert!(normalized_residual(op, p0, &[1.0, 0.0]) == 0.0);
}

#[test]
fn characteristic_sets_are_the_first_axis() {
    single_root_along_e1(&builtin_operator("div", 2, 1, None).unwrap(), &[0.0, 1.0]);
    single_root_along_e1(
        &builtin_operator("curl", 2, 2, None).unwrap(),
        &[1.0, 0.0, 0.0, 0.0],
    );
    single_root_along_e1(
        &builtin_operator("curlcurl", 2, 1, None).unwrap(),
        &[1.0, 0.0, 0.0],
    );
}

#[test]
fn characteristic_set_needs_a_cone_member() {
    let op = builtin_operator("curl", 2, 2, None).unwrap();
    let r = characteristic_set(&op, &[1.0, 0.0, 0.0, 1.0], &SphereSampling::default_for(2));
    assert!(matches!(r, Err(Error::NotInWaveCone { .. })));
}
