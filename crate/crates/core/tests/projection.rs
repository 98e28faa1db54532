use std::f64::consts::PI;

use aflib::field::PeriodicField;
use aflib::operator::{builtin_operator, MultiIndex, OperatorSpec};
use aflib::projection::{
    afree_residual, apply_operator, build_projector_table, periodic_afree_correction,
    project_afree, sobolev_negative_norm,
};
use nalgebra::DMatrix;

const FREQS: [[i64; 2]; 16] = [
    [1, 0],
    [0, 1],
    [1, 1],
    [-1, 1],
    [2, 1],
    [1, -3],
    [-4, 2],
    [5, 5],
    [3, 0],
    [0, -7],
    [6, -1],
    [-2, -5],
    [7, 3],
    [-8, 1],
    [4, -4],
    [2, 9],
];

fn outer(xi: &[i64; 2]) -> DMatrix<f64> {
    let v = [xi[0] as f64, xi[1] as f64];
    let r2 = v[0] * v[0] + v[1] * v[1];
    DMatrix::from_fn(2, 2, |i, j| v[i] * v[j] / r2)
}

#[test]
fn divergence_projector_is_leray() {
    let op = builtin_operator("div", 2, 1, None).unwrap();
    let table = build_projector_table(&op, &[32, 32]).unwrap();
    for xi in FREQS {
        let want = DMatrix::identity(2, 2) - outer(&xi);
        assert!((table.matrix_at(&xi) - want).abs().max() <= 1e-12, "{xi:?}");
    }
    assert_eq!(table.matrix_at(&[0, 0]), DMatrix::zeros(2, 2));
}

#[test]
fn gradient_projector_is_radial() {
    let op = builtin_operator("curl", 2, 1, None).unwrap();
    let table = build_projector_table(&op, &[32, 32]).unwrap();
    for xi in FREQS {
        assert!(
            (table.matrix_at(&xi) - outer(&xi)).abs().max() <= 1e-12,
            "{xi:?}"
        );
    }
    assert_eq!(table.matrix_at(&[0, 0]), DMatrix::zeros(2, 2));
}

/// `∇(sin 2πx1 · sin 2πx2)`.
fn gradient_field(dims: &[usize]) -> PeriodicField {
    PeriodicField::from_fn(dims, 2, |x, out| {
        let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        out[0] = 2.0 * PI * a.cos() * b.sin();
        out[1] = 2.0 * PI * a.sin() * b.cos();
    })
}

/// `(∂2ψ, −∂1ψ)` for `ψ = sin(2πx1) cos(4πx2) + cos(6πx2)`.
fn solenoidal_field(dims: &[usize]) -> PeriodicField {
    PeriodicField::from_fn(dims, 2, |x, out| {
        let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        out[0] = -4.0 * PI * a.sin() * (2.0 * b).sin() - 6.0 * PI * (3.0 * b).sin();
        out[1] = -2.0 * PI * a.cos() * (2.0 * b).cos();
    })
}

#[test]
fn leray_projection_kills_gradients_and_keeps_solenoidal_fields() {
    let op = builtin_operator("div", 2, 1, None).unwrap();
    let dims = [32, 32];
    let table = build_projector_table(&op, &dims).unwrap();
    let g = gradient_field(&dims);
    assert!(project_afree(&table, &g).unwrap().sup_norm() <= 1e-10);
    let s = solenoidal_field(&dims);
    assert!(project_afree(&table, &s).unwrap().sub(&s).sup_norm() <= 1e-10);
    let c = PeriodicField::constant(&dims, &[1.5, -0.25]);
    assert!(project_afree(&table, &c).unwrap().sup_norm() <= 1e-14);
}

#[test]
fn residual_of_a_single_mode() {
    let op = builtin_operator("div", 2, 1, None).unwrap();
    let u = PeriodicField::from_fn(&[64, 64], 2, |x, out| {
        out[0] = (2.0 * PI * x[0]).cos();
        out[1] = 0.0;
    });
    assert!((afree_residual(&op, &u).unwrap() - 2.0 * PI).abs() < 1e-10);
    let c = PeriodicField::constant(&[16, 16], &[3.0, 1.0]);
    assert_eq!(afree_residual(&op, &c).unwrap(), 0.0);
    let table = build_projector_table(&op, &[64, 64]).unwrap();
    let pu = project_afree(&table, &solenoidal_field(&[64, 64])).unwrap();
    assert!(afree_residual(&op, &pu).unwrap() <= 1e-8);
}

#[test]
fn negative_norm_of_cosine_modes() {
    let p = [0.6, -0.8, 2.0];
    let pn = (p.iter().map(|v| v * v).sum::<f64>()).sqrt();
    for m in 1..=4 {
        let u = PeriodicField::from_fn(&[32, 32], 3, |x, out| {
            let c = (2.0 * PI * m as f64 * x[0]).cos();
            for (o, v) in out.iter_mut().zip(p) {
                *o = c * v;
            }
        });
        let want = pn / (m as f64 * 2f64.sqrt());
        assert!(
            (sobolev_negative_norm(&u, 1, 2.0).unwrap() - want).abs() < 1e-12,
            "m = {m}"
        );
    }
    let zero = PeriodicField::zeros(&[8, 8], 3);
    assert_eq!(sobolev_negative_norm(&zero, 1, 2.0).unwrap(), 0.0);
}

/// Solenoidal field from a stream function supported in the disc of radius 0.3.
fn compact_solenoidal(dims: &[usize]) -> PeriodicField {
    PeriodicField::from_fn(dims, 2, |x, out| {
        let r2 = (x[0] * x[0] + x[1] * x[1]) / 0.09;
        if r2 >= 1.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        // ψ = (1 − r²)^4, ∇ψ = −8(1 − r²)^3 x / 0.09
        let g = -8.0 * (1.0 - r2).powi(3) / 0.09;
        out[0] = g * x[1];
        out[1] = -g * x[0];
    })
}

#[test]
fn correction_is_near_identity_on_free_fields() {
    let op = builtin_operator("div", 2, 1, None).unwrap();
    let u = compact_solenoidal(&[128, 128]);
    let (z, diag) = periodic_afree_correction(&op, &u, 0.1, 0.75).unwrap();
    assert!(z.sub(&u).l1_norm() <= 1e-3 * u.l1_norm(), "{diag:?}");
    assert!(diag.output_residual <= 1e-8);

    let zero = PeriodicField::zeros(&[32, 32], 2);
    let (z0, _) = periodic_afree_correction(&op, &zero, 0.1, 1.0).unwrap();
    assert_eq!(z0.sup_norm(), 0.0);
}

#[test]
fn correction_removes_gradients() {
    let op = builtin_operator("div", 2, 1, None).unwrap();
    // leakage from the cutoff is about 2·margin, so the margin is thin but resolved
    let u = gradient_field(&[512, 512]);
    let (z, _) = periodic_afree_correction(&op, &u, 0.005, 1.0).unwrap();
    assert!(
        z.l1_norm() <= 1e-2 * u.l1_norm(),
        "ratio {}",
        z.l1_norm() / u.l1_norm()
    );
}

/// Blow-ups `u(x0 + r y)` with `r = 1/m` of a mode whose frequency is a
/// multiple of `m` stay periodic; returns `log ‖A^k u_r‖ / ‖u_r‖` against `log r`.
fn principal_decay(
    op: &OperatorSpec,
    u: impl Fn(&[f64], &mut [f64]) + Copy,
    ms: &[usize],
) -> Vec<(f64, f64)> {
    let x0 = [0.13, -0.21];
    let principal = op.principal_part();
    ms.iter()
        .map(|&m| {
            let r = 1.0 / m as f64;
            let ur = PeriodicField::from_fn(&[32, 32], op.state_dim(), |y, out| {
                u(&[x0[0] + r * y[0], x0[1] + r * y[1]], out)
            });
            let full = apply_operator(&op.rescale(r).unwrap(), &ur).unwrap();
            assert!(
                full.l2_norm() <= 1e-9 * ur.l2_norm(),
                "blow-up is not free for the rescaled operator"
            );
            let top = apply_operator(&principal, &ur).unwrap();
            (r.ln(), (top.l2_norm() / ur.l2_norm()).ln())
        })
        .collect()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn lower_order_terms_vanish_under_blow_up() {
    // Helmholtz Δu + λu: order gap 2, free modes with 4π²|ξ|² = λ
    let q = 16.0;
    let lambda = 4.0 * PI * PI * q * q;
    let helmholtz = OperatorSpec::new(
        2,
        1,
        1,
        2,
        [
            (
                MultiIndex::new(vec![2, 0]),
                DMatrix::from_element(1, 1, 1.0),
            ),
            (
                MultiIndex::new(vec![0, 2]),
                DMatrix::from_element(1, 1, 1.0),
            ),
            (
                MultiIndex::new(vec![0, 0]),
                DMatrix::from_element(1, 1, lambda),
            ),
        ],
    )
    .unwrap();
    let wave = move |x: &[f64], out: &mut [f64]| out[0] = (2.0 * PI * q * x[0] + 0.4).cos();
    let s = slope(&principal_decay(&helmholtz, wave, &[2, 4, 8, 16]));
    assert!((s - 2.0).abs() <= 0.2, "slope {s}");

    // div u + b u1: order gap 1
    let b = 3.0;
    let damped = OperatorSpec::new(
        2,
        2,
        1,
        1,
        [
            (
                MultiIndex::unit(2, 0),
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            ),
            (
                MultiIndex::unit(2, 1),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            ),
            (
                MultiIndex::new(vec![0, 0]),
                DMatrix::from_row_slice(1, 2, &[b, 0.0]),
            ),
        ],
    )
    .unwrap();
    let field = move |x: &[f64], out: &mut [f64]| {
        let t = 2.0 * PI * q * x[1];
        out[0] = t.cos();
        out[1] = -b / (2.0 * PI * q) * t.sin();
    };
    let s = slope(&principal_decay(&damped, field, &[2, 4, 8, 16]));
    assert!((s - 1.0).abs() <= 0.1, "slope {s}");
}
