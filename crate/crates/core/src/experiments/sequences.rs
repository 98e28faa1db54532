use crate::error::{Error, Result};
use crate::kernel::laminate_profile;
use crate::linalg::{dot, norm};
use crate::measure::{BoxDomain, Geometry, GridMeasure, SingularPiece};
use crate::operator::OperatorSpec;
use crate::wave_cone::normalized_residual;

/// Largest accepted `‖M(ξ)P‖/(‖M(ξ)‖‖P‖)` for a kernel amplitude.
pub const KERNEL_TOL: f64 = 1e-8;

pub fn check_kernel(op: &OperatorSpec, p0: &[f64], xi: &[f64]) -> Result<()> {
    if p0.len() != op.state_dim() || xi.len() != op.dim() {
        return Err(Error::Shape(format!(
            "amplitude/frequency of lengths {}/{} for an operator with N={}, d={}",
            p0.len(),
            xi.len(),
            op.state_dim(),
            op.dim()
        )));
    }
    if norm(p0) == 0.0 || norm(xi) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let residual = normalized_residual(op, p0, xi);
    if residual > KERNEL_TOL {
        return Err(Error::NotInKernel { residual });
    }
    Ok(())
}

fn check_dims(op: &OperatorSpec, dims: &[usize]) -> Result<()> {
    if dims.len() != op.dim() || dims.contains(&0) {
        return Err(Error::GridMismatch(format!(
            "grid {dims:?} for an operator in d={}",
            op.dim()
        )));
    }
    Ok(())
}

/// Density `A0 + P0·χ_ε(j x·ξ)` on the centred unit cube, `χ_ε` the mollified
/// two-level laminate profile.
#[allow(clippy::too_many_arguments)]
pub fn oscillation_sequence(
    op: &OperatorSpec,
    a0: &[f64],
    p0: &[f64],
    xi: &[f64],
    theta: f64,
    eps: f64,
    j: u32,
    dims: &[usize],
) -> Result<GridMeasure> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::BadTheta(theta));
    }
    check_kernel(op, p0, xi)?;
    check_dims(op, dims)?;
    if a0.len() != op.state_dim() {
        return Err(Error::Shape(format!("A0 has length {}", a0.len())));
    }
    let limit = 0.5 * theta.min(1.0 - theta);
    if !(eps >= 0.0 && eps < limit) {
        return Err(Error::InvalidArgument(format!(
            "profile mollification {eps} must lie in [0, {limit})"
        )));
    }
    let jf = j as f64;
    Ok(GridMeasure::from_density_fn(
        BoxDomain::centred_cube(op.dim()),
        dims,
        op.state_dim(),
        |x, out| {
            let chi = laminate_profile(jf * dot(x, xi), theta, eps);
            for ((o, a), p) in out.iter_mut().zip(a0).zip(p0) {
                *o = a + chi * p;
            }
        },
    ))
}

/// Density `P0·j·1{|x·ξ − c| < 1/(2j)}` (unit `ξ`) on the centred unit cube.
/// Axis-aligned `ξ` uses exact cell overlaps, other directions sample the
/// indicator at cell centres.
pub fn concentration_sequence(
    op: &OperatorSpec,
    p0: &[f64],
    xi: &[f64],
    j: u32,
    c: f64,
    dims: &[usize],
) -> Result<GridMeasure> {
    check_kernel(op, p0, xi)?;
    check_dims(op, dims)?;
    if j == 0 {
        return Err(Error::InvalidArgument(
            "concentration index must be positive".into(),
        ));
    }
    let r = norm(xi);
    let unit: Vec<f64> = xi.iter().map(|v| v / r).collect();
    let jf = j as f64;
    let half = 0.5 / jf;
    let axis = {
        let nz: Vec<usize> = (0..unit.len()).filter(|&a| unit[a] != 0.0).collect();
        (nz.len() == 1).then(|| nz[0])
    };
    Ok(GridMeasure::from_density_fn(
        BoxDomain::centred_cube(op.dim()),
        dims,
        op.state_dim(),
        |x, out| {
            let s = dot(x, &unit) - c;
            let frac = match axis {
                Some(a) => {
                    let h = 1.0 / dims[a] as f64;
                    let lo = (s - 0.5 * h).max(-half);
                    let hi = (s + 0.5 * h).min(half);
                    (hi - lo).max(0.0) / h
                }
                None => {
                    if s.abs() < half {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            for (o, p) in out.iter_mut().zip(p0) {
                *o = jf * frac * p;
            }
        },
    ))
}

/// The `j → ∞` limit: zero density plus the hyperplane `{x·ξ = c}` carrying
/// mass `|P0|·area` and polar `P0/|P0|`.
pub fn concentration_limit(
    op: &OperatorSpec,
    p0: &[f64],
    xi: &[f64],
    c: f64,
    dims: &[usize],
) -> Result<GridMeasure> {
    check_kernel(op, p0, xi)?;
    check_dims(op, dims)?;
    let domain = BoxDomain::centred_cube(op.dim());
    let r = norm(xi);
    let unit: Vec<f64> = xi.iter().map(|v| v / r).collect();
    let area = domain.section_area(&unit, c);
    let piece = SingularPiece::new(
        Geometry::Hyperplane {
            normal: unit,
            offset: c,
        },
        norm(p0) * area,
        p0.to_vec(),
    )?;
    Ok(GridMeasure::zero(domain, dims, op.state_dim()).with_piece(piece))
}
