//! Numerical toolkit for constant-coefficient linear PDE operators acting on
//! vector measures.
//!
//! The crate is organised bottom-up:
//!
//! * [`operator`]: operators `A = Σ A_α ∂^α`, their principal symbols and rescalings.
//! * [`wave_cone`]: constant-rank checks, wave-cone membership, the span `V_A`
//!   and characteristic sets, all by sphere sampling with local refinement.
//! * [`projection`]: the Fourier projection onto zero-mean periodic A-free
//!   fields, negative Sobolev norms and the periodic correction pipeline.
//! * [`integrand`]: linear-growth integrands, recession estimates, the
//!   `S`-transform and directional convexity checks.
//! * [`envelope`]: numerical A-quasiconvex envelopes with laminate bounds.
//! * [`measure`]: measures with singular parts, functionals, mollification,
//!   blow-ups and empirical Young-measure moments.
//! * [`experiments`]: oscillation/concentration families and end-to-end
//!   lower-semicontinuity, relaxation and Jensen checks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod envelope;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod field;
pub mod integrand;
pub mod kernel;
pub mod linalg;
pub mod measure;
pub mod operator;
pub mod projection;
pub mod sphere;
pub mod wave_cone;

pub use error::{Error, Result};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
