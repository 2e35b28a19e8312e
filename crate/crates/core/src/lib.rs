//! Numerical laboratory for a nonlocal pathogen / infected-human model whose
//! infected region `[g(t), h(t)]` expands through two free boundaries.
//!
//! * [`kernels`]: dispersal kernels, their tails and boundary weights
//! * [`model`]: constants, infection nonlinearity, `R0`, equilibrium
//! * [`initial`]: initial profiles
//! * [`ode`]: the spatially homogeneous system
//! * [`spectral`]: principal eigenvalue of the linearized block operator
//! * [`simulator`]: the free-boundary and fixed-boundary integro-differential systems
//! * [`thresholds`]: bisection for the sharp constants `L*`, `d*`, `μ*`, `σ*`

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod initial;
pub mod kernels;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod simulator;
pub mod spectral;
pub mod thresholds;

pub use error::{Error, Result};
