//! Heat-haze simulation: an SPH thermofluid model whose density field is
//! voxelized into a refractive-index volume and rendered with curved rays.
//!
//! The crate is organized bottom-up:
//!
//! * [`sph`] holds particle state, the spiky kernel, neighbor search, the
//!   density-constraint solve and the three-stage simulation step.
//! * [`thermal`] injects heat from box sources, conducts it between particles
//!   and turns temperature into buoyancy and convective velocity changes.
//! * [`refract`] splats particle density onto a voxel grid and samples the
//!   refractive index and its gradient.
//! * [`ray`] marches curved rays through the volume and renders images.
//! * [`metrics`] computes turbulence statistics and optical-distortion
//!   measurements (marker tracking, depth linearity, cross-view divergence).
//! * [`scenario`] ties everything together behind a TOML scenario file and
//!   the runners used by the `haze` command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geom;
pub mod metrics;
pub mod ray;
pub mod refract;
pub mod scenario;
pub mod sph;
pub mod thermal;

pub use error::{HazeError, Result};
pub use geom::{Aabb, Vec3};
