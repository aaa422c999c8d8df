//! Numerical laboratory for rotationally symmetric mean curvature flow and
//! its cylindrical singularity models.
//!
//! * [`spectral`]: Gaussian inner products, the linearised operator on the
//!   shrinking cylinder and mode projections.
//! * [`flow`]: profile-curve flow solver, trajectories and the renormalised flow.
//! * [`solitons`]: bowl translator and shrinker profiles.
//! * [`entropy`]: Gaussian area, entropy, Huisken density and cylindrical scale.
//! * [`neck`]: mode-energy dichotomy, decay fits, neutral-mode ODE, tip and
//!   mean-convexity diagnostics.
//! * [`moving_plane`]: reflection/containment tests on axial cross-sections.

pub mod entropy;
pub mod error;
pub mod flow;
pub mod io;
pub mod moving_plane;
pub mod neck;
pub mod numerics;
pub mod solitons;
pub mod spectral;

pub use error::{Error, Result};
