//! Point vortices on the hyperboloid model of the hyperbolic plane.
//!
//! The phase space is a product of copies of H₂ with the KKS form weighted by
//! the vortex strengths; SL(2,ℝ) acts by Möbius transformations and the
//! momentum map is `J = Σ Γᵢ Xᵢ`. On top of the dynamics the crate provides
//! relative-equilibrium solvers and formal-stability tests.

pub mod calibration;
pub mod cli;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod hypgeo;
pub mod sl2;
pub mod stability;

pub use dynamics::{Configuration, IntegratorConfig, TrajectorySample};
pub use error::{Error, Result};
pub use hypgeo::{HPoint, Vec3};
pub use sl2::{AlgebraElement, DualElement, GroupElement, MomentumType};
