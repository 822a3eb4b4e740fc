//! Numerical tools for free-time minimizers of the planar three-body problem.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: masses, the mass metric, the Newtonian potential and its
//!   derivatives.
//! * [`central`]: the two Lagrange and three Euler central configurations and
//!   the homothetic parabolic orbits built on them.
//! * [`spectra`]: closed-form restpoint eigenvalues of the blown-up flow, the
//!   linearisation matrices used to cross-check them, and the spiraling
//!   classifier over the mass simplex.
//! * [`flow`]: the McGehee blown-up vector field in the collision (`r`) and
//!   infinity (`u`) charts, an adaptive integrator with constraint
//!   projection, variational equations, stable-manifold shooting and the
//!   pulled-back symplectic forms.
//! * [`secondvar`]: the second variation of the action along homothetic and
//!   asymptotically homothetic orbits, indicial roots and conjugate points.
//! * [`jm`]: discrete paths, the Lagrangian action, Jacobi-Maupertuis length
//!   and a local-minimality probe.
//!
//! Coordinates are flat arrays `(q1x, q1y, q2x, q2y, q3x, q3y)` everywhere.

pub mod central;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod jm;
pub mod linalg;
pub mod secondvar;
pub mod spectra;
pub mod spline;

pub use error::{Error, Result};
pub use geometry::{Configuration, MassTriple, NormalizedConfiguration, Vec6, Velocity};
