//! Rigid body in a planar potential flow inside a bounded domain: added-mass
//! dynamics, geodesic shooting and impulsive boundary control from an arc of
//! the outer wall.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod geodesic;
pub mod geometry;
pub mod laplace;
pub mod linalg;
pub mod ode;
pub mod simulate;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{DomainSpec, Pose, SolidShape, State};
