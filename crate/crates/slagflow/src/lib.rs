//! Numerical laboratory for special Lagrangian tori in Calabi model spaces,
//! their Moser transport onto perturbed metrics, and Lagrangian mean
//! curvature flow. Also carries the integer toolkit for singular fibers
//! and monodromy of two-dimensional torus fibrations.

pub mod ambient;
pub mod exterior;
pub mod fibration;
pub mod harness;
pub mod lagmesh;
pub mod lmcf;
pub mod moser;
pub mod par;

pub type Point = nalgebra::DVector<f64>;
