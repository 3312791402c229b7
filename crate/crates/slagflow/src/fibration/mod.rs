//! Integer and topological side of two-dimensional torus fibrations:
//! monodromy of meshed torus families, Kodaira types of singular fibers from
//! intersection data, SL(2,Z) feasibility of fiber configurations and Euler
//! characteristic bookkeeping.

mod kodaira;
mod monodromy;
mod sl2z;

pub use kodaira::{
    classify_fiber, euler_from_incidence, fixture, kodaira_table, quad_form_analysis, Component, IncidenceNotes,
    KodairaGraph, KodairaType, QuadFormAnalysis,
};
pub use monodromy::{
    model_fibration, monodromy, null_family, ModelFibrationOptions, MonodromyMatrix, MonodromyReport, TorusFamily,
};
pub use sl2z::{
    configuration_check, parabolic_class, sl2z_obstruction, surface_euler, two_fiber_certificate, Argument,
    ConfigurationReport, Mat2, ObstructionCertificate, Sl2zVerdict, Witness,
};

use crate::lagmesh::LagError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FibrationError {
    #[error(
        "cycle matching at step {step} is ambiguous for loop {direction}: {detail}; sample the family more finely"
    )]
    Ambiguity { step: usize, direction: usize, detail: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no Kodaira type matches: {0}")]
    Classification(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("transported basis has determinant {0}, expected 1")]
    Determinant(i64),
    #[error(transparent)]
    Mesh(#[from] LagError),
}
