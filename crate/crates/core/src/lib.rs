//! Numerical pluripotential theory on almost complex surfaces.
//!
//! The crate solves the nonlinear Cauchy-Riemann equation for
//! J-holomorphic discs in C^2 through a bigraded spectral representation
//! of the Cauchy-Green transform, computes Poletsky disc envelopes of
//! upper semicontinuous functions under structures C^1-close to the
//! standard one, and runs the approximation pipeline that produces a
//! decreasing sequence of smooth plurisubharmonic approximants pinned by
//! the Richberg sandwich.
//!
//! Modules follow the data flow:
//! - [`structure`]: almost complex structures J and the deformation
//!   tensor Q = (J - J_st)(J + J_st)^{-1};
//! - [`disc`]: disc fields, d/dz, d/dzbar and the Cauchy-Green transform;
//! - [`solver`]: the maps Phi and Psi, fixed-point disc solves,
//!   continuation translates, C0 estimation;
//! - [`envelope`]: boundary means, disc envelopes and envelope fields;
//! - [`psh`]: sub-mean-value checks and strictly subharmonic exhaustions;
//! - [`pipeline`]: regularization, truncation and certified smoothing.

pub mod disc;
pub mod envelope;
pub mod error;
pub mod field;
pub mod optim;
pub mod pipeline;
pub mod point;
pub mod psh;
pub mod report;
pub mod sampling;
pub mod solver;
pub mod structure;

pub use disc::{
    boundary_trace, cg_transform, circle_trace, dbar, dz, BoundaryTrace, DiscField, DiscGrid,
    DEFAULT_ALPHA, DEFAULT_DEGREE, DEFAULT_N_THETA,
};
pub use envelope::{
    boundary_mean, continuity_report, envelope_field, poletsky_envelope, EnvelopeField,
    EnvelopeResult, SearchConfig,
};
pub use error::{DiscError, EnvelopeError, PipelineError, SolverError, StructureError};
pub use field::{Domain, GridField, GridSpec, Interpolation, Modulus, ScalarField};
pub use pipeline::{
    approximation_pipeline, richberg_smooth, truncate_with_exhaustion, upper_regularize,
    ApproximationSequence, PipelineConfig,
};
pub use point::ComplexPoint2;
pub use psh::{build_exhaustion, sub_mean_check, ExhaustionFunction, SubMeanReport};
pub use report::{Certification, CertificationSet};
pub use solver::{
    estimate_c0, jholomorphy_residuals, phi_map, psi_map, select_q_mode, solve_disc,
    translate_disc, C0Estimate, C0Method, SolverConfig,
};
pub use structure::{
    compute_q, conjugated_structure, validate_structure, AlmostComplexStructure, FrameField,
    QMode, QTensor,
};
