//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while constructing or querying almost complex structures.
#[derive(Debug, Clone, Error)]
pub enum StructureError {
    /// `(J + J_st)` is numerically singular at a queried point.
    #[error("(J + J_st) is numerically singular at ({0:.6}, {1:.6}, {2:.6}, {3:.6}); min singular value {4:.3e}")]
    SingularStructure(f64, f64, f64, f64, f64),
    /// The field fails `J^2 = -Id` beyond tolerance.
    #[error("structure violates J^2 = -Id: max defect {defect:.3e} exceeds {tolerance:.1e}")]
    NotAlmostComplex { defect: f64, tolerance: f64 },
    /// A conjugating frame `G` is not invertible somewhere on the domain.
    #[error("frame G(z) is singular near ({0:.6}, {1:.6}, {2:.6}, {3:.6}); |det G| = {4:.3e}")]
    SingularFrame(f64, f64, f64, f64, f64),
    /// Validation was requested with an empty sample list.
    #[error("validation requires at least one sample point")]
    NoSamples,
}

/// Errors from disc-field calculus.
#[derive(Debug, Clone, Error)]
pub enum DiscError {
    /// An operation would need coefficients above the truncation degree.
    #[error("operation on {op} would exceed truncation degree {degree} (input n-degree {have})")]
    TruncationOverflow {
        op: &'static str,
        degree: usize,
        have: usize,
    },
    /// Evaluation point lies outside the closed unit disc.
    #[error("evaluation point |z| = {0} lies outside the closed unit disc")]
    OutsideDisc(f64),
    /// Trace resolution violates the type invariants.
    #[error("boundary trace resolution {n_theta} invalid: must be a power of two and >= 4*degree = {min}")]
    InvalidResolution { n_theta: usize, min: usize },
    /// Truncation degree below the supported minimum.
    #[error("truncation degree {0} below minimum 4")]
    DegreeTooSmall(usize),
}

/// Errors from the nonlinear disc solver.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    /// Fixed-point iteration stagnated or diverged.
    #[error("no convergence: residual {residual:.3e} after {iterations} iterations{}", at_t.map(|t| format!(" (continuation t = {t})")).unwrap_or_default())]
    NoConvergence {
        residual: f64,
        iterations: usize,
        at_t: Option<f64>,
    },
    /// A Lemma-1 style norm bound failed even with slack.
    #[error("norm bound violated: ||u - v|| = {observed:.6e} > {bound:.6e} (C0 = {c0}, |V| = {v_norm})")]
    BoundViolation {
        observed: f64,
        bound: f64,
        c0: f64,
        v_norm: f64,
    },
    /// Measured Lipschitz constant of `Psi - Id` is >= 1.
    #[error("Psi - Id is not a contraction on the probe set: kappa = {0:.4}")]
    NotAContraction(f64),
    /// Neither or both PDE conventions reproduce J-holomorphy.
    #[error("Q-mode selection ambiguous: structural residuals linear {linear:.3e}, antilinear {antilinear:.3e} (threshold {threshold:.1e})")]
    ModeAmbiguity {
        linear: f64,
        antilinear: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Disc(#[from] DiscError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Errors from envelope computations.
#[derive(Debug, Clone, Error)]
pub enum EnvelopeError {
    /// A boundary sample of the disc left the domain.
    #[error("disc boundary sample at angle index {0} leaves the domain (distance {1:.3e} past the boundary)")]
    OutsideDomain(usize, f64),
    /// No admissible disc was found (only possible on configuration errors).
    #[error("no feasible disc at the base point: {0}")]
    NoFeasibleDisc(String),
    /// Inner PDE solve failed on a mandatory candidate.
    #[error("disc solver failed on a mandatory candidate: {0}")]
    SolverFailure(#[from] SolverError),
    /// Base point must belong to the domain.
    #[error("base point lies outside the domain (|p - P| = {0}, radius {1})")]
    BasePointOutside(f64, f64),
}

/// Errors from the approximation pipeline.
#[derive(Debug, Clone, Error)]
pub enum PipelineError {
    /// No grid node near the boundary is claimed by the exhaustion branch.
    #[error("truncation at k = {k}: collar is empty at grid resolution (max rho - k - phi_k = {max_excess:.3e})")]
    EmptyCollar { k: usize, max_excess: f64 },
    /// No kernel width in the search grid satisfies the sandwich at some node.
    #[error("smoothing at k = {k}: no kernel width satisfies the sandwich at node {node} (defect {defect:.3e})")]
    SandwichFailure { k: usize, node: usize, defect: f64 },
    /// Smoothed stage fails the sub-mean-value check.
    #[error("smoothing at k = {k}: smoothed field fails the sub-mean check (violation {violation:.3e} > {tolerance:.3e})")]
    PshFailure {
        k: usize,
        violation: f64,
        tolerance: f64,
    },
    /// Exhaustion certification exhausted its parameter family.
    #[error("no (A, B) in the search family certifies a strictly subharmonic exhaustion (best margin {0:.3e})")]
    CertificationFailure(f64),
    /// A stage of the pipeline failed.
    #[error("pipeline stage k = {k} ({stage}): {source}")]
    Stage {
        k: usize,
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    /// The input function fails its own precondition.
    #[error("input field fails sub-mean precondition: violation {0:.3e}")]
    InputNotPsh(f64),
}
