use thiserror::Error;

/// Errors raised by the numerical laboratory.
///
/// Variants are grouped by the subsystem that emits them; [`Error::is_validation`]
/// separates bad input from numerical failure (the CLI maps these to distinct exit codes).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // geometry
    #[error("profile self-intersects between segments {0} and {1}")]
    SelfIntersection(usize, usize),
    #[error("negative radius {r} at sample {index}")]
    NegativeRadius { index: usize, r: f64 },
    #[error("too few points: got {got}, need at least {need}")]
    TooFewPoints { got: usize, need: usize },
    #[error("degenerate (zero-length) segment at sample {0}")]
    DegenerateSegment(usize),
    #[error("open profile has unbounded Gaussian integral; supply a truncation radius")]
    UnboundedDomain,
    #[error("entropy search left the bounding box at shift {shift}, log-scale {log_scale}")]
    SearchDiverged { shift: f64, log_scale: f64 },
    #[error("translation with off-axis component ({0}) breaks rotational symmetry")]
    SymmetryBreaking(f64),

    // shrinkers
    #[error("shooting found no closed orbit: {0}")]
    NoClosedOrbit(String),
    #[error("shrinker ODE blew up: {0}")]
    BlowUp(String),
    #[error("profile does not cover the annulus [{lo}, {hi}] after blow-down")]
    AnnulusNotCovered { lo: f64, hi: f64 },
    #[error("cap position {cap_x} leaves no room on [{x0}, {x1}]")]
    CapTooTight { cap_x: f64, x0: f64, x1: f64 },

    // spectral
    #[error("cutoff radius {radius} exceeds the surface extent {extent}")]
    CutoffBeyondSurface { radius: f64, extent: f64 },
    #[error("eigensolver did not converge after {0} iterations")]
    EigensolverNoConvergence(usize),
    #[error("Lambda = {lambda} too small: Q-norm squared is {q_sq} < 0")]
    LambdaTooSmall { lambda: f64, q_sq: f64 },
    #[error("decay check needs a conical end of extent >= {need}, got {got}")]
    EndTooShort { need: f64, got: f64 },

    // flow
    #[error("self-intersection detected during flow at t = {0}")]
    SelfIntersectionDetected(f64),
    #[error("singularity approach at t = {t}: max|A| = {max_a}")]
    SingularityApproach { t: f64, max_a: f64 },
    #[error("surface is not a normal graph: {0}")]
    NotGraphical(String),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableTimeStep { dt: f64, bound: f64 },

    // feynman-kac
    #[error("off-surface projection failed at path {path}, step {step}")]
    OffSurfaceProjectionFailed { path: usize, step: usize },

    // dynamics
    #[error("perturbed flow left the neighborhood of the shrinker at t = {0}")]
    FlowLeftNeighborhood(f64),
    #[error("base flow shooting did not converge: {0}")]
    BaseFlowShooting(String),
    #[error("window too short: {samples} samples over {span} time units")]
    WindowTooShort { samples: usize, span: f64 },

    // io / validation
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by invalid input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::SelfIntersection(..)
                | Error::NegativeRadius { .. }
                | Error::TooFewPoints { .. }
                | Error::DegenerateSegment(_)
                | Error::UnboundedDomain
                | Error::SymmetryBreaking(_)
                | Error::CapTooTight { .. }
                | Error::CutoffBeyondSurface { .. }
                | Error::LambdaTooSmall { .. }
                | Error::EndTooShort { .. }
                | Error::UnstableTimeStep { .. }
                | Error::WindowTooShort { .. }
                | Error::Invalid(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
