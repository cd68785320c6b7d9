use std::fmt;

/// One of the four defining properties of a current vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Axiom {
    /// `j` is a C¹ field (checked as: every sample is finite).
    Smooth,
    /// `∂_t j⁰ + ∇·J = 0`.
    Continuity,
    /// `j⁰ > 0` wherever `j ≠ 0` (and `j⁰ ≥ 0` everywhere).
    Positivity,
    /// `∫ j⁰ dq = 1`.
    Normalization,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axiom::Smooth => "smoothness",
            Axiom::Continuity => "continuity",
            Axiom::Positivity => "positivity",
            Axiom::Normalization => "normalization",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node encountered at t={t}: j0={j0:e} below threshold {threshold:e}")]
    NodeEncountered { t: f64, j0: f64, threshold: f64 },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point lies on singular subspace {index}")]
    OnSingularSet { index: usize },

    #[error("unsupported field: {0}")]
    UnsupportedField(String),

    #[error("axiom {axiom} violated: {detail}")]
    AxiomViolation { axiom: Axiom, detail: String },

    #[error("bad start: {0}")]
    BadStart(String),

    #[error("horizon {requested} outside provider window [{min}, {max}]")]
    ProviderWindow { requested: f64, min: f64, max: f64 },

    #[error("density integrates to zero on the sampling grid")]
    DegenerateDensity,

    #[error("only {survivors} surviving samples, need at least {required}")]
    TooFewSurvivors { survivors: usize, required: usize },

    #[error("transported boundary of box {index} self-intersects at mesh resolution")]
    BoxTooLarge { index: usize },

    #[error("quadrature window exceeds provider validity: {0}")]
    WindowExceeded(String),

    #[error("Hardy check needs exactly 3 normals, found {found}")]
    WrongCodimension { found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
