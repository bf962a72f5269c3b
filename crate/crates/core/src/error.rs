use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a parameter set could not be synthesized or is not admissible.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// Diffusion coefficients differ but the requested route needs an
    /// isotropic problem.
    Anisotropic,
    /// No admissible root of the single-axis conditions.
    Axis { axis: usize },
    /// No admissible root of the cross condition for the pair `(i, j)`.
    Pair { i: usize, j: usize },
    /// Roots exist per axis and pair, but no combination is jointly admissible.
    NoAdmissibleCombination,
    /// A weight left the open interval (0, 1).
    Weight { index: usize, value: f64 },
    /// A relaxation rate left the open interval (0, 2).
    Rate { name: String, value: f64 },
    /// A closed-form expression hits a pole.
    Pole { what: &'static str },
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Infeasibility::Anisotropic => write!(f, "anisotropic"),
            Infeasibility::Axis { axis } => write!(f, "no admissible root for axis {}", axis + 1),
            Infeasibility::Pair { i, j } => {
                write!(f, "no admissible cross rate for pair ({}, {})", i + 1, j + 1)
            }
            Infeasibility::NoAdmissibleCombination => {
                write!(f, "no jointly admissible combination of axis roots")
            }
            Infeasibility::Weight { index, value } => {
                write!(f, "weight omega_{index} = {value} outside (0,1)")
            }
            Infeasibility::Rate { name, value } => write!(f, "rate {name} = {value} outside (0,2)"),
            Infeasibility::Pole { what } => write!(f, "pole in {what}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("singular matrix (pivot {pivot:e} in column {column})")]
    SingularMatrix { pivot: f64, column: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("eta-correction infeasible: negative radicand for s_tilde = {s_tilde}, eta*dt = {eta_dt}")]
    InfeasibleCorrection { s_tilde: f64, eta_dt: f64 },
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),
    #[error("degenerate source: dt*eta = 2")]
    DegenerateSource,
    #[error("divergence detected at step {step} in cell {cell}")]
    DivergenceDetected { step: usize, cell: usize },
    #[error("degenerate norm: reference field is identically zero")]
    DegenerateNorm,
}

impl From<Infeasibility> for Error {
    fn from(value: Infeasibility) -> Self {
        Error::Infeasible(value)
    }
}
