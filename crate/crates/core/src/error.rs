use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quantity {a} outside demand domain [0, {a_max}]")]
    Domain { a: f64, a_max: f64 },
    #[error("invalid demand shape: {0}")]
    Shape(&'static str),
    #[error("no sign change of A - phi(A) on [0, {a_max}]; enlarge the domain")]
    Bracket { a_max: f64 },
    #[error("invalid argument: {0}")]
    Arg(&'static str),
    #[error("equilibrium does not exist: {0}")]
    Existence(&'static str),
    #[error("complex roots at expansion point {at} (discriminant {discriminant})")]
    ComplexRoot { at: f64, discriminant: f64 },
    #[error("complex forecast for agent informed at {at}")]
    ComplexForecast { at: f64 },
    #[error("mixture supply is complex at psi = {psi}")]
    ComplexMixture { psi: f64 },
    #[error("quadrature error estimate {estimate:e} exceeds tolerance")]
    Quadrature { estimate: f64 },
    #[error("density integrates to {integral}, not 1")]
    Normalization { integral: f64 },
    #[error("hypothesis not met: {0}")]
    Hypothesis(&'static str),
    #[error("function is not finite at {at}")]
    NonFinite { at: f64 },
    #[error("unknown equation id")]
    UnknownEquation,
    #[error("equation context is missing coefficient `{0}`")]
    MissingCoefficient(&'static str),
}
