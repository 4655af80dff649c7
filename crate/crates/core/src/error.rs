use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("value {value} outside the open domain ({lo}, {hi})")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("element {index} = {value} outside the transformed domain")]
    DomainAt { index: usize, value: f64 },

    /// Explicit Euler-Maruyama left the model domain.
    #[error("domain violation at step {step}: state {value}")]
    DomainViolation { step: usize, value: f64 },

    #[error(
        "inadmissible step: 2*max(0,K)*dt = {lhs} is not below eta = {eta} (K = {k}, dt = {dt})"
    )]
    InadmissibleStep { k: f64, dt: f64, eta: f64, lhs: f64 },

    #[error("implicit solve did not converge in {iterations} iterations; root bracketed in [{lo}, {hi}]")]
    NoConvergence { iterations: u32, lo: f64, hi: f64 },

    #[error("step {step}: {reason}")]
    Step { step: usize, reason: String },

    #[error("invalid solver configuration: {0}")]
    SolverConfig(&'static str),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("path of {len} increments cannot be coarsened by {factor}")]
    NonDivisible { len: usize, factor: usize },

    #[error("coarse step {coarse} is not a power-of-two multiple of fine step {fine}")]
    NonDyadic { coarse: f64, fine: f64 },

    #[error("cannot fit a power law: {0}")]
    DegenerateFit(&'static str),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("{0}")]
    Unsupported(&'static str),
}

impl Error {
    pub(crate) fn at_step(step: usize, err: Error) -> Error {
        Error::Step {
            step,
            reason: alloc::format!("{err}"),
        }
    }
}
