use thiserror::Error;

/// Errors raised by the library. Locations and magnitudes are reported as
/// `f64` regardless of the scalar type used for the computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frame is rank deficient (sigma_min/sigma_max = {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("frame is not isotropic (residual {residual:.3e} exceeds tolerance)")]
    NotIsotropic { residual: f64 },

    #[error("inconsistent Hormander index: routes give {first} and {second}")]
    InconsistentIndex { first: i64, second: i64 },

    #[error("no intersection with the reference Lagrangian at t = {location:.6}")]
    EmptyKernel { location: f64 },

    #[error("degenerate endpoint in spectral flow path (index {index})")]
    DegenerateEndpoint { index: usize },

    #[error("P(t) is singular at t = {t:.6}")]
    SingularP { t: f64 },

    #[error("matrix is not hyperbolic (min |Re lambda| = {gap:.3e})")]
    NotHyperbolic { gap: f64 },

    #[error("coefficients have not settled to their limits by t = {t_max}: {detail}")]
    NoDecay { t_max: f64, detail: String },

    #[error("integrator failure at t = {t:.6}: {detail}")]
    IntegratorFailure { t: f64, detail: String },

    #[error("isotropy lost during propagation at t = {t:.6} (residual {residual:.3e})")]
    IsotropyLoss { t: f64, residual: f64 },

    #[error("crossings near t = {location:.6} could not be separated (count {count}, multiplicity {multiplicity})")]
    UnresolvedCluster { location: f64, count: i64, multiplicity: usize },

    #[error("non-regular crossing at t = {location:.6} (degenerate crossing form)")]
    NonRegularCrossing { location: f64 },

    #[error("index changed under truncation refinement: {first} then {second}")]
    PlateauFailure { first: i64, second: i64 },

    #[error("oracle count {oracle} disagrees with the conjugate-point index {index}")]
    OracleMismatch { index: i64, oracle: i64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("sampled vector leaves the unstable bundle at t = {t:.6} (distance {distance:.3e})")]
    NotInBundle { t: f64, distance: f64 },

    #[error("vector path is degenerate: {0}")]
    DegenerateVectorPath(String),

    #[error("negative count is unstable across refinement levels {counts:?}: {detail}")]
    UnstableCount { counts: Vec<usize>, detail: String },

    #[error("not an equilibrium: |grad F(u)| = {residual:.3e}")]
    NotEquilibrium { residual: f64 },

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("phase condition is singular: {0}")]
    PhaseConditionSingular(String),

    #[error("critical point near xi = {location:.6} is not an isolated zero")]
    TangentialZero { location: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
