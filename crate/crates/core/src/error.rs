//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is outside the chart domain of fixture `{family}`")]
    OutsideDomain { family: String, point: Vec<f64> },

    #[error("the zero fiber vector is not a valid argument here")]
    ZeroVector,

    #[error("norm evaluator returned a non-finite value at x={x:?}, y={y:?}")]
    NonFiniteNorm { x: Vec<f64>, y: Vec<f64> },

    #[error("fundamental tensor is not positive definite (min eigenvalue {min_eig:e}) at x={x:?}, y={y:?}")]
    NotPositiveDefinite {
        x: Vec<f64>,
        y: Vec<f64>,
        min_eig: f64,
    },

    #[error("fundamental tensor is numerically singular at x={x:?}, y={y:?}")]
    SingularTensor { x: Vec<f64>, y: Vec<f64> },

    #[error("degenerate flag: pole and transverse vector are g-linearly dependent (denominator {denom:e})")]
    DegenerateFlag { denom: f64 },

    #[error("{context}: iteration failed to converge (residual {residual:e}, tolerance {tolerance:e})")]
    NoConvergence {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("geodesic left the chart domain at t={t}")]
    DomainExit { t: f64 },

    #[error("step size collapsed below {min_step:e} at t={t} during geodesic integration")]
    StepCollapse { t: f64, min_step: f64 },

    #[error("shooting solver found no geodesic from {from:?} to {to:?}; best upper bound {upper_bound}")]
    ShootingFailed {
        from: Vec<f64>,
        to: Vec<f64>,
        upper_bound: f64,
    },

    #[error("no minimal geodesic found from {from:?} to {to:?}")]
    EmptyTerminalSet { from: Vec<f64>, to: Vec<f64> },

    #[error("angle limit quotient is not Cauchy (spread {spread:e}); distance is likely non-smooth here (cut point)")]
    AngleNotConverging { spread: f64 },

    #[error("curvature/S-curvature hypothesis check failed: {detail}")]
    HypothesisFailed { detail: String },

    #[error("model surface table invalid: {detail}")]
    InvalidModel { detail: String },

    #[error("triangle with sides ({a}, {b}, {c}) does not admit a comparison triangle in this model")]
    NoComparisonTriangle { a: f64, b: f64, c: f64 },

    #[error("ball of radius {radius} around {point:?} exceeds the covered chart region")]
    ChartCoverage { point: Vec<f64>, radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown fixture key `{0}`")]
    UnknownFixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
