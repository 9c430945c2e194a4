//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },

    #[error("coordinate `{name}` at byte {offset} is out of range: valid coordinates are x0..x{max}")]
    CoordOutOfRange {
        name: String,
        offset: usize,
        max: usize,
    },

    #[error("metric spec: {0}")]
    Spec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid point: {0}")]
    Point(String),

    #[error("degenerate screen metric at {point:?}: smallest eigenvalue {eigenvalue:.3e}")]
    DegenerateScreen { point: Vec<f64>, eigenvalue: f64 },

    #[error(
        "endomorphism violates the so(1,n+1) stabilizer block form: residual {residual:.3e} exceeds {tol:.3e}"
    )]
    BlockForm { residual: f64, tol: f64 },

    #[error("shape operator acquired a radical component: residual {residual:.3e} exceeds {tol:.3e}")]
    ShapeRadical { residual: f64, tol: f64 },

    #[error("bracket closure did not stabilize within {rounds} rounds")]
    ClosureDiverged { rounds: usize },

    #[error("malformed algebra basis: {0}")]
    MalformedBasis(String),

    #[error("invalid curve: {0}")]
    Curve(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
