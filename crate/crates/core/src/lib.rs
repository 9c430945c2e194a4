//! Lightlike-foliation geometry for Lorentzian metrics in Walker normal
//! form.
//!
//! Given a metric
//!
//! ```text
//! g = 2 dx0 dx{n+1} + sum_ij g_ij(x1..x{n+1}) dx^i dx^j + f(x0..x{n+1}) (dx{n+1})^2
//! ```
//!
//! this crate constructs the pointwise splitting of the tangent space into
//! the parallel lightlike line, a screen distribution and a lightlike
//! transversal line, evaluates the induced operators of that splitting
//! (shape operator, screen second fundamental form, line connections),
//! decomposes the curvature tensor into its five stabilizer components by
//! two independent routes, samples the holonomy algebra by parallel
//! transport, and classifies it into one of the four weakly irreducible
//! types together with its orthogonal part.
//!
//! The `wh` binary exposes the pipeline as `analyze`, `verify` and
//! `decompose` subcommands over metric-spec files; see the crate README.

pub mod algebra;
pub mod budgets;
pub mod classify;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod frame;
pub mod geometry;
pub mod metric;
pub mod report;
#[doc(hidden)]
pub mod testkit;
pub mod transport;

pub use error::{Error, Result};
pub use expr::{diff_expr, eval_expr, parse_expr, Expr};
pub use algebra::{lie_closure, AlgebraBasis};
pub use classify::{check_prop1, check_prop2, check_prop3, classify, CriterionReport, HolonomyReport, HolonomyType};
pub use curvature::{
    curvature_endomorphism, decompose_block, operator_route, reconstruct, star_rt_at,
    CurvatureComponents, LorentzBlockElement, OperatorRoute, PointCurvature,
};
pub use frame::{build_frame, AdaptedFrame, FramePart, FrameVector};
pub use geometry::{Christoffel, Geometry, RiemannTensor};
pub use metric::{load_metric_spec, parse_metric_spec, MetricSpec, Point};
pub use report::{analyze, decompose_report, verify, AnalysisReport, AnalyzeOptions, DecomposeReport, VerifyReport};
pub use transport::{sample_holonomy, transport_along, transport_map, Curve, SampleOptions, SampledElement, TransportMap};
