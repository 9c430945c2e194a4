//! Numerical tolerance budgets.
//!
//! Every residual check in the library and the `verify` command reads its
//! threshold from here. The budgets split into three grades:
//!
//! * symbolic-grade (1e-12 .. 1e-9): quantities evaluated from exact
//!   symbolic derivatives, so only rounding accumulates;
//! * first-derivative grade (1e-8 .. 1e-7): one central finite difference
//!   of a frame field enters (step `FD_STEP * (1 + |p|)`, error O(h^2));
//! * second-derivative grade (1e-6): nested differences in the operator
//!   route and integration error in parallel transport.

/// Central finite-difference step factor for first derivatives of fields.
pub const FD_STEP: f64 = 1e-5;

/// Outer step factor for the second-level differences of the operator
/// route (derivatives of quantities that already contain one difference).
pub const FD_OUTER_STEP: f64 = 5e-4;

/// Smallest admissible eigenvalue of the screen metric block.
pub const SCREEN_EIGENVALUE_MIN: f64 = 1e-12;

/// Frame orthonormality and change-of-basis round trips.
pub const FRAME_TOL: f64 = 1e-12;

/// Metric-inverse residual `|g g^-1 - I|`.
pub const INVERSE_TOL: f64 = 1e-12;

/// First Bianchi identity of the coordinate curvature tensor.
pub const BIANCHI_TOL: f64 = 1e-9;

/// Symmetry of the lowered curvature tensor in its index pairs.
pub const PAIR_SYMMETRY_TOL: f64 = 1e-9;

/// Symmetry of the screen-to-screen component `T`.
pub const T_SYMMETRY_TOL: f64 = 1e-10;

/// Block-route extraction: stabilizer block form of frame endomorphisms,
/// completeness of the five-component reconstruction.
pub const BLOCK_ROUTE_TOL: f64 = 1e-8;

/// Operator-route components against the block route.
pub const OPERATOR_ROUTE_TOL: f64 = 1e-6;

/// Duality between the screen second form and the shape operator.
pub const DUALITY_TOL: f64 = 1e-7;

/// Leaf restrictions: vanishing of `h` and of the screen shape operator
/// on vectors tangent to a leaf.
pub const LEAF_TOL: f64 = 1e-8;

/// Radical component of shape-operator values (must vanish).
pub const SHAPE_RADICAL_TOL: f64 = 1e-8;

/// Vanishing of the transversal-connection curvature on screen pairs.
pub const RST_SCREEN_TOL: f64 = 1e-7;

/// Cross-check of the transversal-connection curvature against the
/// block-route boost and translation components.
pub const RST_CROSS_TOL: f64 = 1e-6;

/// Parallel transport: metric preservation per unit curve length.
pub const TRANSPORT_METRIC_TOL: f64 = 1e-6;

/// Parallel transport: composition along concatenated curves.
pub const TRANSPORT_COMPOSE_TOL: f64 = 1e-8;

/// Parallel transport: reversal against the matrix inverse.
pub const TRANSPORT_REVERSE_TOL: f64 = 1e-7;

/// Block shape of transported curvature elements.
pub const HOLONOMY_BLOCK_TOL: f64 = 1e-6;

/// Rank decisions on symbolic-grade inputs.
pub const RANK_TOL_SYMBOLIC: f64 = 1e-8;

/// Rank decisions on transport-sampled inputs.
pub const RANK_TOL_SAMPLED: f64 = 1e-5;

/// RK4 steps per unit coordinate length of a transport segment.
pub const RK4_STEPS_PER_UNIT: usize = 200;

/// Half-width of the coordinate box for sampled holonomy curves.
pub const CURVE_BOX_HALF_WIDTH: f64 = 1.0;
