//! The five-component curvature decomposition, by two independent routes.
//!
//! In the adapted frame `(xi, X_1..X_n, N)` every curvature endomorphism
//! `R(w1, w2)` lies in the stabilizer algebra of the lightlike line,
//!
//! ```text
//!      [ a   x   0   ]
//!      [ 0   m  -x^t ]      a in R, x in R^n (row), m in so(n),
//!      [ 0   0  -a   ]
//! ```
//!
//! and the decomposition collects the frame-pair faces of that matrix into
//! five tensors. The slot conventions are fixed once, here:
//!
//! * `r_h(i, j)` = `m`-block of `R(X_i, X_j)`  (screen-screen face);
//! * `p_map[i]`  = `m`-block of `R(N, X_i)`;
//! * `t_sym[i]`  = `x`-row   of `R(N, X_i)`;
//! * `l_row[i]`  = `a`       of `R(N, X_i)`;
//! * `lambda`    = `a`       of `R(xi, N)`.
//!
//! The adjoint faces (the `x`-row of `R(X_i, X_j)` and of `R(xi, N)`) are
//! not stored; pair symmetry of the lowered curvature determines them as
//! `x_k = s1^t p_map[k] s2` and `-l_row`, which is how [`reconstruct`]
//! rebuilds full endomorphisms and how the completeness check validates
//! them. With these conventions a pp-wave profile has
//! `t_sym = -1/2 Hess f`.
//!
//! [`operator_route`] recomputes the components from the induced operators
//! of the foliation (screen-connection curvature, derivatives of the second
//! fundamental form and of the shape operator, curvature of the transversal
//! line connection) without touching the coordinate curvature tensor, at
//! finite-difference accuracy.

use crate::budgets;
use crate::error::{Error, Result};
use crate::frame::{
    build_frame, connection_scalars, screen_field, shape_operator, star_nabla, transversal_field,
    AdaptedFrame, FramePart, FrameVector,
};
use crate::geometry::{Geometry, RiemannTensor};
use crate::metric::Point;
use nalgebra::{DMatrix, DVector};

/// An element of the stabilizer algebra, stored as the triple `(a, x, m)`.
#[derive(Debug, Clone)]
pub struct LorentzBlockElement {
    n: usize,
    pub a: f64,
    pub x: DVector<f64>,
    pub m: DMatrix<f64>,
}

impl LorentzBlockElement {
    pub fn new(a: f64, x: DVector<f64>, m: DMatrix<f64>) -> Result<Self> {
        let n = x.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::MalformedBasis(format!(
                "x has length {n} but m is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let skew = (&m + m.transpose()).amax();
        if skew > 1e-12 * (1.0 + m.amax()) {
            return Err(Error::MalformedBasis(format!(
                "m is not antisymmetric (residual {skew:.3e})"
            )));
        }
        Ok(LorentzBlockElement { n, a, x, m })
    }

    pub fn zero(n: usize) -> Self {
        LorentzBlockElement {
            n,
            a: 0.0,
            x: DVector::zeros(n),
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The full (n+2) x (n+2) matrix in the adapted frame.
    pub fn embed(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut e = DMatrix::zeros(n + 2, n + 2);
        e[(0, 0)] = self.a;
        e[(n + 1, n + 1)] = -self.a;
        for i in 0..n {
            e[(0, 1 + i)] = self.x[i];
            e[(1 + i, n + 1)] = -self.x[i];
            for j in 0..n {
                e[(1 + i, 1 + j)] = self.m[(i, j)];
            }
        }
        e
    }

    /// Extract the triple from a frame-basis endomorphism matrix, checking
    /// the block form to `tol` (absolute, callers scale it).
    pub fn from_frame_matrix(e: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let d = e.nrows();
        let n = d - 2;
        let mut residual: f64 = 0.0;
        residual = residual.max(e[(0, d - 1)].abs());
        residual = residual.max((e[(d - 1, d - 1)] + e[(0, 0)]).abs());
        for i in 0..n {
            residual = residual.max(e[(1 + i, 0)].abs());
            residual = residual.max(e[(d - 1, 1 + i)].abs());
            residual = residual.max((e[(1 + i, d - 1)] + e[(0, 1 + i)]).abs());
        }
        residual = residual.max(e[(d - 1, 0)].abs());
        let mid = e.view((1, 1), (n, n));
        let skew = (&mid + mid.transpose()).amax() / 2.0;
        residual = residual.max(skew);
        if residual > tol {
            return Err(Error::BlockForm { residual, tol });
        }
        let a = 0.5 * (e[(0, 0)] - e[(d - 1, d - 1)]);
        let x = DVector::from_iterator(
            n,
            (0..n).map(|i| 0.5 * (e[(0, 1 + i)] - e[(1 + i, d - 1)])),
        );
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (mid[(i, j)] - mid[(j, i)]));
        Ok(LorentzBlockElement { n, a, x, m })
    }

    /// Lie bracket in block form:
    /// `[(a1,x1,m1),(a2,x2,m2)] = (0, a1 x2 - a2 x1 + x1 m2 - x2 m1, [m1,m2])`.
    pub fn bracket(&self, other: &Self) -> Self {
        let x = self.x.transpose() * &other.m - other.x.transpose() * &self.m
            + (self.a * other.x.transpose() - other.a * self.x.transpose());
        LorentzBlockElement {
            n: self.n,
            a: 0.0,
            x: x.transpose(),
            m: &self.m * &other.m - &other.m * &self.m,
        }
    }

    /// Frobenius norm of the embedded matrix.
    pub fn norm(&self) -> f64 {
        (2.0 * self.a * self.a + 2.0 * self.x.norm_squared() + self.m.norm_squared()).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        LorentzBlockElement {
            n: self.n,
            a: c * self.a,
            x: &self.x * c,
            m: &self.m * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        LorentzBlockElement {
            n: self.n,
            a: self.a + other.a,
            x: &self.x + &other.x,
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        LorentzBlockElement {
            n: self.n,
            a: self.a - other.a,
            x: &self.x - &other.x,
            m: &self.m - &other.m,
        }
    }
}

/// Frame and curvature tensor cached at one point.
pub struct PointCurvature {
    frame: AdaptedFrame,
    riemann: RiemannTensor,
}

impl PointCurvature {
    pub fn new(geom: &Geometry, p: &Point) -> Result<Self> {
        Ok(PointCurvature {
            frame: build_frame(geom, p)?,
            riemann: geom.riemann_at(p)?,
        })
    }

    pub fn frame(&self) -> &AdaptedFrame {
        &self.frame
    }

    pub fn riemann(&self) -> &RiemannTensor {
        &self.riemann
    }

    /// `R(w1, w2)` expressed in the adapted frame, asserted to have the
    /// stabilizer block form.
    pub fn endomorphism(&self, w1: &FrameVector, w2: &FrameVector) -> Result<LorentzBlockElement> {
        let c1 = self.frame.from_frame(w1);
        let c2 = self.frame.from_frame(w2);
        let m = self.riemann.endomorphism(&c1, &c2);
        let e = self.frame.inverse() * m * self.frame.basis();
        let tol = budgets::BLOCK_ROUTE_TOL * 1.0f64.max(e.amax());
        LorentzBlockElement::from_frame_matrix(&e, tol)
    }
}

/// `R(w1, w2)` at `p` in the adapted frame.
pub fn curvature_endomorphism(
    geom: &Geometry,
    p: &Point,
    w1: &FrameVector,
    w2: &FrameVector,
) -> Result<LorentzBlockElement> {
    PointCurvature::new(geom, p)?.endomorphism(w1, w2)
}

/// The five-component curvature data at a point (block-extraction route).
#[derive(Debug, Clone)]
pub struct CurvatureComponents {
    n: usize,
    /// Upper-triangle pairs (i, j), i < j, in lexicographic order.
    r_h_pairs: Vec<DMatrix<f64>>,
    pub p_map: Vec<DMatrix<f64>>,
    pub t_sym: DMatrix<f64>,
    pub lambda: f64,
    pub l_row: DVector<f64>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl CurvatureComponents {
    pub fn zero(n: usize) -> Self {
        CurvatureComponents {
            n,
            r_h_pairs: vec![DMatrix::zeros(n, n); n * (n - 1) / 2],
            p_map: vec![DMatrix::zeros(n, n); n],
            t_sym: DMatrix::zeros(n, n),
            lambda: 0.0,
            l_row: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `r_h` on the screen pair `(i, j)`, extended antisymmetrically.
    pub fn r_h(&self, i: usize, j: usize) -> DMatrix<f64> {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.r_h_pairs[pair_index(self.n, i, j)].clone(),
            Ordering::Greater => -self.r_h_pairs[pair_index(self.n, j, i)].clone(),
            Ordering::Equal => DMatrix::zeros(self.n, self.n),
        }
    }

    pub fn r_h_norm(&self) -> f64 {
        self.r_h_pairs.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    pub fn p_norm(&self) -> f64 {
        self.p_map.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    pub fn t_norm(&self) -> f64 {
        self.t_sym.amax()
    }

    pub fn l_norm(&self) -> f64 {
        self.l_row.amax()
    }

    /// Symmetry defect of `T` (should vanish: `T^* = T`).
    pub fn t_symmetry_residual(&self) -> f64 {
        (&self.t_sym - self.t_sym.transpose()).amax() / 2.0
    }

    /// First-Bianchi defect of `r_h` on screen triples.
    pub fn r_h_bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let cyc = self.r_h(i, j)[(l, k)]
                            + self.r_h(j, k)[(l, i)]
                            + self.r_h(k, i)[(l, j)];
                        worst = worst.max(cyc.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Extract the five components at `p` by block extraction on frame pairs.
pub fn decompose_block(geom: &Geometry, p: &Point) -> Result<CurvatureComponents> {
    let pc = PointCurvature::new(geom, p)?;
    decompose_point(&pc)
}

pub fn decompose_point(pc: &PointCurvature) -> Result<CurvatureComponents> {
    let n = pc.frame.n();
    let mut out = CurvatureComponents::zero(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let e = pc.endomorphism(&FrameVector::screen(n, i), &FrameVector::screen(n, j))?;
            out.r_h_pairs[pair_index(n, i, j)] = e.m;
        }
    }
    for i in 0..n {
        let e = pc.endomorphism(&FrameVector::transversal(n), &FrameVector::screen(n, i))?;
        out.p_map[i] = e.m;
        out.t_sym.row_mut(i).copy_from(&e.x.transpose());
        out.l_row[i] = e.a;
    }
    let e = pc.endomorphism(&FrameVector::xi(n), &FrameVector::transversal(n))?;
    out.lambda = e.a;
    Ok(out)
}

/// Evaluate the five-component data on a frame pair, by bilinearity over
/// the component table. The adjoint faces come from pair symmetry as
/// documented in the module header.
pub fn reconstruct(
    c: &CurvatureComponents,
    w1: &FrameVector,
    w2: &FrameVector,
) -> LorentzBlockElement {
    let n = c.n;
    let uv = w1.u * w2.v - w2.u * w1.v;
    let mut out = LorentzBlockElement::zero(n);

    out.a = c.lambda * uv;
    for i in 0..n {
        // activation of the (N, X_i) faces
        let q = w1.v * w2.s[i] - w2.v * w1.s[i];
        if q != 0.0 {
            out.a += q * c.l_row[i];
            out.m += q * &c.p_map[i];
            for k in 0..n {
                out.x[k] += q * c.t_sym[(i, k)];
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let q = w1.s[i] * w2.s[j] - w1.s[j] * w2.s[i];
            if q != 0.0 {
                out.m += q * &c.r_h_pairs[pair_index(n, i, j)];
            }
        }
    }
    // adjoint faces: x-row of the screen-screen and (xi, N) endomorphisms
    for k in 0..n {
        out.x[k] += (c.p_map[k].transpose() * &w1.s).dot(&w2.s);
        out.x[k] -= uv * c.l_row[k];
    }
    out
}

// ---------------------------------------------------------------------------
// Operator route
// ---------------------------------------------------------------------------

/// Components recomputed from the induced foliation operators, plus the
/// screen-pair face of the second component which the block route derives
/// from pair symmetry instead.
#[derive(Debug, Clone)]
pub struct OperatorRoute {
    pub n: usize,
    /// Screen-connection curvature on screen pairs (i < j, lexicographic).
    pub r_h_pairs: Vec<DMatrix<f64>>,
    /// Screen-connection curvature on (N, X_i).
    pub p_map: Vec<DMatrix<f64>>,
    /// From the derivative formulas for the mixed face.
    pub t_sym: DMatrix<f64>,
    /// From the transversal-line connection curvature.
    pub lambda: f64,
    pub l_row: DVector<f64>,
    /// The same data via the shape-operator derivative identity.
    pub l_row_shape: DVector<f64>,
    /// Screen-pair face of the second component (i < j, lexicographic).
    pub pstar_pairs: Vec<DVector<f64>>,
}

impl OperatorRoute {
    /// Worst deviation from a block-route decomposition at the same point.
    pub fn residual_against(&self, c: &CurvatureComponents) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for (ours, theirs) in self.r_h_pairs.iter().zip(&c.r_h_pairs) {
            worst = worst.max((ours - theirs).amax());
        }
        for (ours, theirs) in self.p_map.iter().zip(&c.p_map) {
            worst = worst.max((ours - theirs).amax());
        }
        worst = worst.max((&self.t_sym - &c.t_sym).amax());
        worst = worst.max((self.lambda - c.lambda).abs());
        worst = worst.max((&self.l_row - &c.l_row).amax());
        worst = worst.max((&self.l_row_shape - &c.l_row).amax());
        for i in 0..n {
            for j in (i + 1)..n {
                let idx = pair_index(n, i, j);
                for k in 0..n {
                    // pair-symmetry face: x_k of R(X_i, X_j) = (p_map[k])_ij
                    worst = worst.max((self.pstar_pairs[idx][k] - c.p_map[k][(i, j)]).abs());
                }
            }
        }
        worst
    }
}

/// Curvature scalar of the transversal line connection on `(w1, w2)`:
/// the connection form of `*nabla^t` in the `xi` gauge is
/// `w -> Gamma^0_{w 0}`, and the curvature of a line connection is the
/// exterior derivative of its connection form, finite-differenced here.
pub fn star_rt_at(geom: &Geometry, p: &Point, w1: &FrameVector, w2: &FrameVector) -> Result<f64> {
    let frame = build_frame(geom, p)?;
    star_rt_with_frame(geom, p, &frame, w1, w2)
}

fn star_rt_with_frame(
    geom: &Geometry,
    p: &Point,
    frame: &AdaptedFrame,
    w1: &FrameVector,
    w2: &FrameVector,
) -> Result<f64> {
    let d = geom.dim();
    let c1 = frame.from_frame(w1);
    let c2 = frame.from_frame(w2);
    // omega_b(q) = Gamma^0_{b 0}(q); the connection form is exact, so the
    // plain first-difference step applies.
    let omega = |q: &Point, b: usize| -> Result<f64> {
        let gamma = geom.christoffel_unchecked(q)?;
        Ok(gamma.get(0, b, 0))
    };
    let mut mu = 0.0;
    for a in 0..d {
        for b in (a + 1)..d {
            let w = c1[a] * c2[b] - c1[b] * c2[a];
            if w == 0.0 {
                continue;
            }
            let mut ea = DVector::zeros(d);
            ea[a] = 1.0;
            let mut eb = DVector::zeros(d);
            eb[b] = 1.0;
            let d_ab = geom.directional_derivative(p, &ea, |q| omega(q, b), None)?
                - geom.directional_derivative(p, &eb, |q| omega(q, a), None)?;
            mu += w * d_ab;
        }
    }
    Ok(mu)
}

/// The derivative identity for the boost-translation face:
/// `R_5(xi, N) N = (nabla_N A)_N xi - (nabla_xi A)_N N`, returned as screen
/// coefficients; for a Walker metric this reproduces `l_row`.
pub fn shape_derivative_row(geom: &Geometry, p: &Point) -> Result<DVector<f64>> {
    let d = geom.dim();
    let frame = build_frame(geom, p)?;
    let outer = Some(budgets::FD_OUTER_STEP);
    let nvec = frame.transversal();
    let xivec = frame.xi();
    let (omega_t_xi, _) = connection_scalars(geom, p, &xivec)?;
    let (omega_t_n, omega_perp_n) = connection_scalars(geom, p, &nvec)?;

    let a_n_xi_field = |q: &Point| -> Result<DVector<f64>> {
        let fq = build_frame(geom, q)?;
        let mut e0 = DVector::zeros(d);
        e0[0] = 1.0;
        let v = shape_operator(geom, q, &e0, 1.0)?;
        // store as screen coefficients to keep the field S-valued exactly
        Ok(fq.screen_combination(&fq.to_frame(&v).s))
    };
    let a_n_n_field = |q: &Point| -> Result<DVector<f64>> {
        let fq = build_frame(geom, q)?;
        let w = transversal_field(geom, q)?;
        let v = shape_operator(geom, q, &w, 1.0)?;
        Ok(fq.screen_combination(&fq.to_frame(&v).s))
    };
    let a_n_xi_p = shape_operator(geom, p, &xivec, 1.0)?;
    let a_n_n_p = shape_operator(geom, p, &nvec, 1.0)?;

    let dn = geom.covariant_derivative(p, &nvec, a_n_xi_field, outer)?;
    let term1 = frame.to_frame(&frame.project(&dn, FramePart::Screen)).s
        - frame.to_frame(&a_n_xi_p).s * (omega_t_n + omega_perp_n);
    let dxi = geom.covariant_derivative(p, &xivec, a_n_n_field, outer)?;
    let term2 = frame.to_frame(&frame.project(&dxi, FramePart::Screen)).s
        - frame.to_frame(&a_n_n_p).s * (2.0 * omega_t_xi);
    Ok(term1 - term2)
}

/// Screen-connection coefficient matrix along the coordinate direction `a`:
/// `[c_a]_{kj}` is the `X_k`-coefficient of the screen part of
/// `nabla_{d_a} X_j`.
fn screen_connection(geom: &Geometry, q: &Point, a: usize) -> Result<DMatrix<f64>> {
    let n = geom.n();
    let d = geom.dim();
    let frame = build_frame(geom, q)?;
    let h = geom.fd_step * (1.0 + q.inf_norm());
    let fp = build_frame(geom, &q.shifted(a, h))?;
    let fm = build_frame(geom, &q.shifted(a, -h))?;
    let gamma = geom.christoffel_unchecked(q)?;
    let mut ea = DVector::zeros(d);
    ea[a] = 1.0;
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let dx = (fp.screen_vector(j) - fm.screen_vector(j)) / (2.0 * h);
        let cov = dx + gamma.contract(&ea, &frame.screen_vector(j));
        out.column_mut(j).copy_from(&frame.to_frame(&cov).s);
    }
    Ok(out)
}

/// Recompute the five components at `p` from the foliation operators.
pub fn operator_route(geom: &Geometry, p: &Point) -> Result<OperatorRoute> {
    let n = geom.n();
    let d = geom.dim();
    let frame = build_frame(geom, p)?;
    let outer = Some(budgets::FD_OUTER_STEP);

    // --- screen-connection curvature F_ab in the coordinate gauge ---
    let mut f_ab = vec![vec![DMatrix::zeros(n, n); d]; d];
    let h_outer = budgets::FD_OUTER_STEP * (1.0 + p.inf_norm());
    let conn: Vec<DMatrix<f64>> = (0..d)
        .map(|a| screen_connection(geom, p, a))
        .collect::<Result<_>>()?;
    for a in 0..d {
        for b in (a + 1)..d {
            let cb_p = screen_connection(geom, &p.shifted(a, h_outer), b)?;
            let cb_m = screen_connection(geom, &p.shifted(a, -h_outer), b)?;
            let ca_p = screen_connection(geom, &p.shifted(b, h_outer), a)?;
            let ca_m = screen_connection(geom, &p.shifted(b, -h_outer), a)?;
            let dcb = (cb_p - cb_m) / (2.0 * h_outer);
            let dca = (ca_p - ca_m) / (2.0 * h_outer);
            let f = dcb - dca + (&conn[a] * &conn[b] - &conn[b] * &conn[a]);
            f_ab[b][a] = -&f;
            f_ab[a][b] = f;
        }
    }
    let star_r = |v1: &DVector<f64>, v2: &DVector<f64>| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for a in 0..d {
            if v1[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                let w = v1[a] * v2[b];
                if w != 0.0 {
                    m += w * &f_ab[a][b];
                }
            }
        }
        m
    };

    let nvec = frame.transversal();
    let xivec = frame.xi();
    let screen_vecs: Vec<DVector<f64>> = (0..n).map(|i| frame.screen_vector(i)).collect();

    let mut r_h_pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            r_h_pairs.push(star_r(&screen_vecs[i], &screen_vecs[j]));
        }
    }
    let p_map: Vec<DMatrix<f64>> = (0..n).map(|i| star_r(&nvec, &screen_vecs[i])).collect();

    // --- pointwise scalar fields of the second-form coefficients ---
    // sigma(w, k)(q): xi-coefficient of *h(w(q), X_k)(q)
    let h_screen = |q: &Point, i: usize, k: usize| -> Result<f64> {
        let fq = build_frame(geom, q)?;
        let w = fq.screen_vector(i);
        let dv = geom.covariant_derivative(q, &w, |r| screen_field(geom, k, r), None)?;
        Ok(fq.to_frame(&dv).u)
    };
    let h_trans = |q: &Point, k: usize| -> Result<f64> {
        let fq = build_frame(geom, q)?;
        let w = transversal_field(geom, q)?;
        let dv = geom.covariant_derivative(q, &w, |r| screen_field(geom, k, r), None)?;
        Ok(fq.to_frame(&dv).u)
    };
    // *h with an arbitrary first slot, at p itself
    let h_at_p = |w: &DVector<f64>, k: usize| -> Result<f64> {
        let dv = geom.covariant_derivative(p, w, |r| screen_field(geom, k, r), None)?;
        Ok(frame.to_frame(&dv).u)
    };

    let sigma_ss = {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                m[(i, k)] = h_screen(p, i, k)?;
            }
        }
        m
    };
    let sigma_n: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|k| h_trans(p, k)).collect::<Result<Vec<_>>>()?,
    );
    let h_xi: DVector<f64> = DVector::from_iterator(
        n,
        (0..n)
            .map(|k| h_at_p(&xivec, k))
            .collect::<Result<Vec<_>>>()?,
    );

    // connection scalars and screen derivatives of the frame at p
    let omega: Vec<(f64, f64)> = {
        let mut v = Vec::with_capacity(n + 2);
        v.push(connection_scalars(geom, p, &xivec)?);
        for sv in &screen_vecs {
            v.push(connection_scalars(geom, p, sv)?);
        }
        v.push(connection_scalars(geom, p, &nvec)?);
        v
    };
    let omega_perp_screen = |i: usize| omega[1 + i].1;
    let omega_t_screen = |i: usize| omega[1 + i].0;
    let omega_perp_n = omega[n + 1].1;

    // *nabla coefficients of the screen frame along screen and N directions
    let mut sn_screen = vec![vec![DVector::zeros(n); n]; n]; // [i][j]
    for i in 0..n {
        for j in 0..n {
            let v = star_nabla(geom, p, &screen_vecs[i], j)?;
            sn_screen[i][j] = frame.to_frame(&v).s;
        }
    }
    let mut sn_n = vec![DVector::zeros(n); n];
    for (j, slot) in sn_n.iter_mut().enumerate() {
        let v = star_nabla(geom, p, &nvec, j)?;
        *slot = frame.to_frame(&v).s;
    }

    // --- screen-pair face of the second component, formula (star-nabla h) ---
    // (*nabla_{X_i} *h)(X_j, X_k) = X_i(sigma_jk) + sigma_jk omega_perp(X_i)
    //   - sum_m (*nabla_{X_i} X_j)^m sigma_mk - sum_m (*nabla_{X_i} X_k)^m sigma_jm
    let star_nabla_h_ss = |i: usize, j: usize, k: usize| -> Result<f64> {
        let dir = screen_vecs[i].clone();
        let deriv =
            geom.directional_derivative(p, &dir, |q| h_screen(q, j, k), outer)?;
        let mut v = deriv + sigma_ss[(j, k)] * omega_perp_screen(i);
        for m in 0..n {
            v -= sn_screen[i][j][m] * sigma_ss[(m, k)];
            v -= sn_screen[i][k][m] * sigma_ss[(j, m)];
        }
        Ok(v)
    };
    let mut pstar_pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut row = DVector::zeros(n);
            for k in 0..n {
                let lead = star_nabla_h_ss(i, j, k)? - star_nabla_h_ss(j, i, k)?;
                let torsion = (sigma_ss[(i, j)] - sigma_ss[(j, i)]) * h_xi[k];
                row[k] = lead - torsion;
            }
            pstar_pairs.push(row);
        }
    }

    // --- mixed face via the derivative formulas ---
    // (nabla_{X_i} *h)(N, X_j) = X_i(sigma_Nj) + sigma_Nj omega_perp(X_i)
    //   - omega_t(X_i) sigma_Nj - sum_m (*nabla_{X_i} X_j)^m sigma_Nm
    // (*nabla_N *h)(X_i, X_j) = N(sigma_ij) + sigma_ij omega_perp(N)
    //   - sum_m (*nabla_N X_i)^m sigma_mj - sum_m (*nabla_N X_j)^m sigma_im
    // R_3(X_i, N) X_j = (nabla_{X_i} *h)(N, X_j) - (*nabla_N *h)(X_i, X_j)
    //   + *h(A_N X_i, X_j) + sigma_Ni h(xi, X_j)
    // and t_sym picks the (N, X_i) slot order, so t_sym = -R_3(X_i, N)X_j.
    let mut t_sym = DMatrix::zeros(n, n);
    for i in 0..n {
        let a_n_xi_vec = shape_operator(geom, p, &screen_vecs[i], 1.0)?;
        for j in 0..n {
            let deriv_x = geom.directional_derivative(
                p,
                &screen_vecs[i],
                |q| h_trans(q, j),
                outer,
            )?;
            let nabla_x_h = deriv_x + sigma_n[j] * omega_perp_screen(i)
                - omega_t_screen(i) * sigma_n[j]
                - (0..n).map(|m| sn_screen[i][j][m] * sigma_n[m]).sum::<f64>();

            let deriv_n =
                geom.directional_derivative(p, &nvec, |q| h_screen(q, i, j), outer)?;
            let nabla_n_h = deriv_n + sigma_ss[(i, j)] * omega_perp_n
                - (0..n).map(|m| sn_n[i][m] * sigma_ss[(m, j)]).sum::<f64>()
                - (0..n).map(|m| sn_n[j][m] * sigma_ss[(i, m)]).sum::<f64>();

            let shape_term = h_at_p(&a_n_xi_vec, j)?;
            let second_form_term = sigma_n[i] * h_xi[j];

            t_sym[(i, j)] = -(nabla_x_h - nabla_n_h + shape_term + second_form_term);
        }
    }

    // --- boost and translation faces from the line-connection curvature ---
    let lambda = star_rt_with_frame(geom, p, &frame, &FrameVector::xi(n), &FrameVector::transversal(n))?;
    let mut l_row = DVector::zeros(n);
    for i in 0..n {
        l_row[i] = star_rt_with_frame(
            geom,
            p,
            &frame,
            &FrameVector::transversal(n),
            &FrameVector::screen(n, i),
        )?;
    }

    // --- translation face via the shape-operator identity ---
    let l_row_shape = shape_derivative_row(geom, p)?;

    Ok(OperatorRoute {
        n,
        r_h_pairs,
        p_map,
        t_sym,
        lambda,
        l_row,
        l_row_shape,
        pstar_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::parse_metric_spec;
    use crate::testkit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn geom(doc: &str) -> Geometry {
        Geometry::new(parse_metric_spec(doc).unwrap())
    }

    #[test]
    fn flat_endomorphisms_vanish() {
        let g = geom("n = 2\nf = \"0\"\n");
        let p = pt(&[0.1, 0.4, -0.2, 0.9]);
        let e = curvature_endomorphism(
            &g,
            &p,
            &FrameVector::screen(2, 0),
            &FrameVector::transversal(2),
        )
        .unwrap();
        assert_eq!(e.norm(), 0.0);
        let c = decompose_block(&g, &p).unwrap();
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.t_norm(), 0.0);
    }

    #[test]
    fn pp_wave_block_faces() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        // screen pairs carry no curvature
        let e = curvature_endomorphism(&g, &p, &FrameVector::screen(2, 0), &FrameVector::screen(2, 1))
            .unwrap();
        assert!(e.norm() < 1e-14);
        // (X_1, N) has a pure translation row of magnitude 1 at slot 1
        let e = curvature_endomorphism(
            &g,
            &p,
            &FrameVector::screen(2, 0),
            &FrameVector::transversal(2),
        )
        .unwrap();
        assert!(e.a.abs() < 1e-14);
        assert!(e.m.amax() < 1e-14);
        assert!((e.x[0].abs() - 1.0).abs() < 1e-12);
        assert!(e.x[1].abs() < 1e-14);

        let c = decompose_block(&g, &p).unwrap();
        assert_eq!(c.lambda, 0.0);
        assert!(c.l_norm() < 1e-14);
        assert!(c.p_norm() < 1e-14);
        assert!(c.r_h_norm() < 1e-14);
        // t_sym = -Hess f / 2 = -I under the documented conventions
        assert!((&c.t_sym + DMatrix::identity(2, 2)).amax() < 1e-12, "{}", c.t_sym);
    }

    #[test]
    fn x0_profile_produces_boost_and_l_faces() {
        let g = geom("n = 2\nf = \"x0^2 + 2*x0*x1\"\n");
        let p = pt(&[0.3, 0.7, -0.4, 0.2]);
        let c = decompose_block(&g, &p).unwrap();
        // lambda = f_00 / 2 = 1, l_row = (-f_01/2, -f_02/2) = (-1, 0)
        assert!((c.lambda - 1.0).abs() < 1e-12, "lambda {}", c.lambda);
        assert!((c.l_row[0] + 1.0).abs() < 1e-12, "l {}", c.l_row);
        assert!(c.l_row[1].abs() < 1e-12);
    }

    #[test]
    fn reconstruct_zero_is_zero() {
        let c = CurvatureComponents::zero(3);
        let e = reconstruct(&c, &FrameVector::screen(3, 0), &FrameVector::transversal(3));
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn reconstruction_matches_endomorphisms_on_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for round in 0..5 {
            let spec = testkit::random_walker(&mut rng, 2, true);
            let g = Geometry::new(spec);
            for _ in 0..3 {
                let p = testkit::random_point(&mut rng, 2, 0.8);
                let pc = PointCurvature::new(&g, &p).unwrap();
                let c = decompose_point(&pc).unwrap();
                let scale = 1.0f64;
                // all ordered frame pairs, including mixed random vectors
                let mut vecs = vec![FrameVector::xi(2), FrameVector::transversal(2)];
                for i in 0..2 {
                    vecs.push(FrameVector::screen(2, i));
                }
                vecs.push(FrameVector {
                    u: 0.3,
                    s: nalgebra::DVector::from_vec(vec![-0.7, 1.1]),
                    v: 0.5,
                });
                vecs.push(FrameVector {
                    u: -1.2,
                    s: nalgebra::DVector::from_vec(vec![0.4, 0.9]),
                    v: -0.8,
                });
                for w1 in &vecs {
                    for w2 in &vecs {
                        let direct = pc.endomorphism(w1, w2).unwrap();
                        let rebuilt = reconstruct(&c, w1, w2);
                        let diff = direct.sub(&rebuilt).norm();
                        assert!(
                            diff <= budgets::BLOCK_ROUTE_TOL * scale.max(direct.norm()),
                            "round {round}: completeness residual {diff}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn bracket_matches_embedded_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 3;
            let mk = |rng: &mut ChaCha8Rng| {
                let a = rng.random_range(-1.0..1.0);
                let x = testkit::random_direction(rng, n);
                let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let m = (&q - q.transpose()) / 2.0;
                LorentzBlockElement::new(a, x, m).unwrap()
            };
            let e1 = mk(&mut rng);
            let e2 = mk(&mut rng);
            let lhs = e1.bracket(&e2).embed();
            let rhs = e1.embed() * e2.embed() - e2.embed() * e1.embed();
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn star_rt_vanishes_on_screen_pairs_and_for_pp_waves() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        let vs = [
            FrameVector::xi(2),
            FrameVector::screen(2, 0),
            FrameVector::screen(2, 1),
            FrameVector::transversal(2),
        ];
        for w1 in &vs {
            for w2 in &vs {
                let mu = star_rt_at(&g, &p, w1, w2).unwrap();
                assert!(mu.abs() < 1e-9, "pp-wave *R^t should vanish, got {mu}");
            }
        }

        // screen pairs vanish for arbitrary specs
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let spec = testkit::random_walker(&mut rng, 2, true);
        let g = Geometry::new(spec);
        let p = testkit::random_point(&mut rng, 2, 0.7);
        let mu = star_rt_at(&g, &p, &FrameVector::screen(2, 0), &FrameVector::screen(2, 1)).unwrap();
        assert!(mu.abs() < budgets::RST_SCREEN_TOL, "screen pair: {mu}");
    }

    #[test]
    fn star_rt_cross_checks_the_block_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..3 {
            let spec = testkit::random_walker(&mut rng, 2, true);
            let g = Geometry::new(spec);
            let p = testkit::random_point(&mut rng, 2, 0.7);
            let c = decompose_block(&g, &p).unwrap();
            let lam = star_rt_at(&g, &p, &FrameVector::xi(2), &FrameVector::transversal(2)).unwrap();
            assert!(
                (lam - c.lambda).abs() <= budgets::RST_CROSS_TOL * (1.0 + c.lambda.abs()),
                "lambda {lam} vs {}",
                c.lambda
            );
            for i in 0..2 {
                let mu = star_rt_at(
                    &g,
                    &p,
                    &FrameVector::transversal(2),
                    &FrameVector::screen(2, i),
                )
                .unwrap();
                assert!(
                    (mu - c.l_row[i]).abs() <= budgets::RST_CROSS_TOL * (1.0 + c.l_row[i].abs()),
                    "l[{i}]: {mu} vs {}",
                    c.l_row[i]
                );
            }
        }
    }

    #[test]
    fn operator_route_agrees_with_block_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for round in 0..3 {
            let spec = testkit::random_walker(&mut rng, 2, true);
            let g = Geometry::new(spec);
            let p = testkit::random_point(&mut rng, 2, 0.7);
            let block = decompose_block(&g, &p).unwrap();
            let op = operator_route(&g, &p).unwrap();
            let resid = op.residual_against(&block);
            let scale = 1.0f64
                .max(block.t_norm())
                .max(block.p_norm())
                .max(block.r_h_norm());
            assert!(
                resid <= budgets::OPERATOR_ROUTE_TOL * scale,
                "round {round}: route residual {resid}"
            );
        }
    }

    #[test]
    fn operator_route_on_the_pp_wave() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        let op = operator_route(&g, &p).unwrap();
        // R_2 = 0 since *h vanishes on screen pairs; t matches the block route
        for pair in &op.pstar_pairs {
            assert!(pair.amax() < 1e-7);
        }
        for m in &op.p_map {
            assert!(m.amax() < 1e-7);
        }
        let block = decompose_block(&g, &p).unwrap();
        assert!((&op.t_sym - &block.t_sym).amax() < 1e-6, "{} vs {}", op.t_sym, block.t_sym);
        assert!(op.lambda.abs() < 1e-9);
    }
}
