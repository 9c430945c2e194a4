//! The adapted frame and the induced operators of the lightlike foliation.
//!
//! At every point the tangent space splits as `T_perp + S + Tr`: the
//! parallel lightlike line spanned by `xi = d_0`, the screen bundle spanned
//! by a Gram-Schmidt frame `X_1..X_n` of the coordinate screen directions,
//! and the transversal lightlike line spanned by
//! `N = -f/2 d_0 + d_{n+1}`, the unique lightlike partner with
//! `g(xi, N) = 1` that is orthogonal to the screen.
//!
//! All constructions are deterministic functions of the point (index-ordered
//! Gram-Schmidt, no pivoting), so the frame extends to a smooth local frame
//! field and covariant derivatives of frame-dependent quantities are well
//! defined. `xi` is pinned to `d_0` without renormalization; the connection
//! scalars below are gauge quantities of that choice, the curvature data
//! derived from them are not.

use crate::budgets;
use crate::error::{Error, Result};
use crate::expr::eval_expr;
use crate::geometry::Geometry;
use crate::metric::Point;
use nalgebra::{DMatrix, DVector};

/// Which summand of `T_perp + S + Tr` to project onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramePart {
    Tperp,
    Screen,
    Tr,
}

/// Components of a tangent vector in the adapted frame.
#[derive(Debug, Clone)]
pub struct FrameVector {
    /// Coefficient of `xi`.
    pub u: f64,
    /// Coefficients of `X_1..X_n`.
    pub s: DVector<f64>,
    /// Coefficient of `N`.
    pub v: f64,
}

impl FrameVector {
    pub fn xi(n: usize) -> Self {
        FrameVector {
            u: 1.0,
            s: DVector::zeros(n),
            v: 0.0,
        }
    }

    pub fn screen(n: usize, i: usize) -> Self {
        let mut s = DVector::zeros(n);
        s[i] = 1.0;
        FrameVector { u: 0.0, s, v: 0.0 }
    }

    pub fn transversal(n: usize) -> Self {
        FrameVector {
            u: 0.0,
            s: DVector::zeros(n),
            v: 1.0,
        }
    }
}

/// The adapted basis at a point, with its inverse change of basis.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    point: Point,
    n: usize,
    /// Columns: `xi, X_1..X_n, N` in coordinate components.
    basis: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl AdaptedFrame {
    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi(&self) -> DVector<f64> {
        self.basis.column(0).into_owned()
    }

    pub fn screen_vector(&self, i: usize) -> DVector<f64> {
        self.basis.column(1 + i).into_owned()
    }

    pub fn transversal(&self) -> DVector<f64> {
        self.basis.column(self.n + 1).into_owned()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    /// Coordinate components of the frame vector with the given index
    /// (0 = xi, 1..=n = screen, n+1 = N).
    pub fn basis_vector(&self, idx: usize) -> DVector<f64> {
        self.basis.column(idx).into_owned()
    }

    pub fn to_frame(&self, w: &DVector<f64>) -> FrameVector {
        let x = &self.inv * w;
        FrameVector {
            u: x[0],
            s: x.rows(1, self.n).into_owned(),
            v: x[self.n + 1],
        }
    }

    pub fn from_frame(&self, fv: &FrameVector) -> DVector<f64> {
        let mut x = DVector::zeros(self.n + 2);
        x[0] = fv.u;
        x.rows_mut(1, self.n).copy_from(&fv.s);
        x[self.n + 1] = fv.v;
        &self.basis * x
    }

    /// Coordinate vector of a screen combination `sum c_i X_i`.
    pub fn screen_combination(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.n + 2);
        x.rows_mut(1, self.n).copy_from(c);
        &self.basis * x
    }

    /// Projection onto one summand of the splitting.
    pub fn project(&self, w: &DVector<f64>, part: FramePart) -> DVector<f64> {
        let mut fv = self.to_frame(w);
        match part {
            FramePart::Tperp => {
                fv.s.fill(0.0);
                fv.v = 0.0;
            }
            FramePart::Screen => {
                fv.u = 0.0;
                fv.v = 0.0;
            }
            FramePart::Tr => {
                fv.u = 0.0;
                fv.s.fill(0.0);
            }
        }
        self.from_frame(&fv)
    }
}

/// Build the adapted frame at `p`: `xi = d_0`,
/// `N = -f(p)/2 d_0 + d_{n+1}`, screen frame by index-ordered Gram-Schmidt
/// of `d_1..d_n` under the screen metric.
pub fn build_frame(geom: &Geometry, p: &Point) -> Result<AdaptedFrame> {
    let n = geom.n();
    let dim = geom.dim();
    let g = geom.metric_at(p)?; // includes the degeneracy check
    let screen_g = g.view((1, 1), (n, n)).into_owned();

    // Gram-Schmidt in the n-dimensional screen block.
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for x in &cols {
            let proj = (&screen_g * x).dot(&v);
            v -= proj * x;
        }
        let norm2 = (&screen_g * &v).dot(&v);
        if norm2 <= budgets::SCREEN_EIGENVALUE_MIN {
            return Err(Error::DegenerateScreen {
                point: p.coords.clone(),
                eigenvalue: norm2,
            });
        }
        cols.push(v / norm2.sqrt());
    }

    let fval = eval_expr(geom.spec().f(), p)?;
    let mut basis = DMatrix::zeros(dim, dim);
    basis[(0, 0)] = 1.0; // xi
    for (i, v) in cols.iter().enumerate() {
        basis.view_mut((1, 1 + i), (n, 1)).copy_from(v);
    }
    basis[(0, dim - 1)] = -0.5 * fval; // N
    basis[(dim - 1, dim - 1)] = 1.0;

    let inv = basis.clone().try_inverse().ok_or_else(|| Error::DegenerateScreen {
        point: p.coords.clone(),
        eigenvalue: 0.0,
    })?;

    Ok(AdaptedFrame {
        point: p.clone(),
        n,
        basis,
        inv,
    })
}

/// The canonical transversal section as a field:
/// `N(q) = -f(q)/2 d_0 + d_{n+1}`.
pub fn transversal_field(geom: &Geometry, q: &Point) -> Result<DVector<f64>> {
    let dim = geom.dim();
    let fval = eval_expr(geom.spec().f(), q)?;
    let mut v = DVector::zeros(dim);
    v[0] = -0.5 * fval;
    v[dim - 1] = 1.0;
    Ok(v)
}

/// The `i`-th screen frame vector as a field.
pub fn screen_field(geom: &Geometry, i: usize, q: &Point) -> Result<DVector<f64>> {
    Ok(build_frame(geom, q)?.screen_vector(i))
}

/// Shape operator `A_V w` for `V = v_scale * N` (the canonical transversal
/// field). Defined by `nabla_w V = -A_V w + nabla^t_w V`; the value lies in
/// the screen. A radical component beyond tolerance signals a convention
/// bug or a metric outside the Walker class and is reported as an error.
pub fn shape_operator(
    geom: &Geometry,
    p: &Point,
    w: &DVector<f64>,
    v_scale: f64,
) -> Result<DVector<f64>> {
    let frame = build_frame(geom, p)?;
    let d = geom.covariant_derivative(
        p,
        w,
        |q| transversal_field(geom, q).map(|v| v * v_scale),
        None,
    )?;
    let fv = frame.to_frame(&d);
    let scale = 1.0f64.max(d.amax());
    if fv.u.abs() > budgets::SHAPE_RADICAL_TOL * scale {
        return Err(Error::ShapeRadical {
            residual: fv.u.abs(),
            tol: budgets::SHAPE_RADICAL_TOL * scale,
        });
    }
    Ok(-frame.screen_combination(&fv.s))
}

/// Screen second fundamental form `*h(w, y)` for `y` in the screen at `p`,
/// extended along the Gram-Schmidt screen frame field. Returns the
/// `T_perp`-valued result in coordinates (a multiple of `xi`).
pub fn screen_second_form(
    geom: &Geometry,
    p: &Point,
    w: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    let frame = build_frame(geom, p)?;
    let fv = frame.to_frame(y);
    let scale = 1.0f64.max(y.amax());
    if fv.u.abs() > 1e-9 * scale || fv.v.abs() > 1e-9 * scale {
        return Err(Error::Invalid(format!(
            "screen_second_form: y is not a screen vector (u = {:.3e}, v = {:.3e})",
            fv.u, fv.v
        )));
    }
    let coeffs = fv.s;
    let d = geom.covariant_derivative(
        p,
        w,
        |q| {
            let fq = build_frame(geom, q)?;
            Ok(fq.screen_combination(&coeffs))
        },
        None,
    )?;
    Ok(frame.project(&d, FramePart::Tperp))
}

/// The scalar coefficient of `*h(w, X_j)` on `xi`.
pub fn screen_second_form_coeff(
    geom: &Geometry,
    p: &Point,
    w: &DVector<f64>,
    j: usize,
) -> Result<f64> {
    let frame = build_frame(geom, p)?;
    let d = geom.covariant_derivative(p, w, |q| screen_field(geom, j, q), None)?;
    Ok(frame.to_frame(&d).u)
}

/// Connection scalars of the two line bundles along `w`:
/// `nabla^t_w N = omega_t * N` and `*nabla^t_w xi = omega_perp * xi`.
pub fn connection_scalars(geom: &Geometry, p: &Point, w: &DVector<f64>) -> Result<(f64, f64)> {
    let frame = build_frame(geom, p)?;
    let dn = geom.covariant_derivative(p, w, |q| transversal_field(geom, q), None)?;
    let omega_t = frame.to_frame(&dn).v;

    // xi = d_0 is a constant coordinate field: its derivative is pure
    // Christoffel contraction and stays on the lightlike line.
    let gamma = geom.christoffel_unchecked(p)?;
    let mut e0 = DVector::zeros(geom.dim());
    e0[0] = 1.0;
    let dxi = gamma.contract(w, &e0);
    let omega_perp = frame.to_frame(&dxi).u;
    Ok((omega_t, omega_perp))
}

/// Screen part of `nabla_w X_y` for the `y`-th screen frame field.
pub fn star_nabla(geom: &Geometry, p: &Point, w: &DVector<f64>, y: usize) -> Result<DVector<f64>> {
    let frame = build_frame(geom, p)?;
    let d = geom.covariant_derivative(p, w, |q| screen_field(geom, y, q), None)?;
    Ok(frame.project(&d, FramePart::Screen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::parse_metric_spec;
    use crate::testkit;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn geom(doc: &str) -> Geometry {
        Geometry::new(parse_metric_spec(doc).unwrap())
    }

    fn vec4(a: f64, b: f64, c: f64, d: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c, d])
    }

    #[test]
    fn frame_matches_the_chart_construction() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let fr = build_frame(&g, &pt(&[0.0, 1.0, 2.0, 0.0])).unwrap();
        assert_eq!(fr.xi(), vec4(1.0, 0.0, 0.0, 0.0));
        assert_eq!(fr.transversal(), vec4(-2.5, 0.0, 0.0, 1.0));
        assert_eq!(fr.screen_vector(0), vec4(0.0, 1.0, 0.0, 0.0));
        assert_eq!(fr.screen_vector(1), vec4(0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn flat_frame_and_scaled_screen() {
        let g = geom("n = 2\nf = \"0\"\n");
        let fr = build_frame(&g, &pt(&[0.3, 1.0, -2.0, 4.0])).unwrap();
        assert_eq!(fr.transversal(), vec4(0.0, 0.0, 0.0, 1.0));

        let g = geom("n = 2\nf = \"0\"\ng_1_1 = \"4\"\n");
        let fr = build_frame(&g, &pt(&[0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(fr.screen_vector(0), vec4(0.0, 0.5, 0.0, 0.0));
    }

    #[test]
    fn frame_invariants_on_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let spec = testkit::random_walker(&mut rng, 2, true);
            let g = Geometry::new(spec);
            for _ in 0..4 {
                let p = testkit::random_point(&mut rng, 2, 0.8);
                let fr = build_frame(&g, &p).unwrap();
                let m = g.metric_at(&p).unwrap();
                let gram = fr.basis().transpose() * &m * fr.basis();
                // expected Gram matrix of (xi, X_1..X_n, N)
                let mut expect = nalgebra::DMatrix::zeros(4, 4);
                expect[(0, 3)] = 1.0;
                expect[(3, 0)] = 1.0;
                expect[(1, 1)] = 1.0;
                expect[(2, 2)] = 1.0;
                assert!(
                    (gram - expect).amax() < budgets::FRAME_TOL * 10.0,
                    "gram residual too large"
                );
                // projections sum to the identity
                let w = vec4(0.3, -1.2, 0.7, 2.1);
                let total = fr.project(&w, FramePart::Tperp)
                    + fr.project(&w, FramePart::Screen)
                    + fr.project(&w, FramePart::Tr);
                assert!((total - &w).amax() < 1e-12);
                // round trip through frame components
                let back = fr.from_frame(&fr.to_frame(&w));
                assert!((back - &w).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let fr = build_frame(&g, &pt(&[0.0, 1.0, 2.0, 0.0])).unwrap();
        assert!(fr.project(&fr.xi(), FramePart::Screen).amax() < 1e-14);
        assert!((fr.project(&fr.transversal(), FramePart::Tr) - fr.transversal()).amax() < 1e-14);
        // d_3 = N + (f/2) xi, so its T_perp part is 2.5 d_0
        let d3 = vec4(0.0, 0.0, 0.0, 1.0);
        assert!((fr.project(&d3, FramePart::Tperp) - vec4(2.5, 0.0, 0.0, 0.0)).amax() < 1e-14);
    }

    #[test]
    fn pp_wave_shape_operator() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        // A_N d_1 = 0
        let a = shape_operator(&g, &p, &vec4(0.0, 1.0, 0.0, 0.0), 1.0).unwrap();
        assert!(a.amax() < 1e-9, "{a}");
        // A_N N = df/2 = d_1 + 2 d_2 at this point
        let n = build_frame(&g, &p).unwrap().transversal();
        let a = shape_operator(&g, &p, &n, 1.0).unwrap();
        assert!((a - vec4(0.0, 1.0, 2.0, 0.0)).amax() < 1e-8);
        // flat space: everything vanishes
        let g = geom("n = 2\nf = \"0\"\n");
        let a = shape_operator(&g, &pt(&[0.0, 1.0, 2.0, 0.0]), &vec4(1.0, 2.0, 3.0, 4.0), 1.0)
            .unwrap();
        assert!(a.amax() < 1e-12);
    }

    #[test]
    fn pp_wave_screen_second_form() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        let d1 = vec4(0.0, 1.0, 0.0, 0.0);
        let d2 = vec4(0.0, 0.0, 1.0, 0.0);
        // *h(d_i, d_j) = 0
        assert!(screen_second_form(&g, &p, &d1, &d2).unwrap().amax() < 1e-9);
        assert!(screen_second_form(&g, &p, &d2, &d2).unwrap().amax() < 1e-9);
        // *h(N, d_1) = (df/dx1)/2 * d_0 = 1 * d_0
        let n = build_frame(&g, &p).unwrap().transversal();
        let h = screen_second_form(&g, &p, &n, &d1).unwrap();
        assert!((h - vec4(1.0, 0.0, 0.0, 0.0)).amax() < 1e-8, "*h(N, d1)");
    }

    #[test]
    fn connection_scalars_vanish_for_pp_waves_and_pair_up_in_general() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        for w in [vec4(1.0, 0.0, 0.0, 0.0), vec4(0.0, 1.0, 1.0, 0.0), vec4(0.3, -1.0, 0.4, 2.0)] {
            let (omega_t, omega_perp) = connection_scalars(&g, &p, &w).unwrap();
            assert!(omega_t.abs() < 1e-10);
            assert!(omega_perp.abs() < 1e-10);
        }

        // omega_perp = -omega_t: differentiate g(xi, N) = 1
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let spec = testkit::random_walker(&mut rng, 2, true);
            let g = Geometry::new(spec);
            for _ in 0..4 {
                let p = testkit::random_point(&mut rng, 2, 0.8);
                let w = testkit::random_direction(&mut rng, 4);
                let (omega_t, omega_perp) = connection_scalars(&g, &p, &w).unwrap();
                assert!(
                    (omega_t + omega_perp).abs() <= 1e-8 * (1.0 + omega_t.abs()),
                    "omega_t {omega_t} vs omega_perp {omega_perp}"
                );
            }
        }
    }

    #[test]
    fn star_nabla_vanishes_for_pp_waves() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = pt(&[0.0, 1.0, 2.0, 0.0]);
        let n = build_frame(&g, &p).unwrap().transversal();
        for w in [vec4(0.0, 1.0, 0.0, 0.0), vec4(0.0, 0.0, 1.0, 0.0), n] {
            for y in 0..2 {
                assert!(star_nabla(&g, &p, &w, y).unwrap().amax() < 1e-9);
            }
        }
    }

    #[test]
    fn duality_and_leaf_identities_on_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let spec = testkit::random_walker(&mut rng, 2, true);
            let g = Geometry::new(spec);
            for _ in 0..4 {
                let p = testkit::random_point(&mut rng, 2, 0.8);
                let fr = build_frame(&g, &p).unwrap();
                let m = g.metric_at(&p).unwrap();
                let w = testkit::random_direction(&mut rng, 4);
                let nvec = fr.transversal();

                for j in 0..2 {
                    let y = fr.screen_vector(j);
                    // duality: g(*h(w, y), N) = g(A_N w, y)
                    let h = screen_second_form(&g, &p, &w, &y).unwrap();
                    let a = shape_operator(&g, &p, &w, 1.0).unwrap();
                    let lhs = (&m * &nvec).dot(&h);
                    let rhs = (&m * &y).dot(&a);
                    assert!(
                        (lhs - rhs).abs() <= budgets::DUALITY_TOL * (1.0 + lhs.abs()),
                        "duality: {lhs} vs {rhs}"
                    );
                }

                // leaf restriction: for w, y tangent to the leaf the
                // derivative stays tangent (h = 0), and the screen shape
                // operator of xi vanishes (*A = 0)
                let wt = fr.xi() * 0.7 + fr.screen_vector(0) * 1.3 - fr.screen_vector(1) * 0.4;
                let coeffs = DVector::from_vec(vec![-0.8, 0.5]);
                let d = g
                    .covariant_derivative(
                        &p,
                        &wt,
                        |q| {
                            let fq = build_frame(&g, q)?;
                            Ok(fq.screen_combination(&coeffs) + fq.xi() * 0.9)
                        },
                        None,
                    )
                    .unwrap();
                let tr_part = fr.to_frame(&d).v;
                assert!(tr_part.abs() <= budgets::LEAF_TOL * (1.0 + d.amax()), "h = 0 on leaves");

                let gamma = g.christoffel_unchecked(&p).unwrap();
                let mut e0 = DVector::zeros(4);
                e0[0] = 1.0;
                let dxi = gamma.contract(&wt, &e0);
                let s_part = fr.project(&dxi, FramePart::Screen);
                assert!(s_part.amax() <= budgets::LEAF_TOL * (1.0 + dxi.amax()), "*A = 0 on leaves");

                // screen involutivity criterion links A_N and *h
                let x = fr.screen_vector(0);
                let y = fr.screen_vector(1);
                let ax = shape_operator(&g, &p, &x, 1.0).unwrap();
                let ay = shape_operator(&g, &p, &y, 1.0).unwrap();
                let lhs = (&m * &ax).dot(&y) - (&m * &x).dot(&ay);
                let hxy = screen_second_form(&g, &p, &x, &y).unwrap();
                let hyx = screen_second_form(&g, &p, &y, &x).unwrap();
                let rhs = (&m * (hxy - hyx)).dot(&nvec);
                assert!(
                    (lhs - rhs).abs() <= budgets::DUALITY_TOL * (1.0 + lhs.abs()),
                    "involutivity: {lhs} vs {rhs}"
                );
            }
        }
    }
}
