//! Parallel transport along piecewise-linear curves and holonomy sampling.
//!
//! Transport integrates the matrix equation `M' = -Gamma(gamma') M` with
//! classical RK4 at a fixed step density per unit coordinate length, so
//! results are deterministic. Holonomy elements are curvature endomorphisms
//! at the far end of a sampled curve, conjugated back to the base point by
//! the transport map and expressed in the base frame; since the lightlike
//! line and its perpendicular are parallel, every such element has the
//! stabilizer block shape, which is asserted.
//!
//! Curve sampling is keyed by `(seed, curve index)` through a splitmix
//! stream so curves are reproducible and independent of evaluation order.

use crate::budgets;
use crate::curvature::LorentzBlockElement;
use crate::error::{Error, Result};
use crate::frame::build_frame;
use crate::geometry::Geometry;
use crate::metric::Point;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-linear curve in chart coordinates.
#[derive(Debug, Clone)]
pub struct Curve {
    points: Vec<Point>,
}

impl Curve {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Curve("a curve needs at least two points".into()));
        }
        let dim = points[0].dim();
        for w in points.windows(2) {
            if w[1].dim() != dim {
                return Err(Error::Curve("mixed coordinate arities".into()));
            }
            if w[0].coords == w[1].coords {
                return Err(Error::Curve("consecutive points coincide".into()));
            }
        }
        Ok(Curve { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn start(&self) -> &Point {
        &self.points[0]
    }

    pub fn end(&self) -> &Point {
        self.points.last().expect("nonempty")
    }

    pub fn reversed(&self) -> Curve {
        let mut points = self.points.clone();
        points.reverse();
        Curve { points }
    }

    /// Concatenation `self` then `other`; `other` must start where `self`
    /// ends.
    pub fn concat(&self, other: &Curve) -> Result<Curve> {
        if self.end().coords != other.start().coords {
            return Err(Error::Curve("curves do not join".into()));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points[1..]);
        Curve::new(points)
    }
}

/// Parallel transport `T_start -> T_end` as a coordinate matrix.
#[derive(Debug, Clone)]
pub struct TransportMap {
    pub matrix: DMatrix<f64>,
    pub start: Point,
    pub end: Point,
}

impl TransportMap {
    /// Worst metric-preservation defect over coordinate basis pairs.
    pub fn metric_residual(&self, geom: &Geometry) -> Result<f64> {
        let g0 = geom.metric_at(&self.start)?;
        let g1 = geom.metric_at(&self.end)?;
        let pulled = self.matrix.transpose() * g1 * &self.matrix;
        Ok((pulled - g0).amax())
    }
}

/// Transport the full frame along a curve with the default step density.
pub fn transport_map(geom: &Geometry, curve: &Curve) -> Result<TransportMap> {
    transport_map_with_steps(geom, curve, budgets::RK4_STEPS_PER_UNIT)
}

pub fn transport_map_with_steps(
    geom: &Geometry,
    curve: &Curve,
    steps_per_unit: usize,
) -> Result<TransportMap> {
    let d = geom.dim();
    let mut m = DMatrix::identity(d, d);
    for seg in curve.points().windows(2) {
        let a = &seg[0];
        let b = &seg[1];
        let delta: Vec<f64> = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| y - x)
            .collect();
        let len = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let steps = ((steps_per_unit as f64 * len).ceil() as usize).max(1);
        let h = 1.0 / steps as f64;

        // -Gamma(gamma') as a matrix function of the segment parameter
        let coeff = |t: f64| -> Result<DMatrix<f64>> {
            let q = a.shifted_along(&delta, t);
            let gamma = geom.christoffel_at(&q)?; // checks nondegeneracy
            let mut out = DMatrix::zeros(d, d);
            for k in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for i in 0..d {
                        s += gamma.get(k, i, j) * delta[i];
                    }
                    out[(k, j)] = -s;
                }
            }
            Ok(out)
        };

        let mut a_t = coeff(0.0)?;
        for s in 0..steps {
            let t = s as f64 * h;
            let a_mid = coeff(t + 0.5 * h)?;
            let a_end = coeff(t + h)?;
            let k1 = &a_t * &m;
            let k2 = &a_mid * (&m + (h / 2.0) * &k1);
            let k3 = &a_mid * (&m + (h / 2.0) * &k2);
            let k4 = &a_end * (&m + h * &k3);
            m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            a_t = a_end;
        }
    }
    Ok(TransportMap {
        matrix: m,
        start: curve.start().clone(),
        end: curve.end().clone(),
    })
}

/// Transport a single vector along a curve.
pub fn transport_along(geom: &Geometry, curve: &Curve, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(transport_map(geom, curve)?.matrix * v)
}

/// A holonomy-algebra sample with its provenance.
#[derive(Debug, Clone)]
pub struct SampledElement {
    pub element: LorentzBlockElement,
    /// `None` for the constant curve (curvature at the base point itself).
    pub curve: Option<usize>,
    /// Frame-index pair `(a, b)`, `a < b`, of the curvature slots.
    pub pair: (usize, usize),
}

impl SampledElement {
    pub fn label(&self) -> String {
        match self.curve {
            None => format!("base pair ({}, {})", self.pair.0, self.pair.1),
            Some(c) => format!("curve {} pair ({}, {})", c, self.pair.0, self.pair.1),
        }
    }
}

/// Options for [`sample_holonomy`].
#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub box_half_width: f64,
    pub steps_per_unit: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            box_half_width: budgets::CURVE_BOX_HALF_WIDTH,
            steps_per_unit: budgets::RK4_STEPS_PER_UNIT,
        }
    }
}

fn splitmix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The curve with the given index of the sampling stream: 2 to 5 random
/// segments from the base point inside the coordinate box.
pub fn sampled_curve(
    base: &Point,
    seed: u64,
    index: usize,
    half_width: f64,
) -> Result<Curve> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed, index as u64 + 1));
    let segments = rng.random_range(2..=5usize);
    let mut points = vec![base.clone()];
    for _ in 0..segments {
        let coords: Vec<f64> = base
            .coords
            .iter()
            .map(|c| c + rng.random_range(-half_width..=half_width))
            .collect();
        points.push(Point::new(coords)?);
    }
    Curve::new(points)
}

/// Ambrose-Singer sampling: curvature endomorphisms at sampled endpoints,
/// conjugated back through the transport map and expressed in the base
/// frame. Includes the constant curve. Deterministic in `seed`.
pub fn sample_holonomy(
    geom: &Geometry,
    base: &Point,
    n_curves: usize,
    seed: u64,
    opts: SampleOptions,
) -> Result<Vec<SampledElement>> {
    let base_frame = build_frame(geom, base)?;
    let d = geom.dim();
    let mut out = Vec::new();

    let collect = |curve_idx: Option<usize>,
                       tau: &DMatrix<f64>,
                       tau_inv: &DMatrix<f64>,
                       endpoint: &Point,
                       out: &mut Vec<SampledElement>|
     -> Result<()> {
        let riemann = geom.riemann_at(endpoint)?;
        let transported = tau * base_frame.basis();
        for a in 0..d {
            for b in (a + 1)..d {
                let w1 = transported.column(a).into_owned();
                let w2 = transported.column(b).into_owned();
                let endo_y = riemann.endomorphism(&w1, &w2);
                let pulled = tau_inv * endo_y * tau;
                let e = base_frame.inverse() * pulled * base_frame.basis();
                let tol = budgets::HOLONOMY_BLOCK_TOL * 1.0f64.max(e.amax());
                let element = LorentzBlockElement::from_frame_matrix(&e, tol)?;
                out.push(SampledElement {
                    element,
                    curve: curve_idx,
                    pair: (a, b),
                });
            }
        }
        Ok(())
    };

    let id = DMatrix::identity(d, d);
    collect(None, &id, &id, base, &mut out)?;

    for c in 0..n_curves {
        let curve = sampled_curve(base, seed, c, opts.box_half_width)?;
        let tau = transport_map_with_steps(geom, &curve, opts.steps_per_unit)?;
        let tau_inv = tau
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Curve("transport map is singular".into()))?;
        collect(Some(c), &tau.matrix, &tau_inv, curve.end(), &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::parse_metric_spec;
    use crate::testkit;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn geom(doc: &str) -> Geometry {
        Geometry::new(parse_metric_spec(doc).unwrap())
    }

    #[test]
    fn flat_transport_is_the_identity() {
        let g = geom("n = 2\nf = \"0\"\n");
        let curve = Curve::new(vec![
            pt(&[0.0, 0.0, 0.0, 0.0]),
            pt(&[0.3, -0.5, 0.8, 0.2]),
            pt(&[1.0, 0.5, -0.3, 0.9]),
        ])
        .unwrap();
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let out = transport_along(&g, &curve, &v).unwrap();
        assert!((out - v).amax() < 1e-12);
    }

    #[test]
    fn lightlike_direction_is_parallel_for_pp_waves() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let curve = Curve::new(vec![
            pt(&[0.0, 1.0, 2.0, 0.0]),
            pt(&[0.4, 0.2, 1.0, 0.6]),
            pt(&[-0.2, -0.8, 0.3, 1.1]),
        ])
        .unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let out = transport_along(&g, &curve, &v).unwrap();
        assert!((out - v).amax() < 1e-12);
    }

    #[test]
    fn transport_preserves_the_metric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec = testkit::random_walker(&mut rng, 2, true);
        let g = Geometry::new(spec);
        let curve = Curve::new(vec![
            pt(&[0.0, 0.1, -0.2, 0.0]),
            pt(&[0.3, -0.4, 0.5, 0.4]),
            pt(&[-0.1, 0.6, 0.2, -0.3]),
        ])
        .unwrap();
        let tau = transport_map(&g, &curve).unwrap();
        let resid = tau.metric_residual(&g).unwrap();
        assert!(resid <= budgets::TRANSPORT_METRIC_TOL, "residual {resid}");

        // T_perp and T stay invariant: column 0 is a multiple of e_0 and
        // the first n+1 columns have no d_{n+1} component
        let m = &tau.matrix;
        for k in 1..4 {
            assert!(m[(k, 0)].abs() <= 1e-9, "xi column leaked: {m}");
        }
        for j in 0..3 {
            assert!(m[(3, j)].abs() <= 1e-9, "T column leaked: {m}");
        }
    }

    #[test]
    fn composition_and_reversal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let spec = testkit::random_walker(&mut rng, 2, true);
        let g = Geometry::new(spec);
        let c1 = Curve::new(vec![pt(&[0.0, 0.0, 0.0, 0.0]), pt(&[0.2, 0.3, -0.4, 0.1])]).unwrap();
        let c2 = Curve::new(vec![pt(&[0.2, 0.3, -0.4, 0.1]), pt(&[-0.3, 0.5, 0.2, 0.4])]).unwrap();
        let t1 = transport_map(&g, &c1).unwrap().matrix;
        let t2 = transport_map(&g, &c2).unwrap().matrix;
        let joined = transport_map(&g, &c1.concat(&c2).unwrap()).unwrap().matrix;
        let resid = (&t2 * &t1 - &joined).amax();
        assert!(resid <= budgets::TRANSPORT_COMPOSE_TOL, "composition {resid}");

        let back = transport_map(&g, &c1.reversed()).unwrap().matrix;
        let resid = (&back * &t1 - DMatrix::identity(4, 4)).amax();
        assert!(resid <= budgets::TRANSPORT_REVERSE_TOL, "reversal {resid}");
    }

    #[test]
    fn small_loop_recovers_the_curvature() {
        let g = geom("n = 2\nf = \"x1^2*x3 + x2^2 + x1*x2\"\n");
        let p = pt(&[0.1, 0.4, 0.3, 0.2]);
        let s = 1e-2;
        let (a, b) = (1usize, 3usize);
        let mut q1 = p.clone();
        q1.coords[a] += s;
        let mut q2 = q1.clone();
        q2.coords[b] += s;
        let mut q3 = p.clone();
        q3.coords[b] += s;
        let loop_curve = Curve::new(vec![p.clone(), q1, q2, q3, p.clone()]).unwrap();
        let tau = transport_map(&g, &loop_curve).unwrap().matrix;
        let r = g.riemann_at(&p).unwrap();
        let mut ea = DVector::zeros(4);
        ea[a] = 1.0;
        let mut eb = DVector::zeros(4);
        eb[b] = 1.0;
        let endo = r.endomorphism(&ea, &eb);
        let defect = (tau - DMatrix::identity(4, 4)) / (s * s);
        // leading order: tau = I - s^2 R(e_a, e_b) for this orientation
        let err = (&defect + &endo).amax();
        assert!(
            err <= 0.1 * endo.amax(),
            "loop defect {defect} vs curvature {endo}"
        );
    }

    #[test]
    fn sampled_elements_have_block_shape_and_known_span_for_pp_waves() {
        // f = x1^2: the algebra is the single translation direction e_1;
        // every sample must stay inside it.
        let g = geom("n = 2\nf = \"x1^2\"\n");
        let base = pt(&[0.0, 0.2, -0.1, 0.0]);
        let samples = sample_holonomy(&g, &base, 6, 99, SampleOptions::default()).unwrap();
        assert!(!samples.is_empty());
        let mut seen_nonzero = false;
        for s in &samples {
            assert!(s.element.a.abs() <= 1e-8);
            assert!(s.element.m.amax() <= 1e-8);
            assert!(s.element.x[1].abs() <= 1e-8, "x2 direction leaked");
            if s.element.x[0].abs() > 1e-6 {
                seen_nonzero = true;
            }
        }
        assert!(seen_nonzero, "sampler found no curvature at all");
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let base = pt(&[0.0, 1.0, 2.0, 0.0]);
        let a = sample_holonomy(&g, &base, 4, 7, SampleOptions::default()).unwrap();
        let b = sample_holonomy(&g, &base, 4, 7, SampleOptions::default()).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.element.a, y.element.a);
            assert_eq!(x.element.x, y.element.x);
            assert_eq!(x.element.m, y.element.m);
        }
    }
}
