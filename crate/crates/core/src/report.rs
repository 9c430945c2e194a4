//! The analysis pipeline and its machine-readable reports.
//!
//! [`analyze`] runs parse -> decompose -> holonomy sampling -> classify ->
//! criteria checks and assembles an [`AnalysisReport`]; [`verify`] runs the
//! named invariant suites against their budgets; [`decompose_report`]
//! exposes the five components at one point. Reports serialize to JSON with
//! a fixed field order, so identical inputs (spec, flags, seed) produce
//! byte-identical output.

use crate::algebra::lie_closure;
use crate::budgets;
use crate::classify::{check_prop1, check_prop2, check_prop3, classify, CriterionReport};
use crate::curvature::{
    decompose_point, operator_route, reconstruct, star_rt_at, PointCurvature,
};
use crate::error::Result;
use crate::frame::{build_frame, screen_second_form, shape_operator, FramePart, FrameVector};
use crate::geometry::Geometry;
use crate::metric::{MetricSpec, Point};
use crate::transport::{sample_holonomy, transport_map, Curve, SampleOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: &str = "1";

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Knobs of the analysis pipeline; all defaults are deterministic.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub point: Option<Point>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub curves: usize,
    pub sample: SampleOptions,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            point: None,
            samples: 5,
            seed: 7,
            tol: budgets::RANK_TOL_SAMPLED,
            curves: 64,
            sample: SampleOptions::default(),
        }
    }
}

/// The base point used when none is given: origin shifted to
/// `(0, 1, .., 1, 0)` to stay clear of symmetric-point degeneracies.
pub fn default_point(n: usize) -> Point {
    let mut coords = vec![1.0; n + 2];
    coords[0] = 0.0;
    coords[n + 1] = 0.0;
    Point::new(coords).expect("finite default point")
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecEcho {
    pub n: usize,
    pub f: String,
    pub g: Vec<Vec<String>>,
}

impl SpecEcho {
    fn new(spec: &MetricSpec) -> Self {
        let n = spec.n();
        SpecEcho {
            n,
            f: format!("{}", spec.f()),
            g: (0..n)
                .map(|i| (0..n).map(|j| format!("{}", spec.g(i, j))).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSummary {
    pub point: Vec<f64>,
    pub lambda: f64,
    pub l_row: Vec<f64>,
    pub t_sym: Vec<Vec<f64>>,
    pub r_h_norm: f64,
    pub p_norm: f64,
    pub t_norm: f64,
    pub l_norm: f64,
    pub completeness_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomySummary {
    #[serde(rename = "type")]
    pub holonomy_type: Option<u8>,
    pub reason: Option<String>,
    pub orthogonal_part_dim: usize,
    pub h_basis: Vec<Vec<Vec<f64>>>,
    pub h_prime_dim: usize,
    pub center_dim: usize,
    pub phi: Option<Vec<f64>>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub psi: Option<Vec<Vec<f64>>>,
    pub weak_irreducibility: bool,
    pub residuals: BTreeMap<String, f64>,
    pub algebra_dim: usize,
    pub sampled_elements: usize,
    pub generation_log: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub name: String,
    pub residual: f64,
    pub budget: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub tol: f64,
    pub curves: usize,
    pub samples: usize,
    pub fd_step: f64,
    pub rk4_steps_per_unit: usize,
    pub curve_box_half_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub spec: SpecEcho,
    pub points: Vec<Vec<f64>>,
    pub components: Vec<ComponentSummary>,
    pub holonomy: HolonomySummary,
    pub propositions: BTreeMap<String, CriterionReport>,
    pub verification: Vec<ResidualRow>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    pub fn exit_code(&self) -> i32 {
        if self.holonomy.holonomy_type.is_some() {
            0
        } else {
            2
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let h = &self.holonomy;
        out.push_str(&format!(
            "holonomy type: {}\n",
            h.holonomy_type
                .map(|t| t.to_string())
                .unwrap_or_else(|| format!(
                    "indeterminate ({})",
                    h.reason.as_deref().unwrap_or("no reason recorded")
                ))
        ));
        out.push_str(&format!(
            "orthogonal part: dim {} (derived {}, center {})\n",
            h.orthogonal_part_dim, h.h_prime_dim, h.center_dim
        ));
        out.push_str(&format!(
            "algebra dim {} from {} sampled elements; weak irreducibility: {}\n",
            h.algebra_dim, h.sampled_elements, h.weak_irreducibility
        ));
        for (name, prop) in &self.propositions {
            out.push_str(&format!(
                "{name}: {} ({})\n",
                if prop.verdict { "holds" } else { "fails" },
                prop.name
            ));
        }
        out.push_str("components at sampled points (|R1|, |P|, |T|, lambda, |L|):\n");
        for c in &self.components {
            out.push_str(&format!(
                "  {:?}: {:.3e} {:.3e} {:.3e} {:.3e} {:.3e}\n",
                c.point, c.r_h_norm, c.p_norm, c.t_norm, c.lambda, c.l_norm
            ));
        }
        out.push_str("verification:\n");
        for row in &self.verification {
            out.push_str(&format!(
                "  {} {}: {:.3e} (budget {:.1e})\n",
                if row.pass { "pass" } else { "FAIL" },
                row.name,
                row.residual,
                row.budget
            ));
        }
        out
    }
}

fn provenance(opts: &AnalyzeOptions) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.seed,
        tol: opts.tol,
        curves: opts.curves,
        samples: opts.samples,
        fd_step: budgets::FD_STEP,
        rk4_steps_per_unit: opts.sample.steps_per_unit,
        curve_box_half_width: opts.sample.box_half_width,
    }
}

/// Sample points for component summaries: the base point plus seeded
/// uniform points in the curve box around it.
fn component_points(base: &Point, samples: usize, seed: u64, half: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x706f_696e_7473);
    let mut out = vec![base.clone()];
    while out.len() < samples.max(1) {
        let coords: Vec<f64> = base
            .coords
            .iter()
            .map(|c| c + rng.random_range(-half..=half))
            .collect();
        out.push(Point::new(coords).expect("finite sample"));
    }
    out
}

fn component_summary(geom: &Geometry, p: &Point) -> Result<ComponentSummary> {
    let pc = PointCurvature::new(geom, p)?;
    let c = decompose_point(&pc)?;
    let n = geom.n();
    // completeness on all ordered frame pairs
    let mut frame_vectors = vec![FrameVector::xi(n), FrameVector::transversal(n)];
    for i in 0..n {
        frame_vectors.push(FrameVector::screen(n, i));
    }
    let mut completeness: f64 = 0.0;
    for w1 in &frame_vectors {
        for w2 in &frame_vectors {
            let direct = pc.endomorphism(w1, w2)?;
            let rebuilt = reconstruct(&c, w1, w2);
            completeness = completeness.max(direct.sub(&rebuilt).norm());
        }
    }
    Ok(ComponentSummary {
        point: p.coords.clone(),
        lambda: c.lambda,
        l_row: c.l_row.iter().copied().collect(),
        t_sym: mat_rows(&c.t_sym),
        r_h_norm: c.r_h_norm(),
        p_norm: c.p_norm(),
        t_norm: c.t_norm(),
        l_norm: c.l_norm(),
        completeness_residual: completeness,
    })
}

/// Full pipeline: decompose at sampled points, sample and close the
/// holonomy algebra, classify, run the three criteria, and attach a
/// compact verification table.
pub fn analyze(geom: &Geometry, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let n = geom.n();
    let base = opts.point.clone().unwrap_or_else(|| default_point(n));
    geom.spec().check_point(&base)?;
    let points = component_points(&base, opts.samples, opts.seed, opts.sample.box_half_width);

    let mut components = Vec::new();
    for p in &points {
        components.push(component_summary(geom, p)?);
    }

    let sampled = sample_holonomy(geom, &base, opts.curves, opts.seed, opts.sample)?;
    let elements: Vec<_> = sampled.iter().map(|s| s.element.clone()).collect();
    let mut basis = lie_closure(&elements, n, opts.tol)?;
    for s in &sampled {
        if s.element.norm() > opts.tol {
            basis.log.push(format!("generator: {}", s.label()));
        }
    }
    let class = classify(&basis, n, opts.tol)?;

    let mut propositions = BTreeMap::new();
    propositions.insert(
        "prop1".to_string(),
        check_prop1(geom, &points, opts.tol)?,
    );
    propositions.insert(
        "prop2".to_string(),
        check_prop2(geom, &base, opts.curves.min(16), opts.seed, opts.tol)?,
    );
    propositions.insert(
        "prop3".to_string(),
        check_prop3(geom, &base, opts.curves.min(16), opts.seed, opts.tol)?,
    );

    let verification = verification_rows(geom, &points, &base)?;

    let holonomy = HolonomySummary {
        holonomy_type: class.holonomy_type.as_number(),
        reason: class.reason.clone(),
        orthogonal_part_dim: class.h_basis.len(),
        h_basis: class.h_basis.iter().map(mat_rows).collect(),
        h_prime_dim: class.h_prime_dim,
        center_dim: class.center_dim,
        phi: class.phi.as_ref().map(|v| v.iter().copied().collect()),
        n1: class.n1,
        n2: class.n2,
        psi: class.psi.as_ref().map(mat_rows),
        weak_irreducibility: class.weak_irreducibility,
        residuals: class.residuals.clone(),
        algebra_dim: class.algebra_dim,
        sampled_elements: sampled.len(),
        generation_log: basis.log.clone(),
    };

    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION.to_string(),
        spec: SpecEcho::new(geom.spec()),
        points: points.iter().map(|p| p.coords.clone()).collect(),
        components,
        holonomy,
        propositions,
        verification,
        provenance: provenance(opts),
    })
}

/// The named invariant rows shared by `analyze` and `verify`.
fn verification_rows(geom: &Geometry, points: &[Point], base: &Point) -> Result<Vec<ResidualRow>> {
    let n = geom.n();
    let dim = geom.dim();
    let mut rows = Vec::new();
    let push = |name: &str, residual: f64, budget: f64, rows: &mut Vec<ResidualRow>| {
        rows.push(ResidualRow {
            name: name.to_string(),
            residual,
            budget,
            pass: residual <= budget,
        });
    };

    let mut r_inverse: f64 = 0.0;
    let mut r_frame: f64 = 0.0;
    let mut r_bianchi: f64 = 0.0;
    let mut r_pair: f64 = 0.0;
    let mut r_t_sym: f64 = 0.0;
    let mut r_complete: f64 = 0.0;
    let mut r_duality: f64 = 0.0;
    let mut r_leaf_h: f64 = 0.0;
    let mut r_leaf_a: f64 = 0.0;
    let mut r_involutive: f64 = 0.0;
    let mut r_rs2: f64 = 0.0;
    let mut r_rst: f64 = 0.0;

    for p in points {
        let g = geom.metric_at(p)?;
        let ginv = geom.inverse_metric_at(p)?;
        r_inverse = r_inverse.max((&g * &ginv - DMatrix::identity(dim, dim)).amax());

        let frame = build_frame(geom, p)?;
        let gram = frame.basis().transpose() * &g * frame.basis();
        let mut expect = DMatrix::zeros(dim, dim);
        expect[(0, dim - 1)] = 1.0;
        expect[(dim - 1, 0)] = 1.0;
        for i in 0..n {
            expect[(1 + i, 1 + i)] = 1.0;
        }
        r_frame = r_frame.max((gram - expect).amax());

        let riemann = geom.riemann_at(p)?;
        let scale = riemann.max_abs().max(1.0);
        let lowered = riemann.lowered(&g);
        let idx = |m: usize, k: usize, i: usize, j: usize| ((m * dim + k) * dim + i) * dim + j;
        for l in 0..dim {
            for k in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        let cyc = riemann.get(l, k, i, j)
                            + riemann.get(l, i, j, k)
                            + riemann.get(l, j, k, i);
                        r_bianchi = r_bianchi.max(cyc.abs() / scale);
                        let a = lowered[idx(l, k, i, j)];
                        let b = lowered[idx(j, i, k, l)];
                        r_pair = r_pair.max((a - b).abs() / scale);
                    }
                }
            }
        }

        let pc = PointCurvature::new(geom, p)?;
        let c = decompose_point(&pc)?;
        r_t_sym = r_t_sym.max(c.t_symmetry_residual());
        let mut frame_vectors = vec![FrameVector::xi(n), FrameVector::transversal(n)];
        for i in 0..n {
            frame_vectors.push(FrameVector::screen(n, i));
        }
        for w1 in &frame_vectors {
            for w2 in &frame_vectors {
                let direct = pc.endomorphism(w1, w2)?;
                let rebuilt = reconstruct(&c, w1, w2);
                r_complete = r_complete.max(direct.sub(&rebuilt).norm() / scale);
            }
        }

        // duality, leaf identities, involutivity
        let nvec = frame.transversal();
        let w = {
            // deterministic mixed test vector
            let mut v = DVector::zeros(dim);
            v[0] = 0.3;
            for i in 0..n {
                v[1 + i] = 0.7 - 0.2 * i as f64;
            }
            v[dim - 1] = -0.9;
            v
        };
        for j in 0..n {
            let y = frame.screen_vector(j);
            let h = screen_second_form(geom, p, &w, &y)?;
            let a = shape_operator(geom, p, &w, 1.0)?;
            let lhs = (&g * &nvec).dot(&h);
            let rhs = (&g * &y).dot(&a);
            r_duality = r_duality.max((lhs - rhs).abs());
        }
        let wt = {
            let mut v = frame.xi() * 0.8;
            for i in 0..n {
                v += frame.screen_vector(i) * (0.5 + 0.3 * i as f64);
            }
            v
        };
        let coeffs = DVector::from_iterator(n, (0..n).map(|i| 0.6 - 0.4 * i as f64));
        let d = geom.covariant_derivative(
            p,
            &wt,
            |q| {
                let fq = build_frame(geom, q)?;
                Ok(fq.screen_combination(&coeffs) + fq.xi() * 0.4)
            },
            None,
        )?;
        r_leaf_h = r_leaf_h.max(frame.to_frame(&d).v.abs());
        let gamma = geom.christoffel_unchecked(p)?;
        let mut e0 = DVector::zeros(dim);
        e0[0] = 1.0;
        let dxi = gamma.contract(&wt, &e0);
        r_leaf_a = r_leaf_a.max(frame.project(&dxi, FramePart::Screen).amax());

        if n >= 2 {
            let x = frame.screen_vector(0);
            let y = frame.screen_vector(1);
            let ax = shape_operator(geom, p, &x, 1.0)?;
            let ay = shape_operator(geom, p, &y, 1.0)?;
            let lhs = (&g * &ax).dot(&y) - (&g * &x).dot(&ay);
            let hxy = screen_second_form(geom, p, &x, &y)?;
            let hyx = screen_second_form(geom, p, &y, &x)?;
            let rhs = (&g * (hxy - hyx)).dot(&nvec);
            r_involutive = r_involutive.max((lhs - rhs).abs());
        }

        for i in 0..n {
            for j in (i + 1)..n {
                let mu = star_rt_at(geom, p, &FrameVector::screen(n, i), &FrameVector::screen(n, j))?;
                r_rs2 = r_rs2.max(mu.abs());
            }
        }
        let lam = star_rt_at(geom, p, &FrameVector::xi(n), &FrameVector::transversal(n))?;
        r_rst = r_rst.max((lam - c.lambda).abs());
        for i in 0..n {
            let mu = star_rt_at(geom, p, &FrameVector::transversal(n), &FrameVector::screen(n, i))?;
            r_rst = r_rst.max((mu - c.l_row[i]).abs());
        }
    }

    push("metric_inverse", r_inverse, budgets::INVERSE_TOL, &mut rows);
    push("frame_orthonormality", r_frame, budgets::FRAME_TOL * 10.0, &mut rows);
    push("bianchi_first", r_bianchi, budgets::BIANCHI_TOL, &mut rows);
    push("lowered_pair_symmetry", r_pair, budgets::PAIR_SYMMETRY_TOL, &mut rows);
    push("t_symmetry", r_t_sym, budgets::T_SYMMETRY_TOL, &mut rows);
    push(
        "decomposition_completeness",
        r_complete,
        budgets::BLOCK_ROUTE_TOL,
        &mut rows,
    );
    push("duality_shape_vs_second_form", r_duality, budgets::DUALITY_TOL, &mut rows);
    push("leaf_h_vanishes", r_leaf_h, budgets::LEAF_TOL, &mut rows);
    push("leaf_screen_shape_vanishes", r_leaf_a, budgets::LEAF_TOL, &mut rows);
    push("screen_involutivity_link", r_involutive, budgets::DUALITY_TOL, &mut rows);
    push("rst_on_screen_pairs", r_rs2, budgets::RST_SCREEN_TOL, &mut rows);
    push("rst_cross_check", r_rst, budgets::RST_CROSS_TOL, &mut rows);

    // operator route at the base point only (second-difference grade)
    let block = decompose_point(&PointCurvature::new(geom, base)?)?;
    let op = operator_route(geom, base)?;
    let scale = 1.0f64
        .max(block.t_norm())
        .max(block.p_norm())
        .max(block.r_h_norm());
    push(
        "operator_route_agreement",
        op.residual_against(&block) / scale,
        budgets::OPERATOR_ROUTE_TOL,
        &mut rows,
    );

    // transport rows on a fixed short curve in the box
    let curve = {
        let mut q1 = base.clone();
        let mut q2 = base.clone();
        for k in 0..dim {
            q1.coords[k] += if k % 2 == 0 { 0.3 } else { -0.25 };
            q2.coords[k] += if k % 2 == 0 { -0.2 } else { 0.35 };
        }
        Curve::new(vec![base.clone(), q1, q2])?
    };
    let tau = transport_map(geom, &curve)?;
    push(
        "transport_metric_preservation",
        tau.metric_residual(geom)?,
        budgets::TRANSPORT_METRIC_TOL,
        &mut rows,
    );
    let halves = curve.points();
    let c1 = Curve::new(vec![halves[0].clone(), halves[1].clone()])?;
    let c2 = Curve::new(vec![halves[1].clone(), halves[2].clone()])?;
    let t1 = transport_map(geom, &c1)?.matrix;
    let t2 = transport_map(geom, &c2)?.matrix;
    push(
        "transport_composition",
        (&t2 * &t1 - &tau.matrix).amax(),
        budgets::TRANSPORT_COMPOSE_TOL,
        &mut rows,
    );
    let back = transport_map(geom, &curve.reversed())?.matrix;
    push(
        "transport_reversal",
        (back * &tau.matrix - DMatrix::identity(dim, dim)).amax(),
        budgets::TRANSPORT_REVERSE_TOL,
        &mut rows,
    );

    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema_version: String,
    pub spec: SpecEcho,
    pub points: Vec<Vec<f64>>,
    pub rows: Vec<ResidualRow>,
    pub provenance: Provenance,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!(
                "{} {:<32} {:>12.3e}  (budget {:.1e})\n",
                if row.pass { "pass" } else { "FAIL" },
                row.name,
                row.residual,
                row.budget
            ));
        }
        out.push_str(if self.all_pass() {
            "all residuals within budget\n"
        } else {
            "BUDGET VIOLATIONS PRESENT\n"
        });
        out
    }
}

/// Run the invariant suites at seeded points around the default base.
/// A screen metric that degenerates inside the sampling box is reported as
/// a failing row rather than an error, so the run still produces a table.
pub fn verify(geom: &Geometry, n_points: usize, seed: u64) -> Result<VerifyReport> {
    let base = default_point(geom.n());
    let points = component_points(&base, n_points.max(1), seed, 0.6);
    let rows = match verification_rows(geom, &points, &base) {
        Ok(rows) => rows,
        Err(crate::error::Error::DegenerateScreen { point, eigenvalue }) => {
            vec![ResidualRow {
                name: format!(
                    "nondegenerate_screen (eigenvalue {eigenvalue:.3e} at {point:?})"
                ),
                residual: 1.0,
                budget: 0.0,
                pass: false,
            }]
        }
        Err(e) => return Err(e),
    };
    let opts = AnalyzeOptions {
        samples: n_points,
        seed,
        ..Default::default()
    };
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION.to_string(),
        spec: SpecEcho::new(geom.spec()),
        points: points.iter().map(|p| p.coords.clone()).collect(),
        rows,
        provenance: provenance(&opts),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeReport {
    pub schema_version: String,
    pub spec: SpecEcho,
    pub point: Vec<f64>,
    pub r_h: Vec<Vec<Vec<f64>>>,
    pub p_map: Vec<Vec<Vec<f64>>>,
    pub t_sym: Vec<Vec<f64>>,
    pub lambda: f64,
    pub l_row: Vec<f64>,
    pub both_route_residual: f64,
}

impl DecomposeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The five components at one point, with the operator-route residual as
/// the cross-check certificate.
pub fn decompose_report(geom: &Geometry, p: &Point) -> Result<DecomposeReport> {
    let n = geom.n();
    let c = crate::curvature::decompose_block(geom, p)?;
    let op = operator_route(geom, p)?;
    let r_h = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| mat_rows(&c.r_h(i, j)))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    // store r_h as the upper-triangle pairs flattened row-major: (i, j) i<j
    let mut r_h_pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            r_h_pairs.push(r_h[i][j].clone());
        }
    }
    Ok(DecomposeReport {
        schema_version: SCHEMA_VERSION.to_string(),
        spec: SpecEcho::new(geom.spec()),
        point: p.coords.clone(),
        r_h: r_h_pairs,
        p_map: c.p_map.iter().map(mat_rows).collect(),
        t_sym: mat_rows(&c.t_sym),
        lambda: c.lambda,
        l_row: c.l_row.iter().copied().collect(),
        both_route_residual: op.residual_against(&c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::parse_metric_spec;

    fn geom(doc: &str) -> Geometry {
        Geometry::new(parse_metric_spec(doc).unwrap())
    }

    fn quick_opts() -> AnalyzeOptions {
        AnalyzeOptions {
            samples: 2,
            curves: 8,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn pp_wave_analyzes_to_type_2() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let report = analyze(&g, &quick_opts()).unwrap();
        assert_eq!(report.holonomy.holonomy_type, Some(2));
        assert_eq!(report.holonomy.orthogonal_part_dim, 0);
        assert!(report.propositions["prop1"].verdict);
        assert!(!report.propositions["prop2"].verdict);
        assert_eq!(report.exit_code(), 0);
    }

    #[test]
    fn flat_space_is_indeterminate_with_flag_false() {
        let g = geom("n = 2\nf = \"0\"\n");
        let report = analyze(&g, &quick_opts()).unwrap();
        assert_eq!(report.holonomy.holonomy_type, None);
        assert!(!report.holonomy.weak_irreducibility);
        assert_eq!(report.exit_code(), 2);
    }

    #[test]
    fn x0_profile_analyzes_to_type_1_and_prop1_fails() {
        let g = geom("n = 2\nf = \"x0^2 + x1^2 + x2^2\"\n");
        let report = analyze(&g, &quick_opts()).unwrap();
        assert_eq!(report.holonomy.holonomy_type, Some(1));
        assert!(!report.propositions["prop1"].verdict);
    }

    #[test]
    fn verify_passes_on_the_pp_wave() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let report = verify(&g, 3, 5).unwrap();
        assert!(report.all_pass(), "{}", report.to_text());
    }

    #[test]
    fn reports_are_byte_identical_for_identical_inputs() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let a = analyze(&g, &quick_opts()).unwrap().to_json();
        let b = analyze(&g, &quick_opts()).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn decompose_report_carries_the_cross_route_residual() {
        let g = geom("n = 2\nf = \"x1^2 + x2^2\"\n");
        let p = Point::new(vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        let report = decompose_report(&g, &p).unwrap();
        assert_eq!(report.lambda, 0.0);
        assert_eq!(report.l_row, vec![0.0, 0.0]);
        assert!((report.t_sym[0][0] + 1.0).abs() < 1e-12);
        assert!(report.both_route_residual < 1e-6);
    }
}
