//! Seeded generators for random Walker specs and sample points.
//!
//! Shared by the unit, property and acceptance suites; hidden from the
//! public API surface. The generated screen metrics are diagonally dominant
//! perturbations of the identity, positive definite on the sampling box
//! `|x_k| <= 1.5`.

#![doc(hidden)]

use crate::expr::{BinOp, Expr};
use crate::metric::{MetricSpec, Point};
use nalgebra::DVector;
use rand::Rng;
use std::sync::Arc;

/// Random polynomial in the given coordinates: `terms` monomials of total
/// degree at most `degree`, coefficients in `[-scale, scale]` rounded to
/// multiples of 1/8 so printed specs stay short.
pub fn random_polynomial<R: Rng>(
    rng: &mut R,
    vars: &[usize],
    degree: u32,
    terms: usize,
    scale: f64,
) -> Arc<Expr> {
    let mut sum = Expr::zero();
    for _ in 0..terms {
        let c = (rng.random_range(-(scale * 8.0)..=scale * 8.0)).round() / 8.0;
        if c == 0.0 {
            continue;
        }
        let mut term = Expr::num(c);
        let mut remaining = rng.random_range(1..=degree);
        while remaining > 0 {
            let var = vars[rng.random_range(0..vars.len())];
            let k = rng.random_range(1..=remaining);
            let factor = if k == 1 {
                Expr::coord(var)
            } else {
                Arc::new(Expr::Bin(
                    BinOp::Pow,
                    Expr::coord(var),
                    Expr::num(k as f64),
                ))
            };
            term = Arc::new(Expr::Bin(BinOp::Mul, term, factor));
            remaining -= k;
        }
        sum = Arc::new(Expr::Bin(BinOp::Add, sum, term));
    }
    crate::expr::simplify(&sum)
}

/// Random pp-wave: identity screen metric, profile in `x1..x{n+1}`.
pub fn random_pp_wave<R: Rng>(rng: &mut R, n: usize) -> MetricSpec {
    let vars: Vec<usize> = (1..=n + 1).collect();
    let f = random_polynomial(rng, &vars, 3, 4, 1.0);
    MetricSpec::new(n, identity(n), f).expect("generated pp-wave is valid")
}

/// Random Walker spec with a nontrivial screen metric. With
/// `x0_dependent` the profile also couples to `x0`.
pub fn random_walker<R: Rng>(rng: &mut R, n: usize, nontrivial_g: bool) -> MetricSpec {
    let screen_vars: Vec<usize> = (1..=n + 1).collect();
    let mut gij = identity(n);
    if nontrivial_g {
        // keep Gershgorin dominance on the sampling box
        let eps = 0.1 / n as f64;
        for i in 0..n {
            for j in i..n {
                let q = random_polynomial(rng, &screen_vars, 2, 2, eps);
                let entry = if i == j {
                    crate::expr::simplify(&Arc::new(Expr::Bin(BinOp::Add, Expr::one(), q)))
                } else {
                    q
                };
                gij[i][j] = entry.clone();
                gij[j][i] = entry;
            }
        }
    }
    let all_vars: Vec<usize> = (0..=n + 1).collect();
    let f = random_polynomial(rng, &all_vars, 3, 4, 1.0);
    MetricSpec::new(n, gij, f).expect("generated walker spec is valid")
}

/// Uniform point with `x_k` in `[-half, half]`.
pub fn random_point<R: Rng>(rng: &mut R, n: usize, half: f64) -> Point {
    let coords: Vec<f64> = (0..n + 2).map(|_| rng.random_range(-half..=half)).collect();
    Point::new(coords).expect("finite coordinates")
}

/// Uniform direction vector with entries in `[-1, 1]`.
pub fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-1.0..=1.0)))
}

fn identity(n: usize) -> Vec<Vec<Arc<Expr>>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Expr::one() } else { Expr::zero() })
                .collect()
        })
        .collect()
}
