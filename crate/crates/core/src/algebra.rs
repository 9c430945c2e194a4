//! Numerical span and bracket-closure machinery.
//!
//! Subspaces are handled as orthonormal families; every rank decision is a
//! relative cut at `tol * (largest pivot)`, the single tolerance that flows
//! in from the caller. All factorizations go through Householder QR with
//! column pivoting: its orthogonal factors stay inside the data span to
//! machine precision, which the classifier depends on. (nalgebra's SVD was
//! observed to return "right singular vectors" with components of order
//! 1e-2 outside the row space when large singular values cluster; see the
//! `orthonormal_rows_stay_in_the_row_span` regression test.)

use crate::curvature::LorentzBlockElement;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Column-pivoted QR with a relative rank cut on the R diagonal.
/// Returns `(q, rank)` where the first `rank` columns of `q` are an
/// orthonormal basis of the column space of `a`.
fn qr_range(a: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let rmax = if k > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = if rmax == 0.0 {
        0
    } else {
        (0..k).filter(|&i| r[(i, i)].abs() > tol * rmax).count()
    };
    (qr.q(), rank)
}

/// Orthonormal basis of the row span of `rows`, cut at the relative
/// threshold.
pub fn orthonormal_rows(rows: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    if rows.is_empty() || rows[0].len() == 0 {
        return Vec::new();
    }
    let d = rows[0].len();
    let mut a = DMatrix::zeros(d, rows.len());
    for (j, r) in rows.iter().enumerate() {
        a.column_mut(j).copy_from(r);
    }
    let (q, rank) = qr_range(&a, tol);
    (0..rank).map(|i| q.column(i).into_owned()).collect()
}

/// Rank of the row family at the relative threshold.
pub fn rank(rows: &[DVector<f64>], tol: f64) -> usize {
    orthonormal_rows(rows, tol).len()
}

/// Minimal-norm least squares `A x ~ b` through a complete orthogonal
/// decomposition with the same relative rank cut.
/// Returns `(x, residual_inf_norm)`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> (DVector<f64>, f64) {
    let (m, n) = a.shape();
    if n == 0 || m == 0 {
        return (DVector::zeros(n), if m == 0 { 0.0 } else { b.amax() });
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(n);
    let rmax = if k > 0 { r[(0, 0)].abs() } else { 0.0 };
    if rmax == 0.0 {
        return (DVector::zeros(n), b.amax());
    }
    let rank = (0..k).filter(|&i| r[(i, i)].abs() > tol * rmax).count();
    let q = qr.q();
    let c = q.columns(0, rank).transpose() * b;

    // minimal-norm solve of the trapezoidal system R_r w = c via a second
    // QR of its transpose: R_r = R2^t Q2^t
    let rt = r.rows(0, rank).transpose(); // n x rank, full column rank
    let qr2 = rt.qr();
    let r2 = qr2.r(); // rank x rank, upper triangular
    let mut z = DVector::zeros(rank);
    for i in 0..rank {
        // forward substitution on R2^t (lower triangular)
        let mut s = c[i];
        for j in 0..i {
            s -= r2[(j, i)] * z[j];
        }
        z[i] = s / r2[(i, i)];
    }
    let mut w = qr2.q() * z; // n-vector in permuted coordinates
    qr.p().inv_permute_rows(&mut w);
    let resid = (a * &w - b).amax();
    (w, resid)
}

/// Orthonormal basis of the null space of `a` (as column vectors of the
/// domain), at the relative threshold: the trailing columns of a full
/// orthogonal factor of `a^t`.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let (m, n) = a.shape();
    if n == 0 {
        return Vec::new();
    }
    // pad with zero columns so the orthogonal factor is square n x n
    let k = m.max(n);
    let mut at = DMatrix::zeros(n, k);
    at.view_mut((0, 0), (n, m)).copy_from(&a.transpose());
    let (q, rank) = qr_range(&at, tol);
    (rank..n).map(|i| q.column(i).into_owned()).collect()
}

/// Smallest principal-angle cosine between two spans given as orthonormal
/// row families; `1` means the spans agree (when dims match).
pub fn span_alignment(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    if a.is_empty() {
        return 1.0;
    }
    let d = a[0].len();
    let mut qa = DMatrix::zeros(a.len(), d);
    for (i, r) in a.iter().enumerate() {
        qa.row_mut(i).copy_from(&r.transpose());
    }
    let mut qb = DMatrix::zeros(b.len(), d);
    for (i, r) in b.iter().enumerate() {
        qb.row_mut(i).copy_from(&r.transpose());
    }
    let overlap = &qa * qb.transpose();
    let gram = &overlap * overlap.transpose();
    let eig = gram.symmetric_eigenvalues();
    eig.iter().fold(1.0f64, |m, l| m.min(l.max(0.0).sqrt()))
}

/// Orthonormal basis of a bracket-closed algebra span.
#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    n: usize,
    pub elements: Vec<LorentzBlockElement>,
    /// Provenance of the inputs and of each closure round.
    pub log: Vec<String>,
}

impl AlgebraBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn flattened(&self) -> Vec<DVector<f64>> {
        self.elements.iter().map(flatten).collect()
    }
}

pub fn flatten(e: &LorentzBlockElement) -> DVector<f64> {
    let m = e.embed();
    DVector::from_iterator(m.len(), m.iter().copied())
}

fn unflatten(v: &DVector<f64>, n: usize) -> LorentzBlockElement {
    let d = n + 2;
    let m = DMatrix::from_iterator(d, d, v.iter().copied());
    // linear combinations of block elements stay in block form; read the
    // triple straight off and antisymmetrize away the rounding noise
    let a = 0.5 * (m[(0, 0)] - m[(d - 1, d - 1)]);
    let x = DVector::from_iterator(n, (0..n).map(|i| 0.5 * (m[(0, 1 + i)] - m[(1 + i, d - 1)])));
    let mid = m.view((1, 1), (n, n));
    let block = DMatrix::from_fn(n, n, |i, j| 0.5 * (mid[(i, j)] - mid[(j, i)]));
    LorentzBlockElement::new(a, x, block).expect("antisymmetrized block")
}

/// Closure cap: dimension of the ambient stabilizer algebra.
fn stabilizer_dim(n: usize) -> usize {
    1 + n + n * (n - 1) / 2
}

/// Smallest bracket-closed subspace containing the inputs, orthonormalized
/// in the Frobenius inner product of the embedded matrices. Rank decisions
/// at `tol * sigma_max`; iteration capped at 10 rounds.
pub fn lie_closure(
    inputs: &[LorentzBlockElement],
    n: usize,
    tol: f64,
) -> Result<AlgebraBasis> {
    let mut log = Vec::new();
    let input_rows: Vec<DVector<f64>> = inputs.iter().map(flatten).collect();
    let mut basis_rows = orthonormal_rows(&input_rows, tol);
    log.push(format!(
        "span of {} inputs: dimension {}",
        inputs.len(),
        basis_rows.len()
    ));

    let cap = stabilizer_dim(n);
    for round in 0..10 {
        if basis_rows.len() >= cap {
            break;
        }
        let elements: Vec<LorentzBlockElement> =
            basis_rows.iter().map(|r| unflatten(r, n)).collect();
        let mut rows = basis_rows.clone();
        for i in 0..elements.len() {
            for j in (i + 1)..elements.len() {
                rows.push(flatten(&elements[i].bracket(&elements[j])));
            }
        }
        let closed = orthonormal_rows(&rows, tol);
        if closed.len() == basis_rows.len() {
            if round > 0 {
                log.push(format!("closed after {round} bracket rounds"));
            }
            basis_rows = closed;
            return Ok(AlgebraBasis {
                n,
                elements: basis_rows.iter().map(|r| unflatten(r, n)).collect(),
                log,
            });
        }
        log.push(format!(
            "bracket round {}: dimension {} -> {}",
            round + 1,
            basis_rows.len(),
            closed.len()
        ));
        basis_rows = closed;
    }

    // either we filled the ambient algebra (closed by construction) or the
    // rank kept moving, which signals a tolerance problem
    if basis_rows.len() >= cap {
        return Ok(AlgebraBasis {
            n,
            elements: basis_rows.iter().map(|r| unflatten(r, n)).collect(),
            log,
        });
    }
    Err(Error::ClosureDiverged { rounds: 10 })
}

/// Bracket closure of a family of so(n) matrices (used for the orthogonal
/// part): same algorithm in the plain matrix coordinates.
pub fn matrix_lie_closure(mats: &[DMatrix<f64>], n: usize, tol: f64) -> Result<Vec<DMatrix<f64>>> {
    let flat = |m: &DMatrix<f64>| DVector::from_iterator(m.len(), m.iter().copied());
    let unflat = |v: &DVector<f64>| {
        let m = DMatrix::from_iterator(n, n, v.iter().copied());
        DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] - m[(j, i)]))
    };
    let rows: Vec<DVector<f64>> = mats.iter().map(flat).collect();
    let mut basis = orthonormal_rows(&rows, tol);
    let cap = n * (n - 1) / 2;
    for _ in 0..10 {
        if basis.len() >= cap {
            return Ok(basis.iter().map(|r| unflat(r)).collect());
        }
        let mats: Vec<DMatrix<f64>> = basis.iter().map(|r| unflat(r)).collect();
        let mut rows = basis.clone();
        for i in 0..mats.len() {
            for j in (i + 1)..mats.len() {
                rows.push(flat(&(&mats[i] * &mats[j] - &mats[j] * &mats[i])));
            }
        }
        let closed = orthonormal_rows(&rows, tol);
        if closed.len() == basis.len() {
            return Ok(closed.iter().map(|r| unflat(r)).collect());
        }
        basis = closed;
    }
    Err(Error::ClosureDiverged { rounds: 10 })
}
