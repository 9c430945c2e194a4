//! Pointwise tensor kernel for a Walker metric.
//!
//! [`Geometry`] compiles a [`MetricSpec`] once into symbolic tables — the
//! metric, its inverse (the lightlike block structure reduces this to the
//! inverse of the screen block), the Christoffel symbols and their first
//! derivatives — and evaluates them at points. Curvature therefore comes
//! from exact symbolic derivatives; finite differences only appear in
//! [`Geometry::covariant_derivative`], which differentiates caller-supplied
//! vector fields.
//!
//! Index conventions, fixed here and used everywhere:
//!
//! * coordinates are indexed `0..=n+1`; `0` is the parallel lightlike
//!   direction, `1..=n` the screen block, `n+1` the transversal direction;
//! * `Gamma^k_{ij}` is symmetric in `(i, j)`;
//! * the curvature sign is `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z
//!   - nabla_{[X,Y]} Z`, in components `R(d_i, d_j) d_k = R^l_{kij} d_l` with
//!   `R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
//!   + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}`.

use crate::budgets;
use crate::error::{Error, Result};
use crate::expr::{diff_expr, eval_memo, simplify, BinOp, Expr};
use crate::metric::{MetricSpec, Point};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::Arc;

/// Christoffel symbols `Gamma^k_{ij}` at a point.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    vals: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.vals[(k * self.dim + i) * self.dim + j]
    }

    /// Contraction `Gamma^k_{ab} u^a v^b` over both lower slots.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for k in 0..d {
            let mut s = 0.0;
            for a in 0..d {
                if u[a] == 0.0 {
                    continue;
                }
                for b in 0..d {
                    s += self.get(k, a, b) * u[a] * v[b];
                }
            }
            out[k] = s;
        }
        out
    }
}

/// Coordinate curvature tensor `R^l_{kij}` at a point.
#[derive(Debug, Clone)]
pub struct RiemannTensor {
    dim: usize,
    vals: Vec<f64>,
}

impl RiemannTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        self.vals[((l * self.dim + k) * self.dim + i) * self.dim + j]
    }

    /// The endomorphism `Z -> R(w1, w2) Z` as a matrix in coordinates.
    pub fn endomorphism(&self, w1: &DVector<f64>, w2: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            if w1[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = w1[i] * w2[j];
                if w == 0.0 {
                    continue;
                }
                for l in 0..d {
                    for k in 0..d {
                        m[(l, k)] += self.get(l, k, i, j) * w;
                    }
                }
            }
        }
        m
    }

    /// Fully lowered tensor `R_{mkij} = g_{ml} R^l_{kij}`.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d * d * d];
        for m in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        let mut s = 0.0;
                        for l in 0..d {
                            s += g[(m, l)] * self.get(l, k, i, j);
                        }
                        out[((m * d + k) * d + i) * d + j] = s;
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

type ExprTable = Vec<Vec<Arc<Expr>>>;

/// A metric spec compiled to symbolic tensor tables.
#[derive(Clone)]
pub struct Geometry {
    spec: MetricSpec,
    dim: usize,
    g: ExprTable,
    g_inv: ExprTable,
    /// `gamma[k][i][j]`
    gamma: Vec<ExprTable>,
    /// `dgamma[a][k][i][j]`
    dgamma: Vec<Vec<ExprTable>>,
    /// Finite-difference step factor for `covariant_derivative`.
    pub fd_step: f64,
}

impl Geometry {
    pub fn new(spec: MetricSpec) -> Self {
        let n = spec.n();
        let dim = n + 2;
        let zero = Expr::zero();
        let one = Expr::one();

        // symbolic metric in the Walker layout
        let mut g: ExprTable = vec![vec![zero.clone(); dim]; dim];
        g[0][dim - 1] = one.clone();
        g[dim - 1][0] = one.clone();
        g[dim - 1][dim - 1] = spec.f().clone();
        for i in 0..n {
            for j in 0..n {
                g[i + 1][j + 1] = spec.g(i, j).clone();
            }
        }

        // Lightlike block inverse: only the screen block needs real work.
        let screen: Vec<Vec<Arc<Expr>>> = (0..n)
            .map(|i| (0..n).map(|j| spec.g(i, j).clone()).collect())
            .collect();
        let (det, adj) = adjugate(&screen);
        let mut g_inv: ExprTable = vec![vec![zero.clone(); dim]; dim];
        g_inv[0][0] = simplify(&Arc::new(Expr::Neg(spec.f().clone())));
        g_inv[0][dim - 1] = one.clone();
        g_inv[dim - 1][0] = one.clone();
        for i in 0..n {
            for j in 0..n {
                g_inv[i + 1][j + 1] = simplify(&Arc::new(Expr::Bin(
                    BinOp::Div,
                    adj[i][j].clone(),
                    det.clone(),
                )));
            }
        }

        // dg[a][b][c] = d_a g_{bc}
        let dg: Vec<ExprTable> = (0..dim)
            .map(|a| {
                (0..dim)
                    .map(|b| (0..dim).map(|c| diff_expr(&g[b][c], a)).collect())
                    .collect()
            })
            .collect();

        // Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij})
        let half = Expr::num(0.5);
        let mut gamma: Vec<ExprTable> = vec![vec![vec![zero.clone(); dim]; dim]; dim];
        for k in 0..dim {
            for i in 0..dim {
                for j in i..dim {
                    let mut sum = zero.clone();
                    for l in 0..dim {
                        if g_inv[k][l].is_num(0.0) {
                            continue;
                        }
                        let t = simplify(&Arc::new(Expr::Bin(
                            BinOp::Sub,
                            Arc::new(Expr::Bin(
                                BinOp::Add,
                                dg[i][j][l].clone(),
                                dg[j][i][l].clone(),
                            )),
                            dg[l][i][j].clone(),
                        )));
                        if t.is_num(0.0) {
                            continue;
                        }
                        let term = Arc::new(Expr::Bin(BinOp::Mul, g_inv[k][l].clone(), t));
                        sum = Arc::new(Expr::Bin(BinOp::Add, sum, term));
                    }
                    let e = simplify(&Arc::new(Expr::Bin(BinOp::Mul, half.clone(), sum)));
                    gamma[k][i][j] = e.clone();
                    gamma[k][j][i] = e;
                }
            }
        }

        let dgamma: Vec<Vec<ExprTable>> = (0..dim)
            .map(|a| {
                (0..dim)
                    .map(|k| {
                        (0..dim)
                            .map(|i| (0..dim).map(|j| diff_expr(&gamma[k][i][j], a)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();

        Geometry {
            spec,
            dim,
            g,
            g_inv,
            gamma,
            dgamma,
            fd_step: budgets::FD_STEP,
        }
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Metric matrix at `p`, with the screen block checked for positive
    /// definiteness.
    pub fn metric_at(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.spec.check_point(p)?;
        let m = self.eval_table(&self.g, p)?;
        let n = self.spec.n();
        let screen = m.view((1, 1), (n, n)).into_owned();
        let eig = screen.symmetric_eigenvalues();
        let min = eig.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        if min <= budgets::SCREEN_EIGENVALUE_MIN {
            return Err(Error::DegenerateScreen {
                point: p.coords.clone(),
                eigenvalue: min,
            });
        }
        Ok(m)
    }

    /// Inverse metric at `p` from the symbolic block formula.
    pub fn inverse_metric_at(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.metric_at(p)?; // degeneracy check
        self.eval_table(&self.g_inv, p)
    }

    pub fn christoffel_at(&self, p: &Point) -> Result<Christoffel> {
        self.metric_at(p)?;
        self.christoffel_unchecked(p)
    }

    /// Christoffel evaluation without the positive-definiteness check;
    /// transport integration checks once per segment instead of per step.
    pub(crate) fn christoffel_unchecked(&self, p: &Point) -> Result<Christoffel> {
        let d = self.dim;
        let mut cache = HashMap::new();
        let mut vals = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let v = eval_memo(&self.gamma[k][i][j], p, &mut cache)?;
                    vals[(k * d + i) * d + j] = v;
                    vals[(k * d + j) * d + i] = v;
                }
            }
        }
        Ok(Christoffel { dim: d, vals })
    }

    pub fn riemann_at(&self, p: &Point) -> Result<RiemannTensor> {
        self.metric_at(p)?;
        let d = self.dim;
        let mut cache = HashMap::new();

        let mut gam = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let v = eval_memo(&self.gamma[k][i][j], p, &mut cache)?;
                    gam[(k * d + i) * d + j] = v;
                    gam[(k * d + j) * d + i] = v;
                }
            }
        }
        let mut dgam = vec![0.0; d * d * d * d];
        for a in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in i..d {
                        let v = eval_memo(&self.dgamma[a][k][i][j], p, &mut cache)?;
                        dgam[((a * d + k) * d + i) * d + j] = v;
                        dgam[((a * d + k) * d + j) * d + i] = v;
                    }
                }
            }
        }

        let gm = |k: usize, i: usize, j: usize| gam[(k * d + i) * d + j];
        let dgm = |a: usize, k: usize, i: usize, j: usize| dgam[((a * d + k) * d + i) * d + j];

        let mut vals = vec![0.0; d * d * d * d];
        for l in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            continue;
                        }
                        let mut v = dgm(i, l, j, k) - dgm(j, l, i, k);
                        for m in 0..d {
                            v += gm(l, i, m) * gm(m, j, k) - gm(l, j, m) * gm(m, i, k);
                        }
                        vals[((l * d + k) * d + i) * d + j] = v;
                    }
                }
            }
        }
        Ok(RiemannTensor { dim: d, vals })
    }

    /// Covariant derivative of a vector field along a direction at `p`:
    /// a central finite difference of the field plus the Christoffel term.
    /// `step` overrides the default step factor (the operator route passes
    /// a larger outer step when the field itself contains a difference).
    pub fn covariant_derivative<F>(
        &self,
        p: &Point,
        direction: &DVector<f64>,
        field: F,
        step: Option<f64>,
    ) -> Result<DVector<f64>>
    where
        F: Fn(&Point) -> Result<DVector<f64>>,
    {
        let dir_norm = direction.amax();
        if dir_norm == 0.0 {
            return Ok(DVector::zeros(self.dim));
        }
        let h = step.unwrap_or(self.fd_step) * (1.0 + p.inf_norm()) / dir_norm.max(1.0);
        let dirs: Vec<f64> = direction.iter().copied().collect();
        let plus = field(&p.shifted_along(&dirs, h))?;
        let minus = field(&p.shifted_along(&dirs, -h))?;
        let mut out = (plus - minus) / (2.0 * h);

        let v = field(p)?;
        let gamma = self.christoffel_unchecked(p)?;
        out += gamma.contract(direction, &v);
        Ok(out)
    }

    /// Directional derivative of a scalar function of the point, with the
    /// same stepping rules as `covariant_derivative`.
    pub fn directional_derivative<F>(
        &self,
        p: &Point,
        direction: &DVector<f64>,
        func: F,
        step: Option<f64>,
    ) -> Result<f64>
    where
        F: Fn(&Point) -> Result<f64>,
    {
        let dir_norm = direction.amax();
        if dir_norm == 0.0 {
            return Ok(0.0);
        }
        let h = step.unwrap_or(self.fd_step) * (1.0 + p.inf_norm()) / dir_norm.max(1.0);
        let dirs: Vec<f64> = direction.iter().copied().collect();
        Ok((func(&p.shifted_along(&dirs, h))? - func(&p.shifted_along(&dirs, -h))?) / (2.0 * h))
    }

    fn eval_table(&self, table: &ExprTable, p: &Point) -> Result<DMatrix<f64>> {
        let d = self.dim;
        let mut cache = HashMap::new();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = eval_memo(&table[i][j], p, &mut cache)?;
            }
        }
        Ok(m)
    }
}

/// Symbolic determinant and adjugate of a square expression matrix, by
/// Laplace expansion with memoized minors. Screen blocks are small (n <= 4
/// in practice), so the factorial growth never bites.
fn adjugate(m: &[Vec<Arc<Expr>>]) -> (Arc<Expr>, Vec<Vec<Arc<Expr>>>) {
    let n = m.len();
    let full: u32 = (1 << n) - 1;
    let mut memo: HashMap<(u32, u32), Arc<Expr>> = HashMap::new();
    let det = minor(m, full, full, &mut memo);
    if n == 1 {
        return (det, vec![vec![Expr::one()]]);
    }
    let mut adj = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let rows = full & !(1 << i);
            let cols = full & !(1 << j);
            let mut c = minor(m, rows, cols, &mut memo);
            if (i + j) % 2 == 1 {
                c = simplify(&Arc::new(Expr::Neg(c)));
            }
            // adjugate transposes the cofactor matrix
            adj[j][i] = c;
        }
    }
    (det, adj)
}

fn minor(
    m: &[Vec<Arc<Expr>>],
    rows: u32,
    cols: u32,
    memo: &mut HashMap<(u32, u32), Arc<Expr>>,
) -> Arc<Expr> {
    if rows == 0 {
        return Expr::one();
    }
    if let Some(e) = memo.get(&(rows, cols)) {
        return e.clone();
    }
    let r = rows.trailing_zeros() as usize;
    let rest_rows = rows & !(1 << r);
    let mut sum = Expr::zero();
    let mut sign = 1.0;
    for c in 0..m.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = &m[r][c];
        if !entry.is_num(0.0) {
            let sub = minor(m, rest_rows, cols & !(1 << c), memo);
            let mut term = Arc::new(Expr::Bin(BinOp::Mul, entry.clone(), sub));
            if sign < 0.0 {
                term = Arc::new(Expr::Neg(term));
            }
            sum = Arc::new(Expr::Bin(BinOp::Add, sum, term));
        }
        sign = -sign;
    }
    let sum = simplify(&sum);
    memo.insert((rows, cols), sum.clone());
    sum
}
