//! Minimum Euclidean norm solutions of consistent, possibly rank-deficient
//! linear systems `B x = d`.
//!
//! The production path factors `B` once by SVD and then solves any number
//! of right-hand sides. The oracle uses Householder QR with column pivoting
//! instead and exists to cross-check the SVD path in tests.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative singular value cutoff and feasibility tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

const RECONSTRUCTION_TOLERANCE: f64 = 1e-12;

/// Origin of a block of constraint rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowLabel {
    Curl,
    Divergence,
    TangentialTrace(usize),
    NormalTrace(usize),
    Other,
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::Curl => write!(f, "curl"),
            RowLabel::Divergence => write!(f, "div"),
            RowLabel::TangentialTrace(face) => write!(f, "trace({face})"),
            RowLabel::NormalTrace(face) => write!(f, "normal-trace({face})"),
            RowLabel::Other => write!(f, "other"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Row blocks in order; together they cover every row exactly once.
    pub labels: Vec<(RowLabel, Range<usize>)>,
}

impl ConstraintSystem {
    /// A system with no constraints on `n` unknowns.
    pub fn empty(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(0, n),
            rhs: DVector::zeros(0),
            labels: Vec::new(),
        }
    }

    /// A single unlabelled block.
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let rows = matrix.nrows();
        let mut sys = Self::empty(matrix.ncols());
        sys.push(RowLabel::Other, &matrix, &rhs)?;
        debug_assert_eq!(sys.rows(), rows);
        Ok(sys)
    }

    /// Appends a labelled block of rows.
    pub fn push(&mut self, label: RowLabel, block: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<()> {
        if block.ncols() != self.matrix.ncols() {
            return Err(Error::LengthMismatch {
                expected: self.matrix.ncols(),
                actual: block.ncols(),
            });
        }
        if block.nrows() != rhs.len() {
            return Err(Error::LengthMismatch {
                expected: block.nrows(),
                actual: rhs.len(),
            });
        }
        let start = self.matrix.nrows();
        let n = self.matrix.ncols();
        let mut matrix = DMatrix::zeros(start + block.nrows(), n);
        matrix.rows_mut(0, start).copy_from(&self.matrix);
        matrix.rows_mut(start, block.nrows()).copy_from(block);
        let mut rhs_all = DVector::zeros(start + rhs.len());
        rhs_all.rows_mut(0, start).copy_from(&self.rhs);
        rhs_all.rows_mut(start, rhs.len()).copy_from(rhs);
        self.matrix = matrix;
        self.rhs = rhs_all;
        self.labels.push((label, start..start + block.nrows()));
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The same system with its rows reordered by `order` (a permutation of
    /// `0..rows`). Labels are dropped since blocks no longer stay contiguous.
    pub fn permuted_rows(&self, order: &[usize]) -> Self {
        let matrix = DMatrix::from_fn(self.rows(), self.cols(), |r, c| self.matrix[(order[r], c)]);
        let rhs = DVector::from_fn(self.rows(), |r, _| self.rhs[order[r]]);
        Self {
            matrix,
            rhs,
            labels: vec![(RowLabel::Other, 0..self.rows())],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinResult {
    pub x_star: DVector<f64>,
    pub norm: f64,
    /// `|B x_star - d|`.
    pub residual: f64,
    pub rank: usize,
    /// Distance of `d` from the range of `B`.
    pub consistency_gap: f64,
}

/// A truncated SVD of a constraint matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LeastNormFactor {
    /// `m x r`.
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    /// `r x n`.
    v_t: DMatrix<f64>,
    rows: usize,
    cols: usize,
    tolerance: f64,
    sigma_max: f64,
}

impl LeastNormFactor {
    pub fn new(matrix: &DMatrix<f64>, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!("tolerance {tolerance} outside (0,1)")));
        }
        let (rows, cols) = matrix.shape();
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown("constraint matrix has non-finite entries".into()));
        }
        if rows == 0 || cols == 0 {
            return Ok(Self {
                u: DMatrix::zeros(rows, 0),
                sigma: DVector::zeros(0),
                v_t: DMatrix::zeros(0, cols),
                rows,
                cols,
                tolerance,
                sigma_max: 0.0,
            });
        }
        let (u, singular_values, v_t) = thin_svd(matrix)?;
        let sigma_max = singular_values.max();
        let cutoff = tolerance * sigma_max;
        let keep: Vec<usize> = (0..singular_values.len())
            .filter(|&k| singular_values[k] > cutoff)
            .collect();
        let u_r = DMatrix::from_fn(rows, keep.len(), |i, k| u[(i, keep[k])]);
        let v_r = DMatrix::from_fn(keep.len(), cols, |k, j| v_t[(keep[k], j)]);
        let sigma = DVector::from_iterator(keep.len(), keep.iter().map(|&k| singular_values[k]));
        // cheap compared with the factorization, and catches a bad one
        let mut scaled = u_r.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= sigma[k];
        }
        let error = (&scaled * &v_r - matrix).norm();
        let bound = RECONSTRUCTION_TOLERANCE * (matrix.norm() + f64::MIN_POSITIVE);
        if !(error <= bound.max(tolerance * sigma_max * (cols.min(rows) as f64).sqrt())) {
            return Err(Error::NumericalBreakdown(format!(
                "SVD reconstruction error {error:.3e} exceeds {bound:.3e}"
            )));
        }
        Ok(Self {
            u: u_r,
            sigma,
            v_t: v_r,
            rows,
            cols,
            tolerance,
            sigma_max,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.sigma_max
    }

    /// Orthonormal basis of the row space of `B`, as an `r x n` matrix.
    pub fn row_space(&self) -> &DMatrix<f64> {
        &self.v_t
    }

    /// Minimum norm solution for `rhs`. Fails with `Infeasible` when `rhs`
    /// lies farther than `tol (1 + |rhs|)` from the range.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<MinResult> {
        if rhs.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                actual: rhs.len(),
            });
        }
        let coords = self.u.tr_mul(rhs);
        let gap = (rhs - &self.u * &coords).norm();
        let tolerance = self.tolerance * (1.0 + rhs.norm());
        if !(gap <= tolerance) {
            return Err(Error::Infeasible { gap, tolerance });
        }
        let x_star = self.v_t.tr_mul(&coords.component_div(&self.sigma));
        Ok(MinResult {
            norm: x_star.norm(),
            residual: gap,
            rank: self.rank(),
            consistency_gap: gap,
            x_star,
        })
    }

    /// As `solve`, with the residual recomputed from the original matrix.
    pub fn solve_checked(&self, matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<MinResult> {
        let mut result = self.solve(rhs)?;
        result.residual = (matrix * &result.x_star - rhs).norm();
        Ok(result)
    }
}

/// Thin SVD `B = U diag(s) V^T`, returned as `(U, s, V^T)`.
///
/// nalgebra's implicit-shift SVD returns inconsistent factors on some
/// rank-deficient matrices, which is exactly the case here, so faer's
/// divide-and-conquer SVD is used instead.
fn thin_svd(matrix: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = matrix.shape();
    let k = m.min(n);
    let f = faer::Mat::<f64>::from_fn(m, n, |i, j| matrix[(i, j)]);
    let svd = f
        .thin_svd()
        .map_err(|e| Error::NumericalBreakdown(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok((
        DMatrix::from_fn(m, k, |i, l| u[(i, l)]),
        DVector::from_fn(k, |l, _| s[l]),
        DMatrix::from_fn(k, n, |l, j| v[(j, l)]),
    ))
}

/// Minimum norm solution of `sys` via truncated SVD with relative cutoff
/// `tol`.
pub fn least_norm_solve(sys: &ConstraintSystem, tol: f64) -> Result<MinResult> {
    LeastNormFactor::new(&sys.matrix, tol)?.solve_checked(&sys.matrix, &sys.rhs)
}

/// Numerical rank: singular values above `tol` times the largest.
pub fn svd_rank(matrix: &DMatrix<f64>, tol: f64) -> usize {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return 0;
    }
    match thin_svd(matrix) {
        Ok((_, s, _)) => {
            let cutoff = tol * s.max();
            s.iter().filter(|&&v| v > cutoff).count()
        }
        Err(_) => 0,
    }
}

/// Householder QR with column pivoting, `A P = Q R`, with `Q` kept in full.
struct PivotedQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    perm: Vec<usize>,
}

fn pivoted_qr(a: &DMatrix<f64>) -> PivotedQr {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..m.min(n) {
        // bring the column with the largest remaining norm forward
        let (best, _) = (k..n)
            .map(|j| (j, r.view((k, j), (m - k, 1)).norm_squared()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best != k {
            r.swap_columns(k, best);
            perm.swap(k, best);
        }
        let x = r.view((k, k), (m - k, 1)).clone_owned();
        let alpha = x.norm();
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = v.norm_squared();
        // R <- (I - 2 v v^T / v^T v) R on rows k.., Q <- Q (I - 2 v v^T / v^T v)
        let block = r.view((k, k), (m - k, n - k)).clone_owned();
        let proj = v.tr_mul(&block) * (2.0 / vnorm2);
        r.view_mut((k, k), (m - k, n - k)).copy_from(&(block - &v * proj));
        let qblock = q.view((0, k), (m, m - k)).clone_owned();
        let qproj = &qblock * &v * (2.0 / vnorm2);
        q.view_mut((0, k), (m, m - k)).copy_from(&(qblock - qproj * v.transpose()));
        for i in k + 1..m {
            r[(i, k)] = 0.0;
        }
    }
    PivotedQr { q, r, perm }
}

fn qr_rank(r: &DMatrix<f64>, tol: f64) -> usize {
    let k = r.nrows().min(r.ncols());
    if k == 0 {
        return 0;
    }
    let lead = r[(0, 0)].abs();
    (0..k).take_while(|&i| r[(i, i)].abs() > tol * lead).count()
}

/// Largest system size the oracle accepts.
pub const ORACLE_MAX_UNKNOWNS: usize = 200;

/// Independent minimum norm solver for small systems. The row space of `B`
/// and an orthonormal null space come from a pivoted QR of `B^T`; the
/// consistency gap from a pivoted QR of `B`. The basic solution is
/// projected onto the orthogonal complement of the null space.
pub fn oracle_solve(sys: &ConstraintSystem) -> Result<MinResult> {
    oracle_solve_with(sys, DEFAULT_TOLERANCE)
}

pub fn oracle_solve_with(sys: &ConstraintSystem, tol: f64) -> Result<MinResult> {
    let (m, n) = sys.matrix.shape();
    if n > ORACLE_MAX_UNKNOWNS {
        return Err(Error::InvalidParameter(format!(
            "oracle limited to {ORACLE_MAX_UNKNOWNS} unknowns, got {n}"
        )));
    }
    if sys.rhs.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: sys.rhs.len(),
        });
    }
    let d = &sys.rhs;
    let tolerance = tol * (1.0 + d.norm());

    // range of B and the consistency gap
    let qr_b = pivoted_qr(&sys.matrix);
    let rank_b = qr_rank(&qr_b.r, tol);
    let range = qr_b.q.columns(0, rank_b);
    let gap = (d - range * range.tr_mul(d)).norm();
    if !(gap <= tolerance) {
        return Err(Error::Infeasible { gap, tolerance });
    }

    // B^T P = Q R  =>  B = P R^T Q^T
    let bt = sys.matrix.transpose();
    let qr = pivoted_qr(&bt);
    let rank = qr_rank(&qr.r, tol);
    let q1 = qr.q.columns(0, rank).clone_owned();
    let q2 = qr.q.columns(rank, n - rank).clone_owned();
    // x = Q1 y with R11^T y = (P^T d)[..rank]
    let pd: Vec<f64> = qr.perm.iter().map(|&i| d[i]).collect();
    let mut y = DVector::<f64>::zeros(rank);
    for i in 0..rank {
        let s: f64 = (0..i).map(|j| qr.r[(j, i)] * y[j]).sum();
        y[i] = (pd[i] - s) / qr.r[(i, i)];
    }
    let basic = &q1 * y;
    let x_star = &basic - &q2 * q2.tr_mul(&basic);
    let residual = (&sys.matrix * &x_star - d).norm();
    Ok(MinResult {
        norm: x_star.norm(),
        residual,
        rank,
        consistency_gap: gap,
        x_star,
    })
}
