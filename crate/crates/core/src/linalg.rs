//! Small dense linear algebra: numerical rank, minimum-norm affine solution
//! sets, quadratic minimization over them and the arrowhead PSD test.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Result, SebError};
use crate::types::UnitQuadratic;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-8;

/// Stacks the vectors as columns of an `n x m` matrix.
pub fn columns(vectors: &[DVector<f64>]) -> DMatrix<f64> {
    if vectors.is_empty() {
        return DMatrix::zeros(0, 0);
    }
    DMatrix::from_columns(vectors)
}

/// Number of singular values above `tol * sigma_max * max(n, m)`.
pub fn numerical_rank(vectors: &[DVector<f64>], tol: f64) -> usize {
    let m = columns(vectors);
    matrix_rank(&m, tol)
}

pub fn matrix_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    let threshold = tol * smax * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > threshold).count()
}

/// `{x0 + N t}`: the least-squares solution set of `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSolutionSet {
    /// Minimum-norm least-squares solution.
    pub particular: DVector<f64>,
    /// Orthonormal basis of `ker(A)` as columns; zero columns when trivial.
    pub nullspace: DMatrix<f64>,
    pub residual: f64,
    pub consistent: bool,
}

impl AffineSolutionSet {
    pub fn dim(&self) -> usize {
        self.particular.len()
    }

    pub fn point(&self, t: &DVector<f64>) -> DVector<f64> {
        &self.particular + &self.nullspace * t
    }
}

pub fn solve_affine(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<AffineSolutionSet> {
    solve_affine_with(a, b, DEFAULT_RANK_TOL, DEFAULT_CONSISTENCY_TOL)
}

pub fn solve_affine_with(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rank_tol: f64,
    consistency_tol: f64,
) -> Result<AffineSolutionSet> {
    let (p, n) = a.shape();
    if b.len() != p {
        return Err(SebError::DimensionMismatch {
            expected: p,
            actual: b.len(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(SebError::NonFinite("affine system"));
    }
    if n == 0 {
        let residual = b.norm();
        return Ok(AffineSolutionSet {
            particular: DVector::zeros(0),
            nullspace: DMatrix::zeros(0, 0),
            residual,
            consistent: residual <= consistency_tol * (1.0 + b.norm()),
        });
    }

    // Zero rows leave the least-squares problem unchanged and force a full
    // n x n right factor, which the kernel basis needs.
    let rows = p.max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (p, n)).copy_from(a);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, p).copy_from(b);

    let svd = SVD::new(padded, true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let threshold = rank_tol * smax * rows as f64;

    let mut particular = DVector::zeros(n);
    let mut kernel = Vec::new();
    for k in 0..n {
        let s = sv[k];
        let vk = v_t.row(k).transpose();
        if smax > 0.0 && s > threshold {
            let coef = u.column(k).dot(&rhs) / s;
            particular += vk * coef;
        } else {
            kernel.push(vk);
        }
    }
    let nullspace = if kernel.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&kernel)
    };
    let residual = (a * &particular - b).norm();
    Ok(AffineSolutionSet {
        particular,
        nullspace,
        residual,
        consistent: residual <= consistency_tol * (1.0 + b.norm()),
    })
}

/// Minimizes `q` over `{x0 + N t}`. With orthonormal `N` the minimizer is
/// `t* = N'(a - x0)`.
pub fn min_quadratic_on_affine(
    q: &UnitQuadratic,
    s: &AffineSolutionSet,
) -> Result<(f64, DVector<f64>)> {
    if !s.consistent {
        return Err(SebError::InconsistentSystem(s.residual));
    }
    if q.dim() != s.dim() {
        return Err(SebError::DimensionMismatch {
            expected: q.dim(),
            actual: s.dim(),
        });
    }
    let argmin = if s.nullspace.ncols() == 0 {
        s.particular.clone()
    } else {
        let t = s.nullspace.transpose() * (q.a() - &s.particular);
        s.point(&t)
    };
    Ok((q.eval_unchecked(&argmin), argmin))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub psd: bool,
    /// Worst raw violation among `-alpha`, `-beta`, `|b|^2 - alpha beta`; zero when none.
    pub residual: f64,
}

/// PSD test for `[[alpha I, b], [b', beta]]`.
///
/// Closed form: PSD iff `alpha >= 0`, `beta >= 0` and `|b|^2 <= alpha beta`.
pub fn arrowhead_psd(alpha: f64, b: &DVector<f64>, beta: f64, tol: f64) -> PsdCheck {
    let b2 = b.norm_squared();
    let residual = (-alpha).max(-beta).max(b2 - alpha * beta).max(0.0);
    let psd = alpha >= -tol && beta >= -tol && b2 <= (alpha + tol) * (beta + tol) + tol;
    PsdCheck { psd, residual }
}
