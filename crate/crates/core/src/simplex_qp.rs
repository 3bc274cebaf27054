//! Convex quadratic minimization over the unit simplex,
//!
//! ```text
//!     minimize   q(mu) = mu' M mu - c' mu
//!     subject to mu >= 0, sum(mu) = 1
//! ```
//!
//! where `M = A'A` is the Gram matrix of the ball centers and
//! `c_i = |a_i|^2 - r_i^2`. The solver is Frank-Wolfe with exact line
//! search; every few iterations an equality-constrained solve on the current
//! support (an active-set step) polishes the iterate, since plain
//! Frank-Wolfe only converges sublinearly near the optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SebError};
use crate::types::Instance;

/// Enumeration guard for [`grid_oracle`].
pub const GRID_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQp {
    gram: DMatrix<f64>,
    linear: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub minimizer: DVector<f64>,
    pub value: f64,
    /// Frank-Wolfe duality gap at termination; bounds `value - q*`.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// Absolute gap tolerance. `None` means `1e-10 * (1 + |q(mu0)|)`.
    pub tol_gap: Option<f64>,
    /// `None` means `200 m + 10^4`.
    pub max_iter: Option<usize>,
    /// Run the support refinement step.
    pub refine: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol_gap: None,
            max_iter: None,
            refine: true,
        }
    }
}

const REFINE_PERIOD: usize = 8;

impl SimplexQp {
    pub fn new(gram: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        let m = linear.len();
        if m == 0 || gram.shape() != (m, m) {
            return Err(SebError::InvalidGram);
        }
        if gram.iter().chain(linear.iter()).any(|v| !v.is_finite()) {
            return Err(SebError::NonFinite("simplex QP data"));
        }
        let tol = 1e-12 * (1.0 + gram.amax());
        if (&gram - gram.transpose()).amax() > tol {
            return Err(SebError::InvalidGram);
        }
        Ok(Self { gram, linear })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn objective(&self, mu: &DVector<f64>) -> f64 {
        (&self.gram * mu).dot(mu) - self.linear.dot(mu)
    }

    /// `2 M mu - c`.
    pub fn gradient(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.gram * mu * 2.0 - &self.linear
    }

    /// Frank-Wolfe gap `grad'(mu - e_j)` at the best vertex `j`.
    pub fn fw_gap(&self, mu: &DVector<f64>) -> f64 {
        let g = self.gradient(mu);
        let (_, gmin) = argmin_lowest(&g);
        (g.dot(mu) - gmin).max(0.0)
    }
}

/// `M_ij = a_i' a_j`, `c_i = |a_i|^2 - r_i^2`.
pub fn build_qp(instance: &Instance) -> SimplexQp {
    let a = crate::linalg::columns(&instance.centers());
    let gram = a.transpose() * &a;
    let gram = (&gram + gram.transpose()) * 0.5;
    let linear = DVector::from_iterator(
        instance.len(),
        instance
            .balls()
            .iter()
            .map(|b| b.center().norm_squared() - b.radius() * b.radius()),
    );
    SimplexQp { gram, linear }
}

/// Index and value of the minimum; ties go to the lowest index.
fn argmin_lowest(v: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

pub fn solve(qp: &SimplexQp, opts: &QpOptions) -> Result<QpResult> {
    let m = qp.len();
    let mut mu = DVector::from_element(m, 1.0 / m as f64);
    let tol_gap = opts
        .tol_gap
        .unwrap_or_else(|| 1e-10 * (1.0 + qp.objective(&mu).abs()));
    if tol_gap.is_nan() || tol_gap <= 0.0 {
        return Err(SebError::InvalidArgument(format!("tol_gap must be positive, got {tol_gap}")));
    }
    let max_iter = opts.max_iter.unwrap_or(200 * m + 10_000);

    // w = M mu, kept in sync with mu
    let mut w = &qp.gram * &mu;
    let mut iterations = 0;
    loop {
        let grad = &w * 2.0 - &qp.linear;
        let (j, gj) = argmin_lowest(&grad);
        let gap = (grad.dot(&mu) - gj).max(0.0);
        if gap <= tol_gap || iterations >= max_iter {
            let result = QpResult {
                value: qp.objective(&mu),
                minimizer: mu,
                gap,
                iterations,
            };
            return if gap <= tol_gap {
                Ok(result)
            } else {
                Err(SebError::NonConvergence(Box::new(result)))
            };
        }
        iterations += 1;

        // d = e_j - mu; q(mu + s d) = q(mu) - s gap + s^2 d'Md
        let mu_m_mu = w.dot(&mu);
        let curvature = qp.gram[(j, j)] - 2.0 * w[j] + mu_m_mu;
        let step = if curvature > 0.0 {
            (gap / (2.0 * curvature)).min(1.0)
        } else {
            1.0
        };
        mu *= 1.0 - step;
        mu[j] += step;
        w = w * (1.0 - step) + qp.gram.column(j) * step;

        if opts.refine && iterations % REFINE_PERIOD == 0 && refine_support(qp, &mu).map(|r| mu = r).is_some() {
            w = &qp.gram * &mu;
        }
    }
}

/// Active-set polish on the face spanned by the support of `mu`.
///
/// With `P = I - 11'/k` the projector onto `{sum d = 0}`, the reduced Newton
/// direction is `d = -P M P^+ P grad / 2`. When the reduced gradient has a
/// component in the kernel of `P M P` the face objective is unbounded along
/// it and that component is the direction instead. Each direction gets an
/// exact line search capped at the simplex boundary; hitting the boundary
/// drops a coordinate and the step repeats on the smaller face.
fn refine_support(qp: &SimplexQp, mu: &DVector<f64>) -> Option<DVector<f64>> {
    let mut current = mu.clone();
    let mut improved = false;
    for _ in 0..qp.len() {
        let support: Vec<usize> = (0..qp.len()).filter(|&i| current[i] > 0.0).collect();
        let k = support.len();
        if k < 2 {
            break;
        }
        let grad = qp.gradient(&current);
        let g_s = DVector::from_iterator(k, support.iter().map(|&i| grad[i]));
        let m_s = DMatrix::from_fn(k, k, |r, c| qp.gram[(support[r], support[c])]);
        let proj = DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64);
        let hess = &proj * &m_s * &proj;
        let hess = (&hess + hess.transpose()) * 0.5;
        let r = &proj * &g_s;

        let eig = hess.symmetric_eigen();
        let emax = eig.eigenvalues.amax();
        let cutoff = 1e-12 * emax.max(f64::MIN_POSITIVE);
        let mut newton = DVector::zeros(k);
        let mut kernel = DVector::zeros(k);
        for j in 0..k {
            let v = eig.eigenvectors.column(j);
            let coef = v.dot(&r);
            if eig.eigenvalues[j] > cutoff {
                newton -= v * (0.5 * coef / eig.eigenvalues[j]);
            } else {
                kernel += v * coef;
            }
        }
        // drop the multiple of 1 carried by kernel directions of P
        let kernel = &proj * kernel;
        let dir = if kernel.norm() > 1e-12 * (1.0 + r.norm()) {
            -kernel
        } else {
            newton
        };
        let slope = g_s.dot(&dir);
        if slope.is_nan() || slope >= 0.0 {
            break;
        }
        let curvature = (&m_s * &dir).dot(&dir);

        let mut cap = f64::INFINITY;
        let mut blocking = None;
        for (j, &i) in support.iter().enumerate() {
            if dir[j] < 0.0 {
                let t = current[i] / -dir[j];
                if t < cap {
                    cap = t;
                    blocking = Some(j);
                }
            }
        }
        let free = if curvature > 0.0 { -slope / (2.0 * curvature) } else { f64::INFINITY };
        let (step, hit) = if free < cap { (free, None) } else { (cap, blocking) };
        if !step.is_finite() {
            break;
        }
        let mut next = current.clone();
        for (j, &i) in support.iter().enumerate() {
            next[i] = (current[i] + step * dir[j]).max(0.0);
        }
        if let Some(j) = hit {
            next[support[j]] = 0.0;
        }
        next /= next.sum();
        if qp.objective(&next) > qp.objective(&current) {
            break;
        }
        current = next;
        improved = true;
        if hit.is_none() {
            break;
        }
    }
    improved.then_some(current)
}

/// Euclidean projection onto the unit simplex (sort and threshold).
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    v.map(|x| (x - tau).max(0.0))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Exhaustive minimum of `q` over the grid `{k_i / k : sum k_i = k}`.
///
/// Points are visited in lexicographic order of `(k_1, ..., k_m)` and the
/// first strict minimum wins, so the result is deterministic.
pub fn grid_oracle(qp: &SimplexQp, k: usize) -> Result<(f64, DVector<f64>)> {
    if k == 0 {
        return Err(SebError::InvalidArgument("grid resolution k must be >= 1".into()));
    }
    let m = qp.len();
    let count = binomial((k + m - 1) as u128, (m - 1) as u128);
    if count > GRID_GUARD {
        return Err(SebError::CombinatorialBlowup(count));
    }
    let mut parts = vec![0usize; m];
    let mut best = (f64::INFINITY, DVector::zeros(m));
    let mut mu = DVector::zeros(m);
    enumerate(&mut parts, 0, k, &mut |parts| {
        for (i, &p) in parts.iter().enumerate() {
            mu[i] = p as f64 / k as f64;
        }
        let v = qp.objective(&mu);
        if v < best.0 {
            best = (v, mu.clone());
        }
    });
    Ok(best)
}

fn enumerate(parts: &mut [usize], idx: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
    if idx + 1 == parts.len() {
        parts[idx] = remaining;
        visit(parts);
        return;
    }
    for p in 0..=remaining {
        parts[idx] = p;
        enumerate(parts, idx + 1, remaining - p, visit);
    }
}
