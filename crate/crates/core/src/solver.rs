//! Smallest ball enclosing `B(a_1, r_1) ∩ ... ∩ B(a_m, r_m)`.
//!
//! For `mu` on the unit simplex the identity
//! `sum(mu_i g_i) = g` holds with `a = sum(mu_i a_i)` and
//! `r^2 = q(mu) = |sum(mu_i a_i)|^2 - sum(mu_i (|a_i|^2 - r_i^2))`,
//! so every `mu` yields an enclosing ball. Minimizing `q` over the simplex
//! gives the smallest one whenever rank{a_i} < n, or rank{a_i} = n = m.
//! Outside that regime the ball still encloses but minimality is not
//! certified.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SebError};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::simplex_qp::{self, QpOptions};
use crate::types::{
    scaled_tol, Certificate, Instance, RankRegime, Regime, Solution, Status, UnitQuadratic,
    BASE_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub qp: QpOptions,
    pub rank_tol: f64,
    /// Base for the degenerate-point threshold `base * (1 + scale)`.
    pub degenerate_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            qp: QpOptions::default(),
            rank_tol: DEFAULT_RANK_TOL,
            degenerate_tol: BASE_TOL,
        }
    }
}

pub fn classify(instance: &Instance) -> RankRegime {
    classify_with(instance, DEFAULT_RANK_TOL)
}

pub fn classify_with(instance: &Instance, rank_tol: f64) -> RankRegime {
    let rank = linalg::numerical_rank(&instance.centers(), rank_tol);
    RankRegime {
        rank_centers: rank,
        regime: Regime::from_rank(rank, instance.dimension(), instance.len()),
        rank_shifted: None,
    }
}

/// rank{a_i - a}.
pub fn shifted_rank(instance: &Instance, center: &DVector<f64>, rank_tol: f64) -> usize {
    let shifted: Vec<_> = instance.balls().iter().map(|b| b.center() - center).collect();
    linalg::numerical_rank(&shifted, rank_tol)
}

pub fn solve_seb(instance: &Instance, opts: &SolveOptions) -> Result<Solution> {
    let mut regime = classify_with(instance, opts.rank_tol);
    let qp = simplex_qp::build_qp(instance);
    let res = simplex_qp::solve(&qp, &opts.qp)?;

    let mu = res.minimizer;
    let center = weighted_center(instance, &mu);
    let q = res.value;
    let tol = scaled_tol(opts.degenerate_tol, instance.scale());

    let rank_shifted = shifted_rank(instance, &center, opts.rank_tol);
    regime.rank_shifted = Some(rank_shifted);
    let (n, m) = (instance.dimension(), instance.len());

    let status = if q < -tol {
        Status::EmptyInterior
    } else if q <= tol {
        Status::DegeneratePoint
    } else if rank_shifted < n || m == n {
        Status::CertifiedOptimal
    } else {
        Status::UpperBoundOnly
    };
    let radius = if status == Status::EmptyInterior {
        0.0
    } else {
        q.max(0.0).sqrt()
    };

    Ok(Solution {
        center,
        radius,
        multipliers: mu,
        qp_value: q,
        status,
        regime,
        fw_gap: res.gap,
        iterations: res.iterations,
    })
}

/// `sum(mu_i a_i)`.
pub fn weighted_center(instance: &Instance, mu: &DVector<f64>) -> DVector<f64> {
    instance
        .balls()
        .iter()
        .zip(mu.iter())
        .fold(DVector::zeros(instance.dimension()), |acc, (b, &w)| {
            acc + b.center() * w
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorCheck {
    pub nonempty: bool,
    pub slater_point: Option<DVector<f64>>,
    /// `max_i g_i(a)` at the solution center.
    pub max_violation: f64,
}

/// Nonempty interior iff `q* > 0`, because `min_x max_i g_i(x) = -q*`.
/// The solved center attains that minimax value and serves as the Slater
/// point.
pub fn check_interior(instance: &Instance, solution: &Solution) -> Result<InteriorCheck> {
    let a = &solution.center;
    let max_g = instance.max_violation(a)?;
    let q = solution.qp_value;
    let scale = instance.scale();
    let tol = scaled_tol(BASE_TOL, scale);
    // max_i g_i(a) + q* equals the Frank-Wolfe gap at mu
    let slack = tol + solution.fw_gap;
    if (max_g + q).abs() > slack {
        return Err(SebError::ValidationFailure(format!(
            "max_i g_i(a) = {max_g:e} does not match -q* = {:e}",
            -q
        )));
    }
    let nonempty = q > tol;
    Ok(InteriorCheck {
        nonempty,
        slater_point: nonempty.then(|| a.clone()),
        max_violation: max_g,
    })
}

/// Multipliers, center and radius -> entries of the arrowhead LMI.
pub fn build_certificate(instance: &Instance, solution: &Solution) -> Result<Certificate> {
    if solution.status == Status::EmptyInterior {
        return Err(SebError::EmptyInterior);
    }
    let mu = &solution.multipliers;
    if mu.len() != instance.len() {
        return Err(SebError::DimensionMismatch {
            expected: instance.len(),
            actual: mu.len(),
        });
    }
    let a = &solution.center;
    let alpha = mu.sum() - 1.0;
    let offdiag = a - weighted_center(instance, mu);
    let weighted_theta: f64 = instance
        .balls()
        .iter()
        .zip(mu.iter())
        .map(|(b, &w)| w * (b.center().norm_squared() - b.radius() * b.radius()))
        .sum();
    let beta = solution.radius * solution.radius - a.norm_squared() + weighted_theta;
    let tol = scaled_tol(BASE_TOL, instance.scale());
    let check = linalg::arrowhead_psd(alpha, &offdiag, beta, tol);
    Ok(Certificate {
        multipliers: mu.clone(),
        alpha,
        offdiag,
        beta,
        psd_ok: check.psd,
        residual: check.residual,
    })
}

/// `g(x) = |x - a|^2 - q(mu)`, which is `|x - a|^2 - r^2` unless the
/// intersection is empty.
pub fn solution_quadratic(solution: &Solution) -> UnitQuadratic {
    let a = solution.center.clone();
    let theta = a.norm_squared() - solution.qp_value;
    UnitQuadratic::new(a, theta).expect("solution center is finite")
}

/// `sum(mu_i g_i(x)) - g(x)`; identically zero at an exact solution.
pub fn identity_residual(instance: &Instance, solution: &Solution, x: &DVector<f64>) -> Result<f64> {
    let g = solution_quadratic(solution);
    let target = g.eval(x)?;
    let combo: f64 = instance
        .quadratics()
        .iter()
        .zip(solution.multipliers.iter())
        .map(|(q, &w)| w * q.eval_unchecked(x))
        .sum();
    Ok(combo - target)
}

/// Largest `|identity_residual(x)| / (1 + |x|^2)` over `count` Gaussian
/// points around the center, scaled to cover every ball.
pub fn max_identity_residual(instance: &Instance, solution: &Solution, count: usize, seed: u64) -> Result<f64> {
    let scale = instance
        .balls()
        .iter()
        .map(|b| (b.center() - &solution.center).norm() + b.radius())
        .fold(1.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let x = solution.center.map(|c| c + scale * rng.sample::<f64, _>(StandardNormal));
        let r = identity_residual(instance, solution, &x)?.abs() / (1.0 + x.norm_squared());
        worst = worst.max(r);
    }
    Ok(worst)
}
