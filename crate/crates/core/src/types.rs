//! Domain model shared by the solver, the certificate builder and the
//! joint numerical range lab.
//!
//! A ball `B(a, r)` and the quadratic `g(x) = x'x - 2a'x + theta` are two
//! views of the same object: `B(a, r) = {x : g(x) <= 0}` with
//! `theta = |a|^2 - r^2`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SebError};

/// Base relative tolerance; scaled by `1 + magnitude` at each use site.
pub const BASE_TOL: f64 = 1e-9;

/// `base * (1 + magnitude)`.
#[inline]
pub fn scaled_tol(base: f64, magnitude: f64) -> f64 {
    base * (1.0 + magnitude.abs())
}

fn check_finite(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SebError::NonFinite(what))
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(SebError::DimensionMismatch { expected, actual })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: DVector<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        check_finite(&center, "ball center")?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(SebError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn from_slice(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(DVector::from_column_slice(center), radius)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn to_quadratic(&self) -> UnitQuadratic {
        ball_to_quadratic(self)
    }
}

/// The quadratic `x -> x'x - 2a'x + theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitQuadratic {
    a: DVector<f64>,
    theta: f64,
}

impl UnitQuadratic {
    pub fn new(a: DVector<f64>, theta: f64) -> Result<Self> {
        check_finite(&a, "quadratic linear term")?;
        if !theta.is_finite() {
            return Err(SebError::NonFinite("quadratic constant"));
        }
        Ok(Self { a, theta })
    }

    pub fn from_slice(a: &[f64], theta: f64) -> Result<Self> {
        Self::new(DVector::from_column_slice(a), theta)
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.a.len(), x.len())?;
        Ok(self.eval_unchecked(x))
    }

    /// Callers guarantee `x.len() == self.dim()`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &DVector<f64>) -> f64 {
        x.dot(x) - 2.0 * self.a.dot(x) + self.theta
    }

    /// `|a|^2 - theta`, the squared radius of the zero sublevel set.
    pub fn squared_radius(&self) -> f64 {
        self.a.norm_squared() - self.theta
    }

    pub fn to_ball(&self) -> Result<Ball> {
        let r2 = self.squared_radius();
        if r2 <= 0.0 {
            return Err(SebError::NotABall(r2));
        }
        Ball::new(self.a.clone(), r2.sqrt())
    }
}

pub fn ball_to_quadratic(b: &Ball) -> UnitQuadratic {
    UnitQuadratic {
        a: b.center.clone(),
        theta: b.center.norm_squared() - b.radius * b.radius,
    }
}

pub fn eval_quadratic(q: &UnitQuadratic, x: &DVector<f64>) -> Result<f64> {
    q.eval(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    dimension: usize,
    balls: Vec<Ball>,
}

impl Instance {
    pub fn new(dimension: usize, balls: Vec<Ball>) -> Result<Self> {
        if dimension == 0 {
            return Err(SebError::ZeroDimension);
        }
        if balls.is_empty() {
            return Err(SebError::NoBalls);
        }
        for b in &balls {
            check_dim(dimension, b.dim())?;
        }
        Ok(Self { dimension, balls })
    }

    /// Builds an instance from parallel lists of centers and radii.
    pub fn from_parts(centers: &[Vec<f64>], radii: &[f64]) -> Result<Self> {
        if centers.len() != radii.len() {
            return Err(SebError::DimensionMismatch {
                expected: centers.len(),
                actual: radii.len(),
            });
        }
        let dimension = centers.first().map(|c| c.len()).ok_or(SebError::NoBalls)?;
        let balls = centers
            .iter()
            .zip(radii)
            .map(|(c, &r)| Ball::from_slice(c, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dimension, balls)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn centers(&self) -> Vec<DVector<f64>> {
        self.balls.iter().map(|b| b.center.clone()).collect()
    }

    pub fn quadratics(&self) -> Vec<UnitQuadratic> {
        self.balls.iter().map(ball_to_quadratic).collect()
    }

    /// Magnitude of the data: `max_i max(|a_i|^2, r_i^2)`.
    pub fn scale(&self) -> f64 {
        self.balls
            .iter()
            .map(|b| b.center.norm_squared().max(b.radius * b.radius))
            .fold(0.0, f64::max)
    }

    /// `max_i g_i(x)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dimension, x.len())?;
        Ok(self
            .balls
            .iter()
            .map(|b| (x - &b.center).norm_squared() - b.radius * b.radius)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn translated(&self, t: &DVector<f64>) -> Result<Self> {
        check_dim(self.dimension, t.len())?;
        let balls = self
            .balls
            .iter()
            .map(|b| Ball::new(&b.center + t, b.radius))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dimension, balls)
    }

    /// Applies `x -> q x` to every center; `q` is expected orthogonal.
    pub fn transformed(&self, q: &nalgebra::DMatrix<f64>) -> Result<Self> {
        check_dim(self.dimension, q.ncols())?;
        check_dim(self.dimension, q.nrows())?;
        let balls = self
            .balls
            .iter()
            .map(|b| Ball::new(q * &b.center, b.radius))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dimension, balls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    /// Minimality is certified: the shifted-rank condition holds.
    CertifiedOptimal,
    /// Containment is certified, minimality is not (rank = n < m).
    UpperBoundOnly,
    /// The intersection is empty (no Slater point).
    EmptyInterior,
    /// The intersection is a single point; the ball has radius 0.
    DegeneratePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// rank{a_i} < n.
    ConvexCase,
    /// rank{a_i} = n = m.
    CriticalCase,
    /// rank{a_i} = n < m.
    Unsupported,
}

impl Regime {
    pub fn from_rank(rank: usize, n: usize, m: usize) -> Self {
        if rank < n {
            Regime::ConvexCase
        } else if m == n {
            Regime::CriticalCase
        } else {
            Regime::Unsupported
        }
    }

    pub fn is_supported(self) -> bool {
        !matches!(self, Regime::Unsupported)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRegime {
    pub rank_centers: usize,
    pub regime: Regime,
    /// rank{a_i - a} for the solved center `a`; filled after solving.
    pub rank_shifted: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub center: DVector<f64>,
    pub radius: f64,
    pub multipliers: DVector<f64>,
    pub qp_value: f64,
    pub status: Status,
    pub regime: RankRegime,
    pub fw_gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub multipliers: DVector<f64>,
    /// `sum(mu) - 1`, the diagonal block coefficient.
    pub alpha: f64,
    /// `a - sum(mu_i a_i)`, the off-diagonal column.
    pub offdiag: DVector<f64>,
    /// `r^2 - |a|^2 + sum(mu_i (|a_i|^2 - r_i^2))`, the corner entry.
    pub beta: f64,
    pub psd_ok: bool,
    pub residual: f64,
}
