//! Joint numerical range laboratory.
//!
//! For `G = (-g, g_1, ..., g_m)` with unit quadratics `g, g_i`, the range
//! `G(R^n)` is convex exactly when rank{a_i - a} < n. In the critical case
//! rank{a_i - a} = n = m, the linear map `H(z) = (z_1 + z_0, ..., z_m + z_0, -z_0)`
//! sends `G(R^n)` onto the graph of a strictly convex quadratic `g_bar`, so
//! the pairwise-combination set `G(R^n)•` becomes `H^{-1}` of its epigraph.
//!
//! Membership in `G(R^n)` is decided exactly: `g_i - g` is affine, so the
//! fibre over `z` is the solution set of a linear system intersected with a
//! level set of `g`, and `g` restricted to an affine set is a strictly convex
//! quadratic with range `[min, inf)` (or a single value on a point).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Result, SebError};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::types::{ball_to_quadratic, Ball, Instance, Regime, Solution, UnitQuadratic};

/// Tolerance for the scalar level test `min g <= -z_0`.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    target: UnitQuadratic,
    components: Vec<UnitQuadratic>,
    dimension: usize,
}

impl QuadraticMap {
    pub fn new(target: UnitQuadratic, components: Vec<UnitQuadratic>) -> Result<Self> {
        if components.is_empty() {
            return Err(SebError::NoBalls);
        }
        let dimension = target.dim();
        for c in &components {
            if c.dim() != dimension {
                return Err(SebError::DimensionMismatch {
                    expected: dimension,
                    actual: c.dim(),
                });
            }
        }
        Ok(Self {
            target,
            components,
            dimension,
        })
    }

    pub fn from_instance(instance: &Instance, target: &Ball) -> Result<Self> {
        Self::new(ball_to_quadratic(target), instance.quadratics())
    }

    /// Target `|x - a|^2 - r^2` from a solved instance.
    pub fn from_solution(instance: &Instance, solution: &Solution) -> Result<Self> {
        Self::new(crate::solver::solution_quadratic(solution), instance.quadratics())
    }

    pub fn target(&self) -> &UnitQuadratic {
        &self.target
    }

    pub fn components(&self) -> &[UnitQuadratic] {
        &self.components
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of components `m`; the map has `m + 1` outputs.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn with_target(&self, target: UnitQuadratic) -> Result<Self> {
        Self::new(target, self.components.clone())
    }

    /// rank{a_i - a}.
    pub fn shifted_rank(&self, rank_tol: f64) -> usize {
        let shifted: Vec<_> = self
            .components
            .iter()
            .map(|c| c.a() - self.target.a())
            .collect();
        linalg::numerical_rank(&shifted, rank_tol)
    }

    pub fn regime(&self) -> Regime {
        Regime::from_rank(self.shifted_rank(DEFAULT_RANK_TOL), self.dimension, self.len())
    }

    /// The `m x n` matrix with rows `-2 (a_i - a)'`.
    fn affine_part(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dimension, |i, j| {
            -2.0 * (self.components[i].a()[j] - self.target.a()[j])
        })
    }

    /// `theta_i - theta`.
    fn theta_hat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.components.iter().map(|c| c.theta() - self.target.theta()),
        )
    }

    /// Default sampling frame: centroid of the component centers and three
    /// times their spread.
    pub fn sampling_frame(&self) -> (DVector<f64>, f64) {
        let m = self.len() as f64;
        let centroid = self
            .components
            .iter()
            .fold(DVector::zeros(self.dimension), |acc, c| acc + c.a())
            / m;
        let spread = self
            .components
            .iter()
            .map(|c| (c.a() - &centroid).norm())
            .fold(0.0, f64::max);
        let spread = if spread > 0.0 { spread } else { 1.0 };
        (centroid, 3.0 * spread)
    }
}

fn check_len(expected: usize, z: &DVector<f64>) -> Result<()> {
    if z.len() == expected {
        Ok(())
    } else {
        Err(SebError::DimensionMismatch {
            expected,
            actual: z.len(),
        })
    }
}

/// `(-g(x), g_1(x), ..., g_m(x))`.
pub fn eval_map(map: &QuadraticMap, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(map.dimension, x)?;
    let mut z = DVector::zeros(map.len() + 1);
    z[0] = -map.target.eval_unchecked(x);
    for (i, c) in map.components.iter().enumerate() {
        z[i + 1] = c.eval_unchecked(x);
    }
    Ok(z)
}

/// `z_0 < 0` and `z_i <= 0`; exact comparisons.
pub fn in_lambda(z: &DVector<f64>) -> bool {
    !z.is_empty() && z[0] < 0.0 && z.iter().skip(1).all(|&v| v <= 0.0)
}

/// `(z_1 + z_0, ..., z_m + z_0, -z_0)`.
pub fn h_transform(z: &DVector<f64>) -> DVector<f64> {
    let m = z.len() - 1;
    let z0 = z[0];
    DVector::from_fn(m + 1, |i, _| if i < m { z[i + 1] + z0 } else { -z0 })
}

pub fn h_inverse(y: &DVector<f64>) -> DVector<f64> {
    let m = y.len() - 1;
    let z0 = -y[m];
    DVector::from_fn(m + 1, |i, _| if i == 0 { z0 } else { y[i - 1] - z0 })
}

/// Data of the critical-case flattening `H(G(x)) = (y, g_bar(y))`,
/// `y = A x + theta_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct HData {
    /// Rows `-2 (a_i - a)'`.
    pub a: DMatrix<f64>,
    pub theta_hat: DVector<f64>,
    /// `A^{-T} A^{-1}`.
    pub b: DMatrix<f64>,
    pub a_bar: DVector<f64>,
    pub theta_bar: f64,
}

impl HData {
    /// `g_bar(y) = y'By - 2 a_bar'y + theta_bar`.
    pub fn g_bar(&self, y: &DVector<f64>) -> f64 {
        (&self.b * y).dot(y) - 2.0 * self.a_bar.dot(y) + self.theta_bar
    }

    /// `A x + theta_hat`.
    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.theta_hat
    }

    /// Epigraph test for `z` against `H(G)• = epi(g_bar)`.
    pub fn bullet_verdict(&self, z: &DVector<f64>) -> Result<MembershipVerdict> {
        check_len(self.theta_hat.len() + 1, z)?;
        let hz = h_transform(z);
        let m = self.theta_hat.len();
        let y = hz.rows(0, m).into_owned();
        let t = hz[m];
        let value = self.g_bar(&y);
        let margin = value - t;
        Ok(MembershipVerdict {
            member: margin <= MEMBERSHIP_TOL * (1.0 + t.abs()),
            witness: None,
            margin,
        })
    }
}

pub fn build_h_data(map: &QuadraticMap) -> Result<HData> {
    let (n, m) = (map.dimension, map.len());
    let rank = map.shifted_rank(DEFAULT_RANK_TOL);
    if !(rank == n && m == n) {
        return Err(SebError::SingularA { rank, n, m });
    }
    let a = map.affine_part();
    let inv = a
        .clone()
        .try_inverse()
        .ok_or(SebError::SingularA { rank, n, m })?;
    let theta_hat = map.theta_hat();
    let b = inv.transpose() * &inv;
    let b = (&b + b.transpose()) * 0.5;
    let target_a = map.target.a();
    let a_bar = &b * &theta_hat + inv.transpose() * target_a;
    let theta_bar =
        (&b * &theta_hat).dot(&theta_hat) + 2.0 * target_a.dot(&(&inv * &theta_hat)) + map.target.theta();
    let data = HData {
        a,
        theta_hat,
        b,
        a_bar,
        theta_bar,
    };

    // g_bar(A x + theta_hat) must reproduce g(x)
    let (center, radius) = map.sampling_frame();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eb);
    for _ in 0..100 {
        let x = gaussian_point(&mut rng, &center, radius);
        let gx = map.target.eval_unchecked(&x);
        let gb = data.g_bar(&data.lift(&x));
        if (gb - gx).abs() > 1e-8 * (1.0 + gx.abs() + x.norm_squared()) {
            return Err(SebError::ValidationFailure(format!(
                "g_bar(Ax + theta_hat) = {gb:e} but g(x) = {gx:e}"
            )));
        }
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVerdict {
    pub member: bool,
    /// A point `x` with `G(x) = z`, for positive verdicts on `G(R^n)`.
    pub witness: Option<DVector<f64>>,
    /// For `G`: `min g - (-z_0)` over the fibre. For `G•`: `g_bar(y*) - t`.
    /// Nonpositive means member.
    pub margin: f64,
}

pub fn membership_g(map: &QuadraticMap, z: &DVector<f64>) -> Result<MembershipVerdict> {
    check_len(map.len() + 1, z)?;
    let z0 = z[0];
    // g_i(x) - g(x) = -2(a_i - a)'x + theta_i - theta = z_i + z_0
    let rhs = DVector::from_fn(map.len(), |i, _| z[i + 1] + z0) - map.theta_hat();
    let set = linalg::solve_affine(&map.affine_part(), &rhs)?;
    let slack = MEMBERSHIP_TOL * (1.0 + z0.abs());
    let level = -z0;

    let (gmin, argmin) = if set.consistent {
        linalg::min_quadratic_on_affine(&map.target, &set)?
    } else {
        let x = set.particular.clone();
        (map.target.eval_unchecked(&x), x)
    };
    let margin = gmin - level;
    if !set.consistent {
        return Ok(MembershipVerdict {
            member: false,
            witness: None,
            margin,
        });
    }
    if set.nullspace.ncols() == 0 {
        let member = margin.abs() <= slack;
        return Ok(MembershipVerdict {
            member,
            witness: member.then_some(argmin),
            margin,
        });
    }
    if margin > slack {
        return Ok(MembershipVerdict {
            member: false,
            witness: None,
            margin,
        });
    }
    // along a unit kernel direction d, g(x* + s d) = gmin + s^2
    let s = (level - gmin).max(0.0).sqrt();
    let witness = argmin + set.nullspace.column(0) * s;
    Ok(MembershipVerdict {
        member: true,
        witness: Some(witness),
        margin,
    })
}

pub fn membership_g_bullet(map: &QuadraticMap, z: &DVector<f64>) -> Result<MembershipVerdict> {
    check_len(map.len() + 1, z)?;
    match map.regime() {
        Regime::ConvexCase => membership_g(map, z),
        Regime::CriticalCase => build_h_data(map)?.bullet_verdict(z),
        Regime::Unsupported => Err(SebError::UnsupportedRegime),
    }
}

/// `lambda p + (1 - lambda) q`.
pub fn bullet_combine(p: &DVector<f64>, q: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SebError::LambdaOutOfRange(lambda));
    }
    check_len(p.len(), q)?;
    Ok(p * lambda + q * (1.0 - lambda))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub samples: usize,
    pub seed: u64,
    /// Sampling center; defaults to the centroid of the component centers.
    pub center: Option<DVector<f64>>,
    /// Gaussian scale; defaults to three times the spread of the centers.
    pub radius: Option<f64>,
}

impl ProbeOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            center: None,
            radius: None,
        }
    }

    fn frame(&self, map: &QuadraticMap) -> (DVector<f64>, f64) {
        let (c, r) = map.sampling_frame();
        (
            self.center.clone().unwrap_or(c),
            self.radius.unwrap_or(r),
        )
    }
}

/// `z = lambda G(x) + (1 - lambda) G(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: f64,
    pub z: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub seed: u64,
    pub samples: usize,
    pub radius: f64,
    /// Combinations that fall outside `G(R^n)`; each one proves non-convexity.
    pub counterexamples: Vec<Combination>,
}

fn gaussian_point(rng: &mut impl Rng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    DVector::from_fn(center.len(), |i, _| {
        center[i] + radius * rng.sample::<f64, _>(StandardNormal)
    })
}

/// One independent stream per sample index, so results do not depend on
/// how rayon schedules the work.
fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn combination(map: &QuadraticMap, x: DVector<f64>, y: DVector<f64>, lambda: f64) -> Result<Combination> {
    let z = bullet_combine(&eval_map(map, &x)?, &eval_map(map, &y)?, lambda)?;
    Ok(Combination { x, y, lambda, z })
}

pub fn convexity_probe(map: &QuadraticMap, opts: &ProbeOptions) -> Result<ConvexityReport> {
    convexity_probe_with_pairs(map, opts, &[])
}

/// Like [`convexity_probe`], but checks the given `(x, y, lambda)` triples
/// before the random ones.
pub fn convexity_probe_with_pairs(
    map: &QuadraticMap,
    opts: &ProbeOptions,
    pairs: &[(DVector<f64>, DVector<f64>, f64)],
) -> Result<ConvexityReport> {
    let (center, radius) = opts.frame(map);
    check_len(map.dimension, &center)?;
    let not_member = |c: Combination| -> Result<Option<Combination>> {
        Ok((!membership_g(map, &c.z)?.member).then_some(c))
    };
    let mut counterexamples = Vec::new();
    for (x, y, lambda) in pairs {
        if let Some(c) = not_member(combination(map, x.clone(), y.clone(), *lambda)?)? {
            counterexamples.push(c);
        }
    }
    let random: Vec<Option<Combination>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(opts.seed, i);
            let x = gaussian_point(&mut rng, &center, radius);
            let y = gaussian_point(&mut rng, &center, radius);
            let lambda: f64 = rng.random_range(0.0..=1.0);
            not_member(combination(map, x, y, lambda)?)
        })
        .collect::<Result<_>>()?;
    counterexamples.extend(random.into_iter().flatten());
    Ok(ConvexityReport {
        seed: opts.seed,
        samples: opts.samples,
        radius,
        counterexamples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeHit {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub seed: u64,
    pub samples: usize,
    pub radius: f64,
    /// Sampled points of `G(R^n)` inside the negative orthant.
    pub g_hits_lambda: Vec<RangeHit>,
    /// Sampled points of `G(R^n)•` inside the negative orthant.
    pub bullet_hits_lambda: Vec<Combination>,
}

impl SeparationReport {
    /// Empty `G ∩ Λ` sample implies empty `G• ∩ Λ` sample.
    pub fn implication_holds(&self) -> bool {
        !self.g_hits_lambda.is_empty() || self.bullet_hits_lambda.is_empty()
    }
}

pub fn separation_probe(map: &QuadraticMap, opts: &ProbeOptions) -> Result<SeparationReport> {
    if !map.regime().is_supported() {
        return Err(SebError::UnsupportedRegime);
    }
    let (center, radius) = opts.frame(map);
    check_len(map.dimension, &center)?;
    let hits: Vec<(Option<RangeHit>, Option<Combination>)> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(opts.seed, i);
            let x = gaussian_point(&mut rng, &center, radius);
            let z = eval_map(map, &x)?;
            let g_hit = in_lambda(&z).then_some(RangeHit { x, z });
            let u = gaussian_point(&mut rng, &center, radius);
            let v = gaussian_point(&mut rng, &center, radius);
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let c = combination(map, u, v, lambda)?;
            let b_hit = in_lambda(&c.z).then_some(c);
            Ok((g_hit, b_hit))
        })
        .collect::<Result<_>>()?;
    let (g, b): (Vec<_>, Vec<_>) = hits.into_iter().unzip();
    Ok(SeparationReport {
        seed: opts.seed,
        samples: opts.samples,
        radius,
        g_hits_lambda: g.into_iter().flatten().collect(),
        bullet_hits_lambda: b.into_iter().flatten().collect(),
    })
}

/// Points `G(x)` for Gaussian `x` in the probe frame, in index order.
pub fn sample_range(map: &QuadraticMap, opts: &ProbeOptions) -> Result<Vec<RangeHit>> {
    let (center, radius) = opts.frame(map);
    check_len(map.dimension, &center)?;
    (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(opts.seed, i);
            let x = gaussian_point(&mut rng, &center, radius);
            let z = eval_map(map, &x)?;
            Ok(RangeHit { x, z })
        })
        .collect()
}

/// `x -> linear x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            linear: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }

    /// The matrix of [`h_transform`] on `R^{m+1}`.
    pub fn h_transform(m: usize) -> Self {
        let mut linear = DMatrix::zeros(m + 1, m + 1);
        for i in 0..m {
            linear[(i, 0)] = 1.0;
            linear[(i, i + 1)] = 1.0;
        }
        linear[(m, 0)] = -1.0;
        Self {
            linear,
            offset: DVector::zeros(m + 1),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.offset
    }
}

/// Checks `L(lambda p_i + (1 - lambda) p_j) = lambda L(p_i) + (1 - lambda) L(p_j)`
/// for each `(i, j, lambda)`.
pub fn affine_invariance_check(
    points: &[DVector<f64>],
    l: &AffineMap,
    combos: &[(usize, usize, f64)],
) -> Result<bool> {
    let d = l.linear.nrows();
    if l.linear.ncols() != d || l.offset.len() != d {
        return Err(SebError::InvalidArgument("affine map must be square".into()));
    }
    if linalg::matrix_rank(&l.linear, DEFAULT_RANK_TOL) < d {
        return Err(SebError::SingularTransform);
    }
    let lnorm = l.linear.norm();
    for &(i, j, lambda) in combos {
        let (p, q) = match (points.get(i), points.get(j)) {
            (Some(p), Some(q)) => (p, q),
            _ => return Err(SebError::InvalidArgument(format!("combo index ({i}, {j}) out of range"))),
        };
        check_len(d, p)?;
        check_len(d, q)?;
        let lhs = l.apply(&bullet_combine(p, q, lambda)?);
        let rhs = bullet_combine(&l.apply(p), &l.apply(q), lambda)?;
        let scale = 1.0 + lnorm * p.norm().max(q.norm()) + l.offset.norm();
        if (lhs - rhs).norm() > 1e-9 * scale {
            return Ok(false);
        }
    }
    Ok(true)
}
