//! Independent checks on the solver: samples of the ball intersection, a
//! point-cloud enclosing ball with a dual lower bound, and a grid minimizer
//! of `max_i g_i`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SebError};
use crate::solver::{self, SolveOptions};
use crate::types::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMethod {
    Rejection,
    HitAndRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    pub points: Vec<DVector<f64>>,
    pub seed: u64,
    pub method: SampleMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    pub burn_in: usize,
    pub thinning: usize,
    pub chains: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            burn_in: 100,
            thinning: 5,
            chains: 4,
        }
    }
}

const STALL_CHECK: u64 = 1_000_000;

pub fn sample_intersection(
    instance: &Instance,
    count: usize,
    seed: u64,
    method: SampleMethod,
) -> Result<SampleCloud> {
    sample_intersection_with(instance, count, seed, method, &SamplerOptions::default())
}

/// Rejection sampling falls back to hit-and-run when it stalls; the
/// returned cloud records the method actually used.
pub fn sample_intersection_with(
    instance: &Instance,
    count: usize,
    seed: u64,
    method: SampleMethod,
    opts: &SamplerOptions,
) -> Result<SampleCloud> {
    let solution = solver::solve_seb(instance, &SolveOptions::default())?;
    let interior = solver::check_interior(instance, &solution)?;
    let start = interior.slater_point.ok_or(SebError::EmptyInterior)?;
    if method == SampleMethod::Rejection {
        match rejection_sample(instance, count, seed) {
            Err(SebError::RejectionStall) => {}
            other => return other,
        }
    }
    hit_and_run(instance, &start, count, seed, opts)
}

/// Uniform proposals in the bounding box of the smallest ball.
pub fn rejection_sample(instance: &Instance, count: usize, seed: u64) -> Result<SampleCloud> {
    let smallest = instance
        .balls()
        .iter()
        .min_by(|a, b| a.radius().total_cmp(&b.radius()))
        .expect("instance has balls");
    let (c, r) = (smallest.center(), smallest.radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut tries: u64 = 0;
    let mut accepted_since_check: u64 = 0;
    while points.len() < count {
        let x = DVector::from_fn(c.len(), |i, _| c[i] + r * rng.random_range(-1.0..=1.0));
        tries += 1;
        if instance.balls().iter().all(|b| (&x - b.center()).norm_squared() <= b.radius() * b.radius()) {
            points.push(x);
            accepted_since_check += 1;
        }
        if tries.is_multiple_of(STALL_CHECK) {
            if accepted_since_check == 0 {
                return Err(SebError::RejectionStall);
            }
            accepted_since_check = 0;
        }
    }
    Ok(SampleCloud {
        points,
        seed,
        method: SampleMethod::Rejection,
    })
}

/// Feasible step interval `[lo, hi]` of `x + t d` inside every ball, `|d| = 1`.
fn chord(instance: &Instance, x: &DVector<f64>, d: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for b in instance.balls() {
        // t^2 + 2 t d'(x - a) + |x - a|^2 - r^2 <= 0
        let diff = x - b.center();
        let half_b = d.dot(&diff);
        let c = diff.norm_squared() - b.radius() * b.radius();
        let disc = (half_b * half_b - c).max(0.0);
        let root = disc.sqrt();
        lo = lo.max(-half_b - root);
        hi = hi.min(-half_b + root);
    }
    (lo, hi)
}

pub fn hit_and_run(
    instance: &Instance,
    start: &DVector<f64>,
    count: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<SampleCloud> {
    if start.len() != instance.dimension() {
        return Err(SebError::DimensionMismatch {
            expected: instance.dimension(),
            actual: start.len(),
        });
    }
    if instance.max_violation(start)? >= 0.0 {
        return Err(SebError::EmptyInterior);
    }
    let chains = opts.chains.max(1).min(count.max(1));
    let thinning = opts.thinning.max(1);
    let per_chain: Vec<usize> = (0..chains)
        .map(|k| count / chains + usize::from(k < count % chains))
        .collect();
    let n = instance.dimension();
    let runs: Vec<Vec<DVector<f64>>> = per_chain
        .par_iter()
        .enumerate()
        .map(|(k, &want)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut x = start.clone();
            let mut out = Vec::with_capacity(want);
            let mut step = 0usize;
            while out.len() < want {
                let mut d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = d.norm();
                if norm == 0.0 {
                    continue;
                }
                d /= norm;
                let (lo, hi) = chord(instance, &x, &d);
                if lo < hi {
                    let t = rng.random_range(lo..hi);
                    x += &d * t;
                }
                step += 1;
                if step > opts.burn_in && (step - opts.burn_in).is_multiple_of(thinning) {
                    out.push(x.clone());
                }
            }
            out
        })
        .collect();
    Ok(SampleCloud {
        points: runs.into_iter().flatten().collect(),
        seed,
        method: SampleMethod::HitAndRun,
    })
}

pub fn farthest_distance(cloud: &SampleCloud, center: &DVector<f64>) -> Result<f64> {
    if cloud.points.is_empty() {
        return Err(SebError::EmptyCloud);
    }
    Ok(cloud
        .points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudBall {
    pub center: DVector<f64>,
    /// Largest distance from `center` to the cloud; an upper bound on the
    /// cloud's minimum enclosing radius.
    pub radius: f64,
    /// Dual bound `sqrt(sum_i w_i |p_i - c|^2)` from the iteration weights;
    /// never exceeds the cloud's minimum enclosing radius.
    pub lower_bound: f64,
}

/// Core-set iteration `c <- c + (p_far - c) / (t + 2)` from the centroid.
///
/// The update is Frank-Wolfe on the dual `max sum w_i |p_i|^2 - |sum w_i p_i|^2`,
/// so the weights it implies give a certified lower bound alongside the
/// usual upper bound.
pub fn cloud_meb(cloud: &SampleCloud, iterations: usize) -> Result<CloudBall> {
    let pts = &cloud.points;
    if pts.is_empty() {
        return Err(SebError::EmptyCloud);
    }
    let k = pts.len();
    let mut weights = vec![1.0 / k as f64; k];
    let mut center = pts.iter().fold(DVector::zeros(pts[0].len()), |acc, p| acc + p) / k as f64;
    let far = |c: &DVector<f64>| {
        pts.iter()
            .enumerate()
            .map(|(i, p)| (i, (p - c).norm_squared()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    };
    let dual = |c: &DVector<f64>, w: &[f64]| {
        pts.iter()
            .zip(w)
            .map(|(p, &wi)| wi * (p - c).norm_squared())
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    };
    let mut best_upper = (center.clone(), far(&center).1.sqrt());
    let mut lower = dual(&center, &weights);
    for t in 0..iterations {
        let (j, _) = far(&center);
        let step = 1.0 / (t as f64 + 2.0);
        center += (&pts[j] - &center) * step;
        for w in weights.iter_mut() {
            *w *= 1.0 - step;
        }
        weights[j] += step;
        let r = far(&center).1.sqrt();
        if r < best_upper.1 {
            best_upper = (center.clone(), r);
        }
        lower = lower.max(dual(&center, &weights));
    }
    Ok(CloudBall {
        center: best_upper.0,
        radius: best_upper.1,
        lower_bound: lower.min(best_upper.1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub value: f64,
    pub argmin: DVector<f64>,
    /// Grid spacing per axis.
    pub spacing: DVector<f64>,
    /// `L h sqrt(n) / 2` with `L` the Lipschitz constant of `max_i g_i` on the box.
    pub error_bound: f64,
}

/// Exhaustive minimum of `max_i g_i(x)` over a `resolution^n` grid spanning
/// the box `[lo, hi]`, endpoints included.
pub fn grid_min_maxg(
    instance: &Instance,
    resolution: usize,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<GridMinimum> {
    let n = instance.dimension();
    if n > 3 {
        return Err(SebError::DimensionTooLarge(n));
    }
    for v in [lo, hi] {
        if v.len() != n {
            return Err(SebError::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
    }
    if resolution < 2 {
        return Err(SebError::InvalidArgument("grid resolution must be >= 2".into()));
    }
    let spacing = (hi - lo) / (resolution - 1) as f64;
    let total = resolution.pow(n as u32);
    let (value, idx) = (0..total)
        .into_par_iter()
        .map(|flat| {
            let x = grid_point(flat, resolution, lo, &spacing);
            (instance.max_violation(&x).expect("dimension checked"), flat)
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    // gradients 2(x - a_i) are bounded by twice the farthest box corner distance
    let lip = instance
        .balls()
        .iter()
        .map(|b| {
            let far = DVector::from_fn(n, |i, _| {
                (lo[i] - b.center()[i]).abs().max((hi[i] - b.center()[i]).abs())
            });
            2.0 * far.norm()
        })
        .fold(0.0, f64::max);
    Ok(GridMinimum {
        value,
        argmin: grid_point(idx, resolution, lo, &spacing),
        error_bound: lip * spacing.norm() / 2.0,
        spacing,
    })
}

fn grid_point(mut flat: usize, resolution: usize, lo: &DVector<f64>, spacing: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(lo.len(), |i, _| {
        let k = flat % resolution;
        flat /= resolution;
        lo[i] + spacing[i] * k as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Ball;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn inst(centers: &[&[f64]], radii: &[f64]) -> Instance {
        let balls = centers
            .iter()
            .zip(radii)
            .map(|(c, &r)| Ball::from_slice(c, r).unwrap())
            .collect();
        Instance::new(centers[0].len(), balls).unwrap()
    }

    fn lens() -> Instance {
        let s = 2f64.sqrt();
        inst(&[&[-1.0, 0.0], &[1.0, 0.0]], &[s, s])
    }

    fn feasible(instance: &Instance, cloud: &SampleCloud) -> bool {
        let tol = 1e-9 * (1.0 + instance.scale());
        cloud
            .points
            .iter()
            .all(|p| instance.max_violation(p).unwrap() <= tol)
    }

    #[test]
    fn unit_ball_samples() {
        let i = inst(&[&[0.0, 0.0, 0.0]], &[1.0]);
        for method in [SampleMethod::Rejection, SampleMethod::HitAndRun] {
            let c = sample_intersection(&i, 100, 9, method).unwrap();
            assert_eq!(c.points.len(), 100);
            assert_eq!(c.method, method);
            assert!(c.points.iter().all(|p| p.norm() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn lens_samples_feasible() {
        let i = lens();
        let c = sample_intersection(&i, 10_000, 1, SampleMethod::HitAndRun).unwrap();
        assert_eq!(c.points.len(), 10_000);
        assert!(feasible(&i, &c));
        let d = farthest_distance(&c, &dvector![0.0, 0.0]).unwrap();
        assert!((0.95..=1.0 + 1e-6).contains(&d), "farthest {d}");
    }

    #[test]
    fn disjoint_balls_refuse_sampling() {
        let i = inst(&[&[-5.0, 0.0], &[5.0, 0.0]], &[1.0, 1.0]);
        assert!(matches!(
            sample_intersection(&i, 10, 0, SampleMethod::HitAndRun),
            Err(SebError::EmptyInterior)
        ));
    }

    #[test]
    fn thin_intersection_falls_back_to_hit_and_run() {
        // two unit-ish balls overlapping in a sliver of width 2e-7
        let i = inst(&[&[-1.0, 0.0], &[1.0, 0.0]], &[1.0000001, 1.0000001]);
        assert!(matches!(rejection_sample(&i, 10, 0), Err(SebError::RejectionStall)));
        let c = sample_intersection(&i, 50, 0, SampleMethod::Rejection).unwrap();
        assert_eq!(c.method, SampleMethod::HitAndRun);
        assert!(feasible(&i, &c));
    }

    #[test]
    fn sampling_is_deterministic() {
        let i = lens();
        let a = sample_intersection(&i, 500, 77, SampleMethod::HitAndRun).unwrap();
        let b = sample_intersection(&i, 500, 77, SampleMethod::HitAndRun).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn farthest_examples() {
        let center = dvector![1.0, 2.0];
        let cloud = SampleCloud {
            points: vec![center.clone()],
            seed: 0,
            method: SampleMethod::Rejection,
        };
        assert_eq!(farthest_distance(&cloud, &center).unwrap(), 0.0);
        let empty = SampleCloud {
            points: vec![],
            seed: 0,
            method: SampleMethod::Rejection,
        };
        assert!(matches!(farthest_distance(&empty, &center), Err(SebError::EmptyCloud)));
        assert!(matches!(cloud_meb(&empty, 10), Err(SebError::EmptyCloud)));

        let ball = inst(&[&[0.0, 0.0]], &[1.0]);
        let c = sample_intersection(&ball, 10_000, 5, SampleMethod::Rejection).unwrap();
        let d = farthest_distance(&c, &dvector![0.0, 0.0]).unwrap();
        assert!(d > 0.9 && d <= 1.0);
    }

    #[test]
    fn cloud_meb_examples() {
        let two = SampleCloud {
            points: vec![dvector![-1.0, 0.0], dvector![1.0, 0.0]],
            seed: 0,
            method: SampleMethod::Rejection,
        };
        let b = cloud_meb(&two, 1000).unwrap();
        assert!(b.center.norm() < 1e-2);
        assert!((b.radius - 1.0).abs() < 1e-2);
        assert!(b.lower_bound <= 1.0 + 1e-12 && b.lower_bound > 0.99);

        let one = SampleCloud {
            points: vec![dvector![3.0, 4.0]],
            seed: 0,
            method: SampleMethod::Rejection,
        };
        let b = cloud_meb(&one, 10).unwrap();
        assert_eq!(b.center, dvector![3.0, 4.0]);
        assert_eq!(b.radius, 0.0);

        let i = lens();
        let c = sample_intersection(&i, 10_000, 3, SampleMethod::HitAndRun).unwrap();
        let b = cloud_meb(&c, 1000).unwrap();
        assert!(b.radius >= 0.9 && b.radius <= 1.0 + 1e-6, "radius {}", b.radius);
        assert!(b.lower_bound >= 0.9 && b.lower_bound <= 1.0 + 1e-6);
    }

    #[test]
    fn grid_min_examples() {
        let i = lens();
        let g = grid_min_maxg(&i, 400, &dvector![-2.0, -2.0], &dvector![2.0, 2.0]).unwrap();
        assert!(g.value >= -1.0 - 1e-12);
        assert!(g.value <= -1.0 + g.error_bound);

        let ball = inst(&[&[0.0, 0.0]], &[1.0]);
        let g = grid_min_maxg(&ball, 401, &dvector![-2.0, -2.0], &dvector![2.0, 2.0]).unwrap();
        assert_relative_eq!(g.value, -1.0, epsilon = 1e-12);
        assert!(g.argmin.norm() < 1e-12);

        let i = inst(&[&[-5.0, 0.0], &[5.0, 0.0]], &[1.0, 1.0]);
        let g = grid_min_maxg(&i, 201, &dvector![-6.0, -6.0], &dvector![6.0, 6.0]).unwrap();
        assert_relative_eq!(g.value, 24.0, epsilon = 1e-9);

        let five = inst(&[&[0.0; 5]], &[1.0]);
        assert!(matches!(
            grid_min_maxg(&five, 10, &DVector::zeros(5), &DVector::zeros(5)),
            Err(SebError::DimensionTooLarge(5))
        ));
    }
}
