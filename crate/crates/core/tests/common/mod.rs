#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use seb_core::jnr::QuadraticMap;
use seb_core::{Ball, Instance, UnitQuadratic};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Normal centers and a common point `p` at least `margin` inside every ball.
pub fn instance_with_interior(rng: &mut impl Rng, n: usize, m: usize, margin: f64) -> Instance {
    let p = normal_vec(rng, n) * 0.5;
    let balls = (0..m)
        .map(|_| {
            let c = normal_vec(rng, n);
            let r = (&c - &p).norm() + margin * (0.5 + rng.random::<f64>());
            Ball::new(c, r).unwrap()
        })
        .collect();
    Instance::new(n, balls).unwrap()
}

/// Centers confined to a random subspace of dimension `k < n`.
pub fn flat_instance(rng: &mut impl Rng, n: usize, m: usize, k: usize, margin: f64) -> Instance {
    let basis = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p = &basis * normal_vec(rng, k) * 0.5;
    let balls = (0..m)
        .map(|_| {
            let c = &basis * normal_vec(rng, k);
            let r = (&c - &p).norm() + margin * (0.5 + rng.random::<f64>());
            Ball::new(c, r).unwrap()
        })
        .collect();
    Instance::new(n, balls).unwrap()
}

pub fn rotation(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

pub fn random_map(rng: &mut impl Rng, n: usize, m: usize) -> QuadraticMap {
    let mut quad = || UnitQuadratic::new(normal_vec(rng, n), rng.sample::<f64, _>(StandardNormal)).unwrap();
    let target = quad();
    let components = (0..m).map(|_| quad()).collect();
    QuadraticMap::new(target, components).unwrap()
}

pub fn lens() -> Instance {
    Instance::from_parts(&[vec![-1.0, 0.0], vec![1.0, 0.0]], &[2f64.sqrt(), 2f64.sqrt()]).unwrap()
}

/// The map with `g: a = (1, 1), theta = 0` and components `a = (0, 1)`, `a = (1, 0)`.
pub fn example_map() -> QuadraticMap {
    let q = |a: [f64; 2]| UnitQuadratic::from_slice(&a, 0.0).unwrap();
    QuadraticMap::new(q([1.0, 1.0]), vec![q([0.0, 1.0]), q([1.0, 0.0])]).unwrap()
}
