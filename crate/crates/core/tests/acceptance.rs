//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any hard criterion fails. Criterion 8 is a soft diagnostic.

mod common;

use std::time::Instant;

use nalgebra::{dvector, DVector};
use rand::Rng;

use seb_core::jnr::{
    convexity_probe, convexity_probe_with_pairs, eval_map, membership_g, membership_g_bullet,
    separation_probe, ProbeOptions, QuadraticMap,
};
use seb_core::sampler::{cloud_meb, grid_min_maxg, sample_intersection, SampleMethod};
use seb_core::simplex_qp::{build_qp, grid_oracle};
use seb_core::solver::{build_certificate, identity_residual, solve_seb, SolveOptions};
use seb_core::{Ball, Instance, Regime, Solution, Status};

type Check = Result<String, String>;
type Criterion<'a> = (u32, &'static str, bool, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(i: &Instance) -> Solution {
    solve_seb(i, &SolveOptions::default()).expect("solver runs")
}

/// The 50 random instances shared by criteria 4 to 7.
fn supported_instances() -> Vec<Instance> {
    let mut rng = common::rng(4);
    (0..50)
        .map(|k| {
            let n = 2 + k % 3;
            common::instance_with_interior(&mut rng, n, n, 0.5)
        })
        .collect()
}

fn c1_example() -> Check {
    let map = common::example_map();
    let u = eval_map(&map, &dvector![1.0, 0.0]).unwrap();
    let v = eval_map(&map, &dvector![0.0, 1.0]).unwrap();
    ensure(u == dvector![1.0, 1.0, -1.0], || format!("G(1,0) = {u}"))?;
    ensure(v == dvector![1.0, -1.0, 1.0], || format!("G(0,1) = {v}"))?;
    let z = dvector![1.0, 0.0, 0.0];
    let g = membership_g(&map, &z).unwrap();
    ensure(!g.member, || "(1,0,0) reported in G".into())?;
    let b = membership_g_bullet(&map, &z).unwrap();
    ensure(b.member, || "(1,0,0) not in G•".into())?;
    ensure((b.margin + 0.5).abs() <= 1e-9, || format!("G• margin {}", b.margin))?;
    Ok(format!("G• margin {}", b.margin))
}

fn c2_lens() -> Check {
    let i = common::lens();
    let s = solve(&i);
    ensure(s.status == Status::CertifiedOptimal, || format!("status {:?}", s.status))?;
    ensure(s.center.amax() <= 1e-8, || format!("center {}", s.center))?;
    ensure((s.radius - 1.0).abs() <= 1e-8, || format!("radius {}", s.radius))?;
    ensure((&s.multipliers - dvector![0.5, 0.5]).amax() <= 1e-8, || format!("mu {}", s.multipliers))?;
    let (grid, _) = grid_oracle(&build_qp(&i), 200).unwrap();
    ensure((grid - s.qp_value).abs() <= 1e-3, || format!("grid {grid} vs {}", s.qp_value))?;
    for corner in [dvector![0.0, 1.0], dvector![0.0, -1.0]] {
        ensure(i.max_violation(&corner).unwrap() <= 1e-12, || format!("{corner} not in intersection"))?;
        let d = (&corner - &s.center).norm();
        ensure((d - s.radius).abs() <= 1e-8, || format!("{corner} at distance {d}"))?;
    }
    Ok(format!("r = {}, |q - grid| = {:.1e}", s.radius, (grid - s.qp_value).abs()))
}

fn c3_critical() -> Check {
    let i = Instance::from_parts(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[2.0, 2.0]).unwrap();
    let s = solve(&i);
    ensure(s.regime.regime == Regime::CriticalCase, || format!("regime {:?}", s.regime.regime))?;
    ensure((&s.center - dvector![0.5, 0.5]).amax() <= 1e-8, || format!("center {}", s.center))?;
    ensure((s.radius - 3.5f64.sqrt()).abs() <= 1e-8, || format!("radius {}", s.radius))?;
    let (grid, _) = grid_oracle(&build_qp(&i), 200).unwrap();
    ensure((grid - s.qp_value).abs() <= 1e-3, || format!("grid {grid} vs {}", s.qp_value))?;
    Ok(format!("r = {}, status {:?}", s.radius, s.status))
}

fn identity_check(i: &Instance, s: &Solution, rng: &mut impl Rng) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = &s.center + common::normal_vec(rng, i.dimension()) * 3.0;
        let r = identity_residual(i, s, &x).unwrap().abs();
        let bound = 1e-9 * (1.0 + x.norm_squared());
        ensure(r <= bound, || format!("residual {r:.2e} > {bound:.2e} at {x}"))?;
        worst = worst.max(r / (1.0 + x.norm_squared()));
    }
    Ok(worst)
}

fn c4_identity(instances: &[(Instance, Solution)]) -> Check {
    let mut rng = common::rng(44);
    let mut worst = 0.0f64;
    for (k, (i, s)) in instances.iter().enumerate() {
        worst = worst.max(identity_check(i, s, &mut rng).map_err(|e| format!("instance {k}: {e}"))?);
    }
    Ok(format!("max relative residual {worst:.1e}"))
}

fn certificate_check(i: &Instance, s: &Solution) -> Result<f64, String> {
    let c = build_certificate(i, s).map_err(|e| e.to_string())?;
    let size = c.alpha.abs().max(c.offdiag.norm()).max(c.beta.abs());
    ensure(c.alpha.abs() <= 1e-7 && c.offdiag.norm() <= 1e-7 && c.beta.abs() <= 1e-7, || {
        format!("alpha {}, |b| {}, beta {}", c.alpha, c.offdiag.norm(), c.beta)
    })?;
    ensure(c.psd_ok, || format!("arrowhead test failed, residual {}", c.residual))?;
    Ok(size)
}

fn c5_lmi(instances: &[(Instance, Solution)]) -> Check {
    let mut worst = 0.0f64;
    for (k, (i, s)) in instances.iter().enumerate() {
        worst = worst.max(certificate_check(i, s).map_err(|e| format!("instance {k}: {e}"))?);
    }
    Ok(format!("max certificate entry {worst:.1e}"))
}

fn c6_oracle(instances: &[(Instance, Solution)]) -> Check {
    let mut worst_gap = 0.0f64;
    for (k, (i, s)) in instances.iter().enumerate() {
        let (grid, _) = grid_oracle(&build_qp(i), 60).unwrap();
        ensure(s.qp_value - s.fw_gap <= grid, || {
            format!("instance {k}: value {} - gap {} > grid {grid}", s.qp_value, s.fw_gap)
        })?;
        ensure(s.fw_gap <= 1e-10 * i.scale(), || format!("instance {k}: gap {} scale {}", s.fw_gap, i.scale()))?;
        worst_gap = worst_gap.max(s.fw_gap / i.scale());
    }
    Ok(format!("max gap / scale {worst_gap:.1e}"))
}

fn containment_check(i: &Instance, s: &Solution, seed: u64) -> Result<f64, String> {
    let cloud = sample_intersection(i, 10_000, seed, SampleMethod::HitAndRun).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for x in &cloud.points {
        let excess = (x - &s.center).norm() - s.radius;
        ensure(excess <= 1e-6, || format!("point {x} outside by {excess:.2e}"))?;
        worst = worst.max(excess);
    }
    Ok(worst)
}

fn c7_containment(instances: &[(Instance, Solution)]) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for (k, (i, s)) in instances.iter().enumerate() {
        worst = worst.max(containment_check(i, s, 700 + k as u64).map_err(|e| format!("instance {k}: {e}"))?);
    }
    Ok(format!("max |x - a| - r = {worst:.1e} over 500000 points"))
}

fn c8_sandwich() -> Check {
    let lens3 = Instance::from_parts(&[vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]], &[2f64.sqrt(); 2]).unwrap();
    let wide = Instance::from_parts(&[vec![-0.5, 0.0], vec![0.5, 0.0]], &[1.5, 1.5]).unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, i) in [("lens", common::lens()), ("lens3", lens3), ("wide", wide)] {
        let s = solve(&i);
        let cloud = sample_intersection(&i, 10_000, 8, SampleMethod::HitAndRun).unwrap();
        let ball = cloud_meb(&cloud, 2000).unwrap();
        let ratio = ball.radius / s.radius;
        ok &= ratio >= 0.9;
        notes.push(format!("{name} {ratio:.3}"));
    }
    let msg = format!("cloud radius / r: {}", notes.join(", "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_convexity() -> Check {
    let mut rng = common::rng(9);
    for k in 0..20 {
        let n = 2 + k % 3;
        let m = 1 + k % 4;
        let i = common::flat_instance(&mut rng, n, m, n - 1, 0.5);
        let s = solve(&i);
        let rank = s.regime.rank_shifted.unwrap();
        ensure(rank < n, || format!("instance {k}: shifted rank {rank} = n"))?;
        let map = QuadraticMap::from_solution(&i, &s).unwrap();
        let report = convexity_probe(&map, &ProbeOptions::new(10_000, 90 + k as u64)).unwrap();
        ensure(report.counterexamples.is_empty(), || {
            let c = &report.counterexamples[0];
            format!("instance {k}: counterexample z = {} from x = {}, y = {}", c.z, c.x, c.y)
        })?;
    }
    let map = common::example_map();
    let pair = (dvector![1.0, 0.0], dvector![0.0, 1.0], 0.5);
    let report = convexity_probe_with_pairs(&map, &ProbeOptions::new(100, 9), &[pair]).unwrap();
    let hit = report.counterexamples.iter().any(|c| c.z == dvector![1.0, 0.0, 0.0]);
    ensure(hit, || "worked-example probe did not report (1,0,0)".into())?;
    Ok(format!(
        "20 flat instances clean; worked-example probe has {} counterexamples including (1,0,0)",
        report.counterexamples.len()
    ))
}

fn c10_separation() -> Check {
    let mut rng = common::rng(10);
    let mut instances = vec![
        common::lens(),
        Instance::from_parts(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[2.0, 2.0]).unwrap(),
    ];
    for k in 0..4 {
        instances.push(common::instance_with_interior(&mut rng, 2 + k % 2, 2 + k % 2, 0.5));
    }
    for (k, i) in instances.iter().enumerate() {
        let s = solve(i);
        ensure(s.status == Status::CertifiedOptimal, || format!("instance {k}: status {:?}", s.status))?;
        let map = QuadraticMap::from_solution(i, &s).unwrap();
        let r = separation_probe(&map, &ProbeOptions::new(10_000, 100 + k as u64)).unwrap();
        ensure(r.g_hits_lambda.is_empty() && r.bullet_hits_lambda.is_empty(), || {
            format!("instance {k}: {} G hits, {} G• hits", r.g_hits_lambda.len(), r.bullet_hits_lambda.len())
        })?;
    }
    let lens = common::lens();
    let s = solve(&lens);
    let shrunk = Ball::new(s.center.clone(), 0.9 * s.radius).unwrap();
    let map = QuadraticMap::from_instance(&lens, &shrunk).unwrap();
    // sample around the ball itself, where the excluded crescent lives
    let opts = ProbeOptions {
        center: Some(s.center.clone()),
        radius: Some(s.radius),
        ..ProbeOptions::new(10_000, 110)
    };
    let r = separation_probe(&map, &opts).unwrap();
    ensure(!r.g_hits_lambda.is_empty(), || "shrunk target produced no G hits".into())?;
    Ok(format!(
        "{} certified instances clean; shrunk lens target gives {} G hits",
        instances.len(),
        r.g_hits_lambda.len()
    ))
}

fn c11_slater() -> Check {
    let mut rng = common::rng(11);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let n = 1 + k % 3;
        let m = 1 + k % 4;
        let i = common::instance_with_interior(&mut rng, n, m, 0.5);
        let s = solve(&i);
        let (lo, hi) = (DVector::from_element(n, -4.0), DVector::from_element(n, 4.0));
        let res = [0, 4001, 401, 61][n];
        let g = grid_min_maxg(&i, res, &lo, &hi).unwrap();
        let diff = (g.value + s.qp_value).abs();
        ensure(diff <= g.error_bound, || format!("instance {k}: grid {} vs -q* {} (bound {})", g.value, -s.qp_value, g.error_bound))?;
        worst = worst.max(diff / g.error_bound);
    }
    let disjoint = [
        Instance::from_parts(&[vec![-5.0, 0.0], vec![5.0, 0.0]], &[1.0, 1.0]).unwrap(),
        Instance::from_parts(&[vec![0.0], vec![3.0]], &[1.0, 1.0]).unwrap(),
        Instance::from_parts(&[vec![0.0, 0.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 2.0, 2.0]], &[1.0, 1.0, 1.0]).unwrap(),
    ];
    for (k, i) in disjoint.iter().enumerate() {
        let s = solve(i);
        ensure(s.status == Status::EmptyInterior, || format!("disjoint {k}: status {:?}", s.status))?;
        let n = i.dimension();
        let (lo, hi) = (DVector::from_element(n, -6.0), DVector::from_element(n, 6.0));
        let g = grid_min_maxg(i, [0, 4001, 401, 61][n], &lo, &hi).unwrap();
        ensure(g.value > 0.0, || format!("disjoint {k}: grid minimum {}", g.value))?;
    }
    Ok(format!("worst |grid + q*| / bound {worst:.2}; 3 disjoint instances EmptyInterior"))
}

fn c12_unsupported() -> Check {
    let i = Instance::from_parts(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[1.0, 1.0, 1.0]).unwrap();
    let s = solve(&i);
    ensure(s.regime.regime == Regime::Unsupported, || format!("regime {:?}", s.regime.regime))?;
    ensure(s.status == Status::UpperBoundOnly, || format!("status {:?}", s.status))?;
    identity_check(&i, &s, &mut common::rng(12)).map_err(|e| format!("criterion 4: {e}"))?;
    certificate_check(&i, &s).map_err(|e| format!("criterion 5: {e}"))?;
    containment_check(&i, &s, 12).map_err(|e| format!("criterion 7: {e}"))?;
    Ok(format!("r = {}, mu = {:?}", s.radius, s.multipliers.as_slice()))
}

fn c13_equivariance() -> Check {
    let mut rng = common::rng(13);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let n = 2 + k % 3;
        let i = common::instance_with_interior(&mut rng, n, n, 0.5);
        let s = solve(&i);
        for _ in 0..10 {
            let q = common::rotation(&mut rng, n);
            let t = common::normal_vec(&mut rng, n) * 2.0;
            let moved = i.transformed(&q).unwrap().translated(&t).unwrap();
            let sm = solve(&moved);
            let dc = (&sm.center - (&q * &s.center + &t)).amax();
            let dr = (sm.radius - s.radius).abs();
            let dmu = (&sm.multipliers - &s.multipliers).amax();
            let d = dc.max(dr).max(dmu);
            ensure(d <= 1e-8, || format!("instance {k}: center {dc:.1e}, radius {dr:.1e}, mu {dmu:.1e}"))?;
            worst = worst.max(d);
        }
    }
    Ok(format!("max deviation {worst:.1e} over 100 transforms"))
}

fn main() {
    let start = Instant::now();
    let shared: Vec<(Instance, Solution)> = supported_instances()
        .into_iter()
        .map(|i| {
            let s = solve(&i);
            (i, s)
        })
        .collect();

    let criteria: Vec<Criterion> = vec![
        (1, "worked example", true, Box::new(c1_example)),
        (2, "lens instance", true, Box::new(c2_lens)),
        (3, "critical-regime instance", true, Box::new(c3_critical)),
        (4, "certificate identity", true, Box::new(|| c4_identity(&shared))),
        (5, "LMI check", true, Box::new(|| c5_lmi(&shared))),
        (6, "optimality vs oracle", true, Box::new(|| c6_oracle(&shared))),
        (7, "containment sampling", true, Box::new(|| c7_containment(&shared))),
        (8, "lower-bound sandwich", false, Box::new(c8_sandwich)),
        (9, "convexity probe", true, Box::new(c9_convexity)),
        (10, "separation probe", true, Box::new(c10_separation)),
        (11, "Slater identity", true, Box::new(c11_slater)),
        (12, "unsupported regime", true, Box::new(c12_unsupported)),
        (13, "equivariance", true, Box::new(c13_equivariance)),
    ];

    let mut hard_failures = 0;
    for (id, name, hard, check) in &criteria {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        let kind = if *hard { "" } else { " (soft)" };
        match result {
            Ok(detail) => println!("criterion {id:>2} {name}{kind}: PASS [{secs:.2}s] {detail}"),
            Err(detail) => {
                println!("criterion {id:>2} {name}{kind}: FAIL [{secs:.2}s] {detail}");
                if *hard {
                    hard_failures += 1;
                }
            }
        }
    }
    println!(
        "acceptance: {} of {} hard criteria passed in {:.1}s",
        criteria.iter().filter(|c| c.2).count() - hard_failures,
        criteria.iter().filter(|c| c.2).count(),
        start.elapsed().as_secs_f64()
    );
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
