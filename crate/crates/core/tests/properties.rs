use std::sync::Arc;

use mnc_core::classical::{hausdorff_exact, kuratowski_exact};
use mnc_core::domain::{make_grid, neighborhood, sup_distance, GridDomain};
use mnc_core::family::{convex_sample, materialize, union, FunctionFamily, SampledFunction};
use mnc_core::measure::{omega, omega_at, omega_over_set, omega_point, MeasureConfig, Omega};
use mnc_core::ExtendedNonNegReal;
use proptest::prelude::*;

fn grid(h: f64) -> Arc<GridDomain> {
    Arc::new(make_grid(0.0, 1.0, h).unwrap())
}

/// Random polynomial as sampled values plus a derivative bound on [0, 1].
fn poly(g: &Arc<GridDomain>, coeffs: &[f64]) -> (SampledFunction, f64) {
    let lip: f64 = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c.abs()).sum();
    let f = SampledFunction::from_fn(g, format!("{coeffs:?}"), |t| {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    });
    (f, lip)
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sup_distance_is_a_metric(a in coeffs(), b in coeffs(), c in coeffs()) {
        let g = grid(0.01);
        let (f, _) = poly(&g, &a);
        let (h, _) = poly(&g, &b);
        let (k, _) = poly(&g, &c);
        let d = |x: &SampledFunction, y: &SampledFunction| sup_distance(x, y).unwrap();
        prop_assert_eq!(d(&f, &f), 0.0);
        prop_assert_eq!(d(&f, &h), d(&h, &f));
        prop_assert!(d(&f, &k) <= d(&f, &h) + d(&h, &k) + 1e-12);
        prop_assert!(d(&f, &h) >= 0.0);
    }

    #[test]
    fn neighborhoods_are_open_balls(i in 0usize..201, eps in 0.006..0.5f64) {
        let g = grid(0.005);
        let t0 = g.points()[i];
        let nb = neighborhood(&g, t0, eps).unwrap();
        prop_assert!(nb.indices.contains(&i));
        for &s in nb.points(&g) {
            prop_assert!((s - t0).abs() < eps);
        }
        // every grid point clearly inside the ball is included
        for (j, &s) in g.points().iter().enumerate() {
            if (s - t0).abs() < eps - 1e-9 {
                prop_assert!(nb.indices.contains(&j));
            }
        }
        let wider = neighborhood(&g, t0, eps * 1.5).unwrap();
        prop_assert!(wider.indices.start <= nb.indices.start && nb.indices.end <= wider.indices.end);
    }

    #[test]
    fn omega_at_is_monotone_in_eps_and_cap(i in 0usize..101, e1 in 0.011..0.3f64, e2 in 0.011..0.3f64, c1 in 1u64..60, c2 in 1u64..60) {
        let g = grid(0.01);
        let f = FunctionFamily::parse(&g, "sin(n*t)*t^n", 60).unwrap();
        let t0 = g.points()[i];
        let (es, el) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (cs, cl) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(omega_at(&f, t0, es, cs).unwrap() <= omega_at(&f, t0, el, cs).unwrap());
        prop_assert!(omega_at(&f, t0, es, cs).unwrap() <= omega_at(&f, t0, es, cl).unwrap());
    }

    /// A finite family of functions with derivative bound `L` has
    /// oscillation at most `L * eps` over balls of radius `eps`.
    #[test]
    fn zero_law_for_finite_smooth_families(cs in prop::collection::vec(coeffs(), 1..6)) {
        let g = grid(1e-3);
        let (members, lips): (Vec<_>, Vec<_>) = cs.iter().map(|c| poly(&g, c)).unzip();
        let l = lips.iter().copied().fold(0.0, f64::max);
        let f = FunctionFamily::explicit(&g, members).unwrap();
        let est = omega(&f, &[0.1, 0.05, 0.01], 1, 0.02).unwrap();
        prop_assert!(est.value <= l * 0.01 + 1e-12);
    }

    #[test]
    fn omega_is_monotone_under_union(a in prop::collection::vec(coeffs(), 1..4), b in prop::collection::vec(coeffs(), 1..4)) {
        let g = grid(0.005);
        let fa = FunctionFamily::explicit(&g, a.iter().map(|c| poly(&g, c).0).collect()).unwrap();
        let fb = FunctionFamily::explicit(&g, b.iter().map(|c| poly(&g, c).0).collect()).unwrap();
        let cfg = MeasureConfig::new(vec![0.2, 0.05, 0.02], 1);
        let u = Omega(&union(&fa, &fb).unwrap(), &cfg).unwrap();
        let oa = Omega(&fa, &cfg).unwrap();
        let ob = Omega(&fb, &cfg).unwrap();
        prop_assert_eq!(u.omega, oa.omega.max(ob.omega));
        prop_assert_eq!(u.total, ExtendedNonNegReal::finite(u.omega) + u.eta.value);
    }

    #[test]
    fn convex_hull_does_not_raise_omega(cs in prop::collection::vec(coeffs(), 1..6), draws in 1usize..30, seed in any::<u64>()) {
        let g = grid(0.005);
        let f = FunctionFamily::explicit(&g, cs.iter().map(|c| poly(&g, c).0).collect()).unwrap();
        let base = omega(&f, &[0.2, 0.05, 0.02], 1, 0.02).unwrap().value;
        let hull = omega(&convex_sample(&f, draws, seed).unwrap(), &[0.2, 0.05, 0.02], 1, 0.02).unwrap().value;
        prop_assert!(hull <= base + 1e-12);
    }

    /// With centers drawn from the members: `χ_k <= α_k <= 2 χ_k`.
    #[test]
    fn kuratowski_and_hausdorff_are_comparable(cs in prop::collection::vec(coeffs(), 2..8), k in 1usize..4) {
        let g = grid(0.02);
        let members: Vec<_> = cs.iter().map(|c| poly(&g, c).0).collect();
        let k = k.min(members.len());
        let alpha = kuratowski_exact(&members, k).unwrap();
        let chi = hausdorff_exact(&members, &members, k).unwrap();
        prop_assert!(chi <= alpha + 1e-12);
        prop_assert!(alpha <= 2.0 * chi + 1e-12);
    }
}

/// The infimum of the oscillation over any finite collection of grid-open
/// sets containing the schedule's balls equals the value on the smallest ball.
#[test]
fn restriction_to_metric_balls() {
    let g = grid(0.01);
    let f = FunctionFamily::parse(&g, "t^n + sin(n*t)/n", 200).unwrap();
    let eps = [0.2, 0.1, 0.03];
    // deterministic pseudo-random supersets
    let mut state: u64 = 0x243F_6A88_85A3_08D3;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for &t0 in &[0.0, 0.37, 0.5, 0.99, 1.0] {
        let curve = omega_point(&f, t0, &eps, 200, 0.02).unwrap();
        let idx = g.index_of(t0).unwrap();
        let mut collection: Vec<Vec<usize>> = Vec::new();
        for &e in &eps {
            let ball: Vec<usize> = neighborhood(&g, t0, e).unwrap().indices.collect();
            collection.push(ball.clone());
            for _ in 0..6 {
                let mut sup = ball.clone();
                for _ in 0..(next() % 20) {
                    sup.push((next() % g.len() as u64) as usize);
                }
                sup.sort_unstable();
                sup.dedup();
                collection.push(sup);
            }
        }
        let inf = collection
            .iter()
            .map(|set| omega_over_set(&f, idx, set, 200).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((inf - curve.value()).abs() <= 1e-12, "t0 = {t0}: {inf} vs {}", curve.value());
    }
}

#[test]
fn estimates_are_identical_across_thread_counts() {
    let g = grid(1e-3);
    let f = FunctionFamily::parse(&g, "t^n", 3_000).unwrap();
    let cfg = MeasureConfig::new(vec![0.1, 0.05, 0.01], 3_000);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| Omega(&f, &cfg).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one, many);
    assert_eq!(one.omega.to_bits(), many.omega.to_bits());
}

#[test]
fn materialized_and_parametric_families_agree() {
    let g = grid(0.01);
    let f = FunctionFamily::parse(&g, "cos(n*t)/(1 + n)", 40).unwrap();
    let explicit = FunctionFamily::explicit(&g, materialize(&f, 40).unwrap()).unwrap();
    let a = omega(&f, &[0.2, 0.05], 40, 0.02).unwrap();
    let b = omega(&explicit, &[0.2, 0.05], 40, 0.02).unwrap();
    assert_eq!(a.value, b.value);
    assert_eq!(a.argmax_t, b.argmax_t);
}
