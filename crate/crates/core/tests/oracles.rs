use std::sync::Arc;

use mnc_core::darbo::{
    extract_fixed_point, iterate_sets, random_polynomials, ComparisonFunction, DarboConfig, GridOperator, OperatorKind,
    OperatorSpec,
};
use mnc_core::domain::{make_grid, sup_distance, GridDomain};
use mnc_core::family::{FunctionFamily, SampledFunction};
use mnc_core::measure::{axiom_suite, AxiomConfig};
use mnc_core::wallman::{enumerate_exhaustive, enumerate_ultrafilters, FiniteSpace};
use nalgebra::{DMatrix, DVector};

fn grid(h: f64) -> Arc<GridDomain> {
    Arc::new(make_grid(0.0, 1.0, h).unwrap())
}

/// Solves `(I - A) x = g` for a linear operator with a dense LU factorization.
fn dense_solution(a: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - a[i][j]);
    let x = m.lu().solve(&DVector::from_column_slice(g)).expect("nonsingular");
    x.iter().copied().collect()
}

#[test]
fn fredholm_fixed_point_matches_dense_solve_and_closed_form() {
    let g = grid(1e-3);
    let op = OperatorSpec::parse(OperatorKind::Fredholm, "t", "1", "x", 0.5)
        .unwrap()
        .compile(&g)
        .unwrap();
    let fp = extract_fixed_point(&op, &SampledFunction::constant(&g, 0.0), 1e-10, 500).unwrap();
    let dense = dense_solution(&op.quadrature_matrix(), op.forcing());
    for ((x, d), t) in fp.x.values().iter().zip(&dense).zip(g.points()) {
        assert!((x - d).abs() <= 1e-6);
        assert!((x - (t + 0.5)).abs() <= 1e-6);
    }
}

#[test]
fn fredholm_with_nontrivial_kernel_matches_dense_solve() {
    let g = grid(0.01);
    let op = OperatorSpec::parse(OperatorKind::Fredholm, "exp(t)", "t*s + cos(t - s)", "x", 0.3)
        .unwrap()
        .compile(&g)
        .unwrap();
    assert!(op.contraction().unwrap() < 1.0);
    let fp = extract_fixed_point(&op, &SampledFunction::constant(&g, 0.0), 1e-12, 1_000).unwrap();
    let dense = dense_solution(&op.quadrature_matrix(), op.forcing());
    let err = fp.x.values().iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-9, "{err}");
}

#[test]
fn volterra_on_a_grid_with_a_short_last_interval() {
    let g = Arc::new(make_grid(0.0, 1.0, 0.003).unwrap());
    assert!(g.points()[g.len() - 1] - g.points()[g.len() - 2] < 0.003);
    let op = OperatorSpec::parse(OperatorKind::Volterra, "1", "1", "x", 1.0)
        .unwrap()
        .compile(&g)
        .unwrap();
    let fp = extract_fixed_point(&op, &SampledFunction::constant(&g, 0.0), 1e-10, 200).unwrap();
    let dense = dense_solution(&op.quadrature_matrix(), op.forcing());
    let exp = SampledFunction::from_fn(&g, "exp", f64::exp);
    assert!(sup_distance(&fp.x, &exp).unwrap() <= 1e-5);
    for (x, d) in fp.x.values().iter().zip(&dense) {
        assert!((x - d).abs() <= 1e-8);
    }
}

#[test]
fn trace_respects_the_comparison_bound() {
    let g = grid(1e-3);
    let op = OperatorSpec::parse(OperatorKind::Fredholm, "t", "1", "x", 0.5)
        .unwrap()
        .compile(&g)
        .unwrap();
    let psi = ComparisonFunction::linear(0.5).unwrap();
    let c1 = random_polynomials(&g, 15, 4, 21).unwrap();
    let trace = iterate_sets(&op, psi, &c1, 15, 12, 3, &DarboConfig::default()).unwrap();
    for k in 0..trace.len() {
        assert!(trace.omega_values[k].as_f64() <= trace.bound_values[k].as_f64() + 0.02);
        assert!((trace.bound_values[k].as_f64() - psi.iterate(trace.omega_values[0].as_f64(), k)).abs() < 1e-15);
    }
    // every residual is the largest ‖Φx − x‖ over the recorded ensemble
    for (k, m) in trace.ensembles.iter().enumerate() {
        let r = m
            .iter()
            .map(|x| sup_distance(&op.apply(x).unwrap(), x).unwrap())
            .fold(0.0, f64::max);
        assert_eq!(r, trace.residuals[k]);
    }
}

#[test]
fn enumeration_is_complete_up_to_four_points() {
    for n in 1..=4 {
        let s = FiniteSpace::new(n).unwrap();
        assert_eq!(enumerate_exhaustive(&s), enumerate_ultrafilters(&s));
    }
}

#[test]
fn axiom_suite_is_deterministic() {
    let mut cfg = AxiomConfig::default();
    cfg.fixture_cap = 1_000;
    cfg.measure.cap = 300;
    cfg.measure.cap_schedule = Some(vec![75, 150, 300]);
    let a = axiom_suite(42, 4, &cfg).unwrap();
    let b = axiom_suite(42, 4, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
    let c = axiom_suite(43, 4, &cfg).unwrap();
    assert_ne!(a.entries, c.entries);
}

#[test]
fn explicit_families_reject_foreign_grids() {
    let g = grid(0.1);
    let other = grid(0.2);
    let f = SampledFunction::constant(&other, 1.0);
    assert!(FunctionFamily::explicit(&g, vec![f]).is_err());
}
