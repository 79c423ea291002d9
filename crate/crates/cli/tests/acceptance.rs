//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are fixed here, never loosened to make a run pass.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mnc_core::classical::{geometric_probe, mnc_bracket, BracketConfig};
use mnc_core::darbo::{
    extract_fixed_point, iterate_sets, random_polynomials, ComparisonFunction, DarboConfig, OperatorKind, OperatorSpec,
};
use mnc_core::domain::{make_grid, sup_distance, GridDomain};
use mnc_core::extended::ExtendedNonNegReal;
use mnc_core::family::{FunctionFamily, SampledFunction};
use mnc_core::measure::{axiom_suite, eta, AxiomConfig, MeasureConfig, Omega};
use mnc_core::wallman::{summarize, FiniteSpace};
use nalgebra::{DMatrix, DVector};

type Check = Result<String, String>;

const H: f64 = 1e-3;
const EPS: [f64; 3] = [0.1, 0.05, 0.01];

fn unit_grid() -> Arc<GridDomain> {
    Arc::new(make_grid(0.0, 1.0, H).expect("valid grid"))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<f64, String> {
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= limit.as_secs_f64(), format!("took {secs:.1} s, limit {} s", limit.as_secs()))?;
    Ok(secs)
}

fn m(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn powers(cap: u64) -> Result<FunctionFamily, String> {
    FunctionFamily::parse(&unit_grid(), "t^n", cap).map_err(m)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let report = Omega(&powers(10_000)?, &MeasureConfig::new(EPS.to_vec(), 10_000)).map_err(m)?;
    let secs = within_time(start, Duration::from_secs(30))?;
    ensure((report.omega - 1.0).abs() <= 0.02, format!("omega = {}", report.omega))?;
    ensure(report.argmax_t == 1.0, format!("argmax_t = {}", report.argmax_t))?;
    let curve = report.curve_at(0.0).ok_or("no curve at t0 = 0")?;
    for &(eps, _, v) in &curve.pairs {
        ensure((v - (eps - H)).abs() <= 1e-9, format!("curve at t0 = 0: {v} at eps {eps}"))?;
    }
    Ok(format!("omega = {}, argmax_t = {}, curve at 0 = eps - h, {secs:.1} s", report.omega, report.argmax_t))
}

fn criterion_2() -> Check {
    let g = unit_grid();
    let cfg = BracketConfig {
        witness_centers: vec![SampledFunction::parse(&g, "0.5").map_err(m)?],
        ..BracketConfig::default()
    };
    let (_, chi) = mnc_bracket(&powers(10_000)?, 10_000, &cfg).map_err(m)?;
    let (lo, hi) = (chi.lower.as_f64(), chi.upper.as_f64());
    ensure((hi - 0.5).abs() <= 0.01, format!("chi upper bound {hi}"))?;
    ensure(lo >= 0.47, format!("chi lower bound {lo}"))?;
    ensure(lo >= 0.47 && hi <= 0.51 && chi.contains(0.5), format!("chi bracket [{lo}, {hi}]"))?;
    Ok(format!("chi in [{lo:.4}, {hi:.4}]"))
}

fn closed_form(n: f64, k: f64) -> f64 {
    let r = n / k;
    r.powf(n / (k - n)) - r.powf(k / (k - n))
}

fn criterion_3() -> Check {
    let p = geometric_probe(&powers(10_000)?, 100.0, 5).map_err(m)?;
    ensure(p.delta >= 0.94, format!("probe delta {}", p.delta))?;
    ensure(p.alpha.contains(1.0), format!("alpha = 1 outside [{}, {}]", p.alpha.lower, p.alpha.upper))?;
    let mut worst: f64 = 0.0;
    for &(j, k, d) in &p.pairs {
        worst = worst.max((d - closed_form(p.indices[j], p.indices[k])).abs());
    }
    ensure(worst <= 1e-3, format!("largest deviation from the closed form {worst:e}"))?;
    Ok(format!("delta = {:.4}, {} pairs within {worst:.1e} of the closed form", p.delta, p.pairs.len()))
}

fn criterion_4() -> Check {
    let caps = [2_500, 5_000, 10_000];
    let bounded = eta(&powers(10_000)?, &caps, 1.5).map_err(m)?;
    ensure(bounded.value == ExtendedNonNegReal::ZERO, format!("eta(t^n) = {}", bounded.value))?;
    let growing = FunctionFamily::parse(&unit_grid(), "n*t^n", 10_000).map_err(m)?;
    let r = eta(&growing, &caps, 1.5).map_err(m)?;
    ensure(r.value == ExtendedNonNegReal::Infinite, format!("eta(n*t^n) = {}", r.value))?;
    let w = r.divergence_witness.ok_or("no divergence witness")?;
    ensure(w.t == 1.0, format!("witness t = {}", w.t))?;
    ensure(w.growth.iter().all(|&g| (g - 2.0).abs() < 1e-9), format!("growth {:?}", w.growth))?;
    Ok(format!("eta(t^n) = 0, eta(n*t^n) = inf at t = {} with growth {:?}", w.t, w.growth))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let report = axiom_suite(2024, 100, &AxiomConfig::default()).map_err(m)?;
    let secs = within_time(start, Duration::from_secs(60))?;
    let mut counts = Vec::new();
    for (axiom, slack) in [("MN2", None), ("MN3", Some(0.02)), ("MN4", None), ("MN5", Some(0.02)), ("MN6", Some(0.02))] {
        let entries: Vec<_> = report.entries.iter().filter(|e| e.axiom == axiom).collect();
        let trials = entries.iter().filter(|e| e.trial.is_some()).count();
        ensure(trials >= 100, format!("{axiom}: only {trials} randomized checks"))?;
        for e in &entries {
            let expected = match (axiom, slack, e.trial) {
                ("MN2", _, _) => 1e-9,
                ("MN4", _, Some(_)) => e.slack.max(1e-6),
                (_, Some(s), Some(_)) => s,
                _ => e.slack,
            };
            ensure(e.slack <= expected, format!("{axiom}: slack {} on {}", e.slack, e.fixture))?;
            ensure(e.passed, format!("{axiom} fails on {}: {} vs {}", e.fixture, e.lhs, e.rhs))?;
        }
        counts.push(format!("{axiom} {}", entries.len()));
    }
    ensure(report.failures == 0, format!("{} failures", report.failures))?;
    Ok(format!("0 failures ({}), {secs:.1} s", counts.join(", ")))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let mut pairs = 0;
    for n in 1..=5 {
        let s = summarize(&FiniteSpace::new(n).map_err(m)?).map_err(m)?;
        ensure(s.ultrafilters == n, format!("n = {n}: {} ultrafilters", s.ultrafilters))?;
        ensure(s.all_principal && s.principal_bijection, format!("n = {n}: not all principal"))?;
        if n <= 3 {
            ensure(
                s.equivalence_checked.is_some() && s.equivalence_ok == Some(true),
                format!("n = {n}: characterization equivalence not verified"),
            )?;
        }
        let ic = &s.intersection;
        ensure(ic.passed == ic.pairs, format!("n = {n}: {}/{} pairs", ic.passed, ic.pairs))?;
        ensure(ic.empty_star_is_empty, format!("n = {n}: star of the empty set is nonempty"))?;
        pairs += ic.pairs;
    }
    let secs = within_time(start, Duration::from_secs(10))?;
    Ok(format!("n = 1..5 all principal, {pairs} open pairs pass, {secs:.2} s"))
}

fn criterion_7() -> Check {
    let g = unit_grid();
    let op = OperatorSpec::parse(OperatorKind::Volterra, "1", "1", "x", 1.0)
        .and_then(|s| s.compile(&g))
        .map_err(m)?;
    let fp = extract_fixed_point(&op, &SampledFunction::constant(&g, 0.0), 1e-9, 1_000).map_err(m)?;
    let err = sup_distance(&fp.x, &SampledFunction::from_fn(&g, "exp", f64::exp)).map_err(m)?;
    ensure(err <= 1e-4, format!("distance to e^t {err:e}"))?;
    ensure(fp.residual <= 1e-6, format!("residual {:e}", fp.residual))?;
    Ok(format!("distance to e^t {err:.2e}, residual {:.2e}", fp.residual))
}

fn criterion_8() -> Check {
    let g = unit_grid();
    let op = OperatorSpec::parse(OperatorKind::Fredholm, "t", "1", "x", 0.5)
        .and_then(|s| s.compile(&g))
        .map_err(m)?;
    let fp = extract_fixed_point(&op, &SampledFunction::constant(&g, 0.0), 1e-10, 1_000).map_err(m)?;
    let exact = SampledFunction::from_fn(&g, "t + 1/2", |t| t + 0.5);
    let err = sup_distance(&fp.x, &exact).map_err(m)?;
    ensure(err <= 1e-6, format!("distance to t + 1/2 {err:e}"))?;

    // (I - A) x = g by dense LU
    let a = op.quadrature_matrix();
    let n = g.len();
    let mat = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - a[i][j]);
    let dense = mat
        .lu()
        .solve(&DVector::from_column_slice(op.forcing()))
        .ok_or("dense system is singular")?;
    let oracle_err = fp.x.values().iter().zip(dense.iter()).map(|(x, d)| (x - d).abs()).fold(0.0, f64::max);
    ensure(oracle_err <= 1e-6, format!("distance to the dense solve {oracle_err:e}"))?;

    let psi = ComparisonFunction::linear(0.5).map_err(m)?;
    let c1 = random_polynomials(&g, 10, 3, 5).map_err(m)?;
    let cfg = DarboConfig::default();
    let trace = iterate_sets(&op, psi, &c1, 10, 10, 11, &cfg).map_err(m)?;
    let start = trace.omega_values[0].as_f64();
    for k in 0..trace.len() {
        let lhs = trace.omega_values[k].as_f64();
        let rhs = psi.iterate(start, k);
        ensure(lhs <= rhs + 0.02, format!("step {k}: {lhs} > {rhs} + 0.02"))?;
    }
    Ok(format!(
        "distance to t + 1/2 {err:.1e}, to the dense solve {oracle_err:.1e}, bound holds over {} steps",
        trace.len()
    ))
}

fn criterion_9() -> Check {
    let psi = ComparisonFunction::Rational;
    let mut worst: f64 = 0.0;
    for t in [0.1, 1.0, 10.0] {
        let mut v = t;
        for n in 0..=1000usize {
            if n > 0 {
                v = psi.eval(v);
            }
            let exact = t / (1.0 + n as f64 * t);
            worst = worst.max((v - exact).abs());
            ensure((psi.iterate(t, n) - exact).abs() <= 1e-12, format!("t = {t}, n = {n}"))?;
        }
    }
    ensure(worst <= 1e-12, format!("largest deviation {worst:e}"))?;
    Ok(format!("largest deviation {worst:.1e}"))
}

fn criterion_10() -> Check {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixture.toml");
    let run = || -> Result<Vec<u8>, String> {
        let dir = tempfile::tempdir().map_err(m)?;
        let status = Command::new(env!("CARGO_BIN_EXE_mnclab"))
            .args(["measure", "--seed", "7", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path())
            .output()
            .map_err(m)?;
        ensure(status.status.success(), format!("mnclab exited with {}", status.status))?;
        std::fs::read(dir.path().join("report.json")).map_err(m)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, "report.json differs between runs")?;
    Ok(format!("two runs gave identical {}-byte reports", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("omega of the power family", criterion_1),
        ("Hausdorff bracket of the power family", criterion_2),
        ("Kuratowski probe of the power family", criterion_3),
        ("eta zero law and divergence witness", criterion_4),
        ("axiom suite", criterion_5),
        ("finite Wallman lab", criterion_6),
        ("Volterra fixed point", criterion_7),
        ("Fredholm fixed point and set iteration", criterion_8),
        ("rational comparison function iterates", criterion_9),
        ("deterministic measure reports", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
