use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use mnc_core::classical::{geometric_probe, mnc_bracket, BracketConfig, MncBracket, ProbeResult};
use mnc_core::darbo::{
    extract_fixed_point, iterate_sets, random_polynomials, ComparisonCheck, ConditionBReport, DarboConfig,
    DarboTrace, GridOperator, OperatorSpec,
};
use mnc_core::domain::{sup_distance, GridDomain};
use mnc_core::family::{FamilyPart, FunctionFamily, SampledFunction};
use mnc_core::measure::{axiom_suite, AxiomConfig, AxiomReport, MeasureConfig, Omega, OmegaReport};
use mnc_core::wallman::{summarize, FiniteSpace, WallmanSummary};
use serde::Serialize;

use crate::config::{AxiomSpec, OperatorConfig, RunConfig, WallmanSpec};
use crate::output::csv_text;
use crate::svg::{Chart, Series};
use crate::CliError;

pub const MEASURE_HEADER: [&str; 10] = [
    "family",
    "cap",
    "alpha_lower",
    "alpha_upper",
    "chi_lower",
    "chi_upper",
    "eta",
    "omega",
    "Omega",
    "argmax_t",
];

#[derive(Debug, Clone, Serialize)]
pub struct MeasureRow {
    pub family: String,
    pub cap: u64,
    pub members: usize,
    pub alpha: MncBracket,
    pub chi: MncBracket,
    pub probe: Option<ProbeResult>,
    pub omega: OmegaReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointResult {
    pub converged: bool,
    pub residual: f64,
    /// `‖Φx − x‖` from a fresh application to the returned iterate.
    pub recheck_residual: f64,
    pub iters: usize,
    pub averaged: bool,
    pub exact_error: Option<f64>,
    pub solution: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DarboResult {
    pub name: String,
    pub operator: OperatorSpec,
    pub contraction: Option<f64>,
    pub warning: Option<String>,
    pub fixed_point: FixedPointResult,
    pub comparison: Option<ComparisonCheck>,
    pub trace: Option<DarboTrace>,
    pub condition_b: Option<ConditionBReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<MeasureRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<AxiomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wallman: Option<Vec<WallmanSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub darbo: Option<Vec<DarboResult>>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Everything a command produces; written out by the caller.
pub struct Outcome {
    pub report: Report,
    pub csv: Vec<(String, String)>,
    pub svg: Vec<(String, String)>,
    /// Wall-clock seconds per section, kept out of the report so that it is
    /// reproducible.
    pub timings: BTreeMap<String, f64>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new(command: &str, seed: u64, config: &RunConfig) -> Self {
        Outcome {
            report: Report {
                tool: "mnclab",
                version: env!("CARGO_PKG_VERSION"),
                command: command.into(),
                seed,
                config: config.clone(),
                measure: None,
                axioms: None,
                wallman: None,
                darbo: None,
                passed: true,
                failures: Vec::new(),
            },
            csv: Vec::new(),
            svg: Vec::new(),
            timings: BTreeMap::new(),
            summary: Vec::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        self.report.passed = false;
        self.report.failures.push(msg);
    }

    fn timed<T>(&mut self, section: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(section.into(), start.elapsed().as_secs_f64());
        out
    }
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn is_single_parametric(f: &FunctionFamily) -> bool {
    matches!(f.parts(), [FamilyPart::Parametric { .. }])
}

fn measure_rows(config: &RunConfig, grid: &Arc<GridDomain>) -> Result<Vec<MeasureRow>, CliError> {
    let m = &config.measure;
    let centers = m
        .witness_centers
        .iter()
        .map(|c| SampledFunction::parse(grid, c))
        .collect::<Result<Vec<_>, _>>()?;
    let bracket_cfg = BracketConfig {
        probe_ratio: m.probe_ratio,
        probe_levels: m.probe_levels,
        separation_m: m.separation_m,
        witness_centers: centers,
    };
    config
        .families
        .iter()
        .map(|spec| {
            let family = config.build_family(grid, spec)?;
            let members = family.len(spec.cap.unwrap_or(u64::MAX));
            let cap = if family.is_explicit() { members.max(1) as u64 } else { spec.cap.unwrap_or(1) };
            let cfg: MeasureConfig = config.measure_config(cap, spec.cap_schedule.clone());
            let omega = Omega(&family, &cfg)?;
            let (alpha, chi) = mnc_bracket(&family, cap, &bracket_cfg)?;
            let probe = if is_single_parametric(&family) {
                Some(geometric_probe(&family, m.probe_ratio, m.probe_levels)?)
            } else {
                None
            };
            Ok(MeasureRow {
                family: spec.name.clone(),
                cap,
                members,
                alpha,
                chi,
                probe,
                omega,
            })
        })
        .collect()
}

fn measure_csv(rows: &[MeasureRow]) -> Result<String, CliError> {
    let data: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.family.clone(),
                r.cap.to_string(),
                r.alpha.lower.to_string(),
                r.alpha.upper.to_string(),
                r.chi.lower.to_string(),
                r.chi.upper.to_string(),
                r.omega.eta.value.to_string(),
                r.omega.omega.to_string(),
                r.omega.total.to_string(),
                r.omega.argmax_t.to_string(),
            ]
        })
        .collect();
    csv_text(&MEASURE_HEADER, &data)
}

fn omega_svg(row: &MeasureRow, points: &[f64]) -> String {
    let mut wanted: Vec<f64> = points.to_vec();
    if !wanted.contains(&row.omega.argmax_t) {
        wanted.push(row.omega.argmax_t);
    }
    let series = wanted
        .iter()
        .filter_map(|&t| row.omega.curve_at(t))
        .map(|c| Series {
            label: format!("t0 = {}", c.t0),
            points: c.pairs.iter().map(|&(e, _, v)| (e, v)).collect(),
        })
        .collect();
    Chart {
        title: &format!("omega curves: {}", row.family),
        x_label: "eps",
        y_label: "oscillation",
        log_y: false,
        series,
    }
    .render()
}

pub fn cmd_measure(config: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("measure", seed, config);
    run_measure(config, &mut out)?;
    Ok(out)
}

fn run_measure(config: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    if config.families.is_empty() {
        return Err(CliError::Config("measure needs at least one [[family]]".into()));
    }
    let grid = config.grid()?;
    let rows = out.timed("measure", || measure_rows(config, &grid))?;
    out.csv.push(("measure.csv".into(), measure_csv(&rows)?));
    let mut points = config.measure.curve_points.clone();
    if points.is_empty() {
        points = vec![grid.lower(), grid.points()[grid.len() / 2], grid.upper()];
    }
    for (i, r) in rows.iter().enumerate() {
        out.svg.push((format!("omega_curves_{i}_{}.svg", slug(&r.family)), omega_svg(r, &points)));
        out.summary.push(format!(
            "{}: Omega = {} (omega {}, eta {}), argmax t = {}, alpha in [{}, {}], chi in [{}, {}]",
            r.family,
            r.omega.total,
            r.omega.omega,
            r.omega.eta.value,
            r.omega.argmax_t,
            r.alpha.lower,
            r.alpha.upper,
            r.chi.lower,
            r.chi.upper
        ));
    }
    out.report.measure = Some(rows);
    Ok(())
}

pub fn cmd_axioms(config: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("axioms", seed, config);
    run_axioms(config, seed, &mut out)?;
    Ok(out)
}

fn axiom_config(config: &RunConfig, spec: &AxiomSpec) -> AxiomConfig {
    let mut measure = config.measure_config(spec.cap, spec.cap_schedule.clone());
    measure.stabilization_tol = config.measure.stabilization_tol;
    AxiomConfig {
        step: spec.step,
        measure,
        tolerance: spec.tolerance,
        fixture_cap: spec.fixture_cap,
    }
}

fn run_axioms(config: &RunConfig, seed: u64, out: &mut Outcome) -> Result<(), CliError> {
    let spec = config.axioms.clone().unwrap_or_default();
    let cfg = axiom_config(config, &spec);
    let report = out.timed("axioms", || axiom_suite(seed, spec.trials, &cfg))?;
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.axiom.clone(),
                e.trial.map_or_else(|| "fixture".into(), |t| t.to_string()),
                e.fixture.clone(),
                e.lhs.to_string(),
                e.rhs.to_string(),
                e.slack.to_string(),
                e.passed.to_string(),
            ]
        })
        .collect();
    out.csv.push((
        "axioms.csv".into(),
        csv_text(&["axiom", "trial", "fixture", "lhs", "rhs", "slack", "passed"], &rows)?,
    ));
    for axiom in ["MN2", "MN3", "MN4", "MN5", "MN6"] {
        let total = report.entries.iter().filter(|e| e.axiom == axiom).count();
        let failed = report.failures_for(axiom);
        out.summary.push(format!("{axiom}: {}/{total} pass", total - failed));
    }
    for e in report.entries.iter().filter(|e| !e.passed) {
        out.fail(format!(
            "{} failed (trial {:?}): {} vs {} with slack {} on {}",
            e.axiom, e.trial, e.lhs, e.rhs, e.slack, e.fixture
        ));
    }
    out.report.axioms = Some(report);
    Ok(())
}

pub fn cmd_wallman(config: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("wallman", seed, config);
    run_wallman(config, &mut out)?;
    Ok(out)
}

fn run_wallman(config: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let spec: WallmanSpec = config.wallman.clone().unwrap_or_default();
    let summaries = out.timed("wallman", || {
        spec.sizes
            .iter()
            .map(|&n| summarize(&FiniteSpace::new(n)?))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                s.ultrafilters.to_string(),
                s.all_principal.to_string(),
                s.principal_bijection.to_string(),
                s.characterization_ok.to_string(),
                s.equivalence_checked.map_or_else(String::new, |c| c.to_string()),
                s.union_ok.to_string(),
                s.intersection.pairs.to_string(),
                s.intersection.passed.to_string(),
                s.intersection.empty_star_is_empty.to_string(),
                s.ok().to_string(),
            ]
        })
        .collect();
    out.csv.push((
        "wallman.csv".into(),
        csv_text(
            &[
                "n",
                "ultrafilters",
                "all_principal",
                "principal_bijection",
                "characterization_ok",
                "equivalence_checked",
                "union_ok",
                "intersection_pairs",
                "intersection_passed",
                "empty_star_is_empty",
                "ok",
            ],
            &rows,
        )?,
    ));
    for s in &summaries {
        out.summary.push(format!("n = {}: {}", s.n, s.headline()));
        if !s.ok() {
            out.fail(format!("wallman n = {}: {}", s.n, s.headline()));
        }
    }
    out.report.wallman = Some(summaries);
    Ok(())
}

pub fn cmd_darbo(config: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("darbo", seed, config);
    run_darbo(config, seed, &mut out)?;
    Ok(out)
}

fn darbo_one(
    config: &RunConfig,
    grid: &Arc<GridDomain>,
    op_cfg: &OperatorConfig,
    seed: u64,
    failures: &mut Vec<String>,
) -> Result<DarboResult, CliError> {
    let spec = config.build_operator(op_cfg)?;
    let op = spec.compile(grid)?;
    let name = &op_cfg.name;
    let x0 = SampledFunction::parse(grid, &op_cfg.x0)?;
    let fixed_point = match extract_fixed_point(&op, &x0, op_cfg.tol, op_cfg.max_iter) {
        Ok(fp) => {
            let recheck = sup_distance(&op.apply(&fp.x)?, &fp.x)?;
            if recheck > op_cfg.tol {
                failures.push(format!("{name}: recomputed residual {recheck:e} exceeds tol {:e}", op_cfg.tol));
            }
            let exact_error = match &op_cfg.exact {
                Some(src) => Some(sup_distance(&fp.x, &SampledFunction::parse(grid, src)?)?),
                None => None,
            };
            if let Some(err) = exact_error {
                let tol = op_cfg.exact_tol.unwrap_or(1e-4);
                if err > tol {
                    failures.push(format!("{name}: distance {err:e} to the exact solution exceeds {tol:e}"));
                }
            }
            FixedPointResult {
                converged: true,
                residual: fp.residual,
                recheck_residual: recheck,
                iters: fp.iters,
                averaged: fp.averaged,
                exact_error,
                solution: fp.x.into_values(),
            }
        }
        Err(mnc_core::Error::NotConverged { best, residual, iters }) => {
            failures.push(format!("{name}: no fixed point within {iters} iterations (best residual {residual:e})"));
            FixedPointResult {
                converged: false,
                residual,
                recheck_residual: sup_distance(&op.apply(&best)?, &best)?,
                iters,
                averaged: true,
                exact_error: None,
                solution: best.into_values(),
            }
        }
        Err(e) => return Err(e.into()),
    };

    let (mut comparison, mut trace, mut condition_b) = (None, None, None);
    if let Some(tr) = &op_cfg.trace {
        let psi = tr.psi.build()?;
        let check = psi.check();
        if !check.ok() {
            failures.push(format!("{name}: comparison function failed its checks: {check:?}"));
        }
        comparison = Some(check);
        let dcfg = DarboConfig {
            measure: config.measure_config(1, None),
            draws: tr.draws,
            ..DarboConfig::default()
        };
        let refs: Vec<&str> = tr.initial.iter().map(String::as_str).collect();
        let c1 = FunctionFamily::from_point_exprs(grid, &refs)?;
        let t = iterate_sets(&op, psi, &c1, tr.ensemble_size, tr.n_max, seed, &dcfg)?;
        for (k, ok) in t.bound_holds.iter().enumerate() {
            if !ok {
                failures.push(format!(
                    "{name}: step {k}: Omega {} exceeds bound {} + {}",
                    t.omega_values[k], t.bound_values[k], dcfg.bound_tol
                ));
            }
        }
        trace = Some(t);
        if tr.condition_b_samples > 0 {
            let mut samples = vec![FunctionFamily::explicit(grid, vec![x0.clone()])?];
            for i in 0..tr.condition_b_samples {
                samples.push(random_polynomials(grid, 20, 3, seed.wrapping_add(i as u64))?);
            }
            let rep = mnc_core::darbo::verify_condition_b(&op, psi, &samples, &dcfg)?;
            for e in rep.entries.iter().filter(|e| !e.passed) {
                failures.push(format!(
                    "{name}: condition (B) fails on {}: Omega {} vs {}, diameter {} vs {}",
                    e.family, e.omega_image, e.psi_of_omega, e.diameter_image, e.psi_of_diameter
                ));
            }
            condition_b = Some(rep);
        }
    }
    Ok(DarboResult {
        name: name.clone(),
        operator: spec,
        contraction: op.contraction(),
        warning: op.warning().map(str::to_string),
        fixed_point,
        comparison,
        trace,
        condition_b,
    })
}

fn darbo_svg(r: &DarboResult, grid: &GridDomain) -> String {
    match &r.trace {
        Some(t) => {
            let step = |v: &[f64]| v.iter().enumerate().map(|(k, &y)| (k as f64, y)).collect();
            let omega: Vec<f64> = t.omega_values.iter().map(|v| v.as_f64()).collect();
            let bound: Vec<f64> = t.bound_values.iter().map(|v| v.as_f64()).collect();
            Chart {
                title: &format!("set iteration: {}", r.name),
                x_label: "iteration",
                y_label: "value (log scale)",
                log_y: true,
                series: vec![
                    Series { label: "Omega".into(), points: step(&omega) },
                    Series { label: "psi bound".into(), points: step(&bound) },
                    Series { label: "diameter".into(), points: step(&t.diameters) },
                    Series { label: "residual".into(), points: step(&t.residuals) },
                ],
            }
            .render()
        }
        None => Chart {
            title: &format!("fixed point: {}", r.name),
            x_label: "t",
            y_label: "x(t)",
            log_y: false,
            series: vec![Series {
                label: "x".into(),
                points: grid.points().iter().copied().zip(r.fixed_point.solution.iter().copied()).collect(),
            }],
        }
        .render(),
    }
}

fn run_darbo(config: &RunConfig, seed: u64, out: &mut Outcome) -> Result<(), CliError> {
    if config.operators.is_empty() {
        return Err(CliError::Config("darbo needs at least one [[operator]]".into()));
    }
    let grid = config.grid()?;
    let mut failures = Vec::new();
    let results = out.timed("darbo", || {
        config
            .operators
            .iter()
            .map(|op| darbo_one(config, &grid, op, seed, &mut failures))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut rows = Vec::new();
    for r in &results {
        out.svg.push((format!("darbo_{}.svg", slug(&r.name)), darbo_svg(r, &grid)));
        out.summary.push(format!(
            "{}: residual {:e} after {} iterations{}{}",
            r.name,
            r.fixed_point.recheck_residual,
            r.fixed_point.iters,
            r.fixed_point.exact_error.map_or_else(String::new, |e| format!(", distance to exact solution {e:e}")),
            r.trace.as_ref().map_or_else(String::new, |t| format!(
                ", trace of {} ensembles {} the psi bound",
                t.len(),
                if t.bound_satisfied() { "within" } else { "violating" }
            ))
        ));
        if let Some(t) = &r.trace {
            for k in 0..t.len() {
                rows.push(vec![
                    r.name.clone(),
                    k.to_string(),
                    t.sizes[k].to_string(),
                    t.omega_values[k].to_string(),
                    t.bound_values[k].to_string(),
                    t.diameters[k].to_string(),
                    t.residuals[k].to_string(),
                    t.bound_holds[k].to_string(),
                ]);
            }
        }
    }
    out.csv.push((
        "darbo.csv".into(),
        csv_text(
            &["operator", "iteration", "size", "Omega", "bound", "diameter", "residual", "bound_holds"],
            &rows,
        )?,
    ));
    for f in failures {
        out.fail(f);
    }
    out.report.darbo = Some(results);
    Ok(())
}

/// Every section the config defines: measure for `[[family]]`, axioms for
/// `[axioms]`, wallman for `[wallman]` and darbo for `[[operator]]`.
pub fn cmd_report(config: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("report", seed, config);
    if !config.families.is_empty() {
        run_measure(config, &mut out)?;
    }
    if config.axioms.is_some() {
        run_axioms(config, seed, &mut out)?;
    }
    if config.wallman.is_some() {
        run_wallman(config, &mut out)?;
    }
    if !config.operators.is_empty() {
        run_darbo(config, seed, &mut out)?;
    }
    Ok(out)
}
