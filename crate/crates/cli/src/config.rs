//! Run configuration: a TOML file validated before any computation.
//!
//! The schema is documented in `docs/config.md`. Unknown keys are rejected.

use std::path::Path;
use std::sync::Arc;

use mnc_core::darbo::{ComparisonFunction, OperatorKind, OperatorSpec};
use mnc_core::domain::{make_grid, GridDomain};
use mnc_core::expr::{parse_expr, POINT_VARS};
use mnc_core::family::{FunctionFamily, SampledFunction};
use mnc_core::measure::{MeasureConfig, DEFAULT_DIVERGENCE_FACTOR, DEFAULT_STABILIZATION_TOL};
use mnc_core::wallman::MAX_POINTS;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default, rename = "family")]
    pub families: Vec<FamilySpec>,
    #[serde(default)]
    pub axioms: Option<AxiomSpec>,
    #[serde(default)]
    pub wallman: Option<WallmanSpec>,
    #[serde(default, rename = "operator")]
    pub operators: Vec<OperatorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

fn default_eps() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}
fn default_factor() -> f64 {
    DEFAULT_DIVERGENCE_FACTOR
}
fn default_stab() -> f64 {
    DEFAULT_STABILIZATION_TOL
}
fn default_ratio() -> f64 {
    100.0
}
fn default_levels() -> usize {
    5
}
fn default_sep() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default = "default_eps")]
    pub eps_schedule: Vec<f64>,
    #[serde(default = "default_factor")]
    pub divergence_factor: f64,
    #[serde(default = "default_stab")]
    pub stabilization_tol: f64,
    #[serde(default = "default_ratio")]
    pub probe_ratio: f64,
    #[serde(default = "default_levels")]
    pub probe_levels: usize,
    #[serde(default = "default_sep")]
    pub separation_m: usize,
    /// Expressions in `t` used as single-ball centers.
    #[serde(default)]
    pub witness_centers: Vec<String>,
    /// Points whose ω-curves are plotted; the argmax is always added.
    #[serde(default)]
    pub curve_points: Vec<f64>,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec {
            eps_schedule: default_eps(),
            divergence_factor: default_factor(),
            stabilization_tol: default_stab(),
            probe_ratio: default_ratio(),
            probe_levels: default_levels(),
            separation_m: default_sep(),
            witness_centers: Vec::new(),
            curve_points: Vec::new(),
        }
    }
}

/// Either `expr` (in `t` and `n`, members `n = 1..=cap`) or `members`
/// (expressions in `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(default)]
    pub expr: Option<String>,
    #[serde(default)]
    pub members: Option<Vec<String>>,
    #[serde(default)]
    pub cap: Option<u64>,
    #[serde(default)]
    pub cap_schedule: Option<Vec<u64>>,
    #[serde(default)]
    pub scale: Option<f64>,
}

fn default_trials() -> usize {
    100
}
fn default_axiom_cap() -> u64 {
    1_000
}
fn default_fixture_cap() -> u64 {
    10_000
}
fn default_axiom_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_axiom_cap")]
    pub cap: u64,
    #[serde(default)]
    pub cap_schedule: Option<Vec<u64>>,
    #[serde(default = "default_fixture_cap")]
    pub fixture_cap: u64,
    #[serde(default = "default_stab")]
    pub tolerance: f64,
    #[serde(default = "default_axiom_step")]
    pub step: f64,
}

impl Default for AxiomSpec {
    fn default() -> Self {
        AxiomSpec {
            trials: default_trials(),
            cap: default_axiom_cap(),
            cap_schedule: None,
            fixture_cap: default_fixture_cap(),
            tolerance: default_stab(),
            step: default_axiom_step(),
        }
    }
}

fn default_sizes() -> Vec<usize> {
    (1..=MAX_POINTS).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallmanSpec {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
}

impl Default for WallmanSpec {
    fn default() -> Self {
        WallmanSpec { sizes: default_sizes() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSpec {
    Fredholm,
    Volterra,
}

fn identity() -> String {
    "x".into()
}
fn zero() -> String {
    "0".into()
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub name: String,
    pub kind: KindSpec,
    pub forcing: String,
    pub kernel: String,
    #[serde(default = "identity")]
    pub nonlinearity: String,
    pub lambda: f64,
    #[serde(default)]
    pub lipschitz: Option<f64>,
    /// Starting function for fixed-point extraction.
    #[serde(default = "zero")]
    pub x0: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Known solution, compared in sup norm against `exact_tol`.
    #[serde(default)]
    pub exact: Option<String>,
    #[serde(default)]
    pub exact_tol: Option<f64>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum PsiSpec {
    Linear { q: f64 },
    Rational,
}

impl PsiSpec {
    pub fn build(&self) -> Result<ComparisonFunction, CliError> {
        match *self {
            PsiSpec::Linear { q } => ComparisonFunction::linear(q).map_err(config_err),
            PsiSpec::Rational => Ok(ComparisonFunction::Rational),
        }
    }
}

fn default_ensemble() -> usize {
    10
}
fn default_nmax() -> usize {
    10
}
fn default_draws() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub psi: PsiSpec,
    /// Initial ensemble as expressions in `t`.
    pub initial: Vec<String>,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_nmax")]
    pub n_max: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Random polynomial families for the condition (B) check; 0 skips it.
    #[serde(default)]
    pub condition_b_samples: usize,
}

pub(crate) fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Arc<GridDomain>, CliError> {
        let d = &self.domain;
        make_grid(d.lower, d.upper, d.step).map(Arc::new).map_err(config_err)
    }

    pub fn measure_config(&self, cap: u64, cap_schedule: Option<Vec<u64>>) -> MeasureConfig {
        MeasureConfig {
            eps_schedule: self.measure.eps_schedule.clone(),
            cap,
            cap_schedule,
            divergence_factor: self.measure.divergence_factor,
            stabilization_tol: self.measure.stabilization_tol,
        }
    }

    /// Checks everything that can be checked without running a computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.grid()?;
        let m = &self.measure;
        if m.eps_schedule.is_empty() || m.eps_schedule.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(CliError::Config(format!(
                "measure.eps_schedule must be nonempty and strictly decreasing, got {:?}",
                m.eps_schedule
            )));
        }
        if let Some(&e) = m.eps_schedule.iter().find(|&&e| !(e > grid.step())) {
            return Err(CliError::Config(format!(
                "measure.eps_schedule entry {e} is not above the grid step {}",
                grid.step()
            )));
        }
        if !(m.divergence_factor > 1.0) {
            return Err(CliError::Config("measure.divergence_factor must exceed 1".into()));
        }
        positive("measure.stabilization_tol", m.stabilization_tol)?;
        if !(m.probe_ratio > 1.0) || m.probe_levels < 2 || m.separation_m < 2 {
            return Err(CliError::Config(
                "measure needs probe_ratio > 1, probe_levels >= 2 and separation_m >= 2".into(),
            ));
        }
        for c in &m.witness_centers {
            SampledFunction::parse(&grid, c).map_err(|e| CliError::Config(format!("witness center `{c}`: {e}")))?;
        }
        for &t in &m.curve_points {
            grid.index_of(t).map_err(|e| CliError::Config(format!("measure.curve_points: {e}")))?;
        }

        let mut names = std::collections::BTreeSet::new();
        for f in &self.families {
            if !names.insert(f.name.as_str()) {
                return Err(CliError::Config(format!("duplicate family name `{}`", f.name)));
            }
            self.build_family(&grid, f)?;
            if let Some(s) = &f.cap_schedule {
                if s.len() < 3 || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(CliError::Config(format!(
                        "family `{}`: cap_schedule must be strictly increasing with at least 3 entries",
                        f.name
                    )));
                }
            } else if f.expr.is_some() && f.cap.unwrap_or(0) < 4 {
                return Err(CliError::Config(format!(
                    "family `{}`: cap must be at least 4 without an explicit cap_schedule",
                    f.name
                )));
            }
        }

        if let Some(a) = &self.axioms {
            if a.trials == 0 || a.cap < 4 || a.fixture_cap < 4 {
                return Err(CliError::Config("axioms needs trials >= 1, cap >= 4 and fixture_cap >= 4".into()));
            }
            positive("axioms.tolerance", a.tolerance)?;
            positive("axioms.step", a.step)?;
            if let Some(&e) = m.eps_schedule.iter().find(|&&e| !(e > a.step)) {
                return Err(CliError::Config(format!("measure.eps_schedule entry {e} is not above axioms.step")));
            }
        }

        if let Some(w) = &self.wallman {
            if let Some(&n) = w.sizes.iter().find(|&&n| !(1..=MAX_POINTS).contains(&n)) {
                return Err(CliError::Config(format!("wallman.sizes entry {n} is outside 1..={MAX_POINTS}")));
            }
        }

        for op in &self.operators {
            self.build_operator(op)?;
            parse_expr(&op.x0, POINT_VARS).map_err(|e| CliError::Config(format!("operator `{}` x0: {e}", op.name)))?;
            if let Some(x) = &op.exact {
                parse_expr(x, POINT_VARS).map_err(|e| CliError::Config(format!("operator `{}` exact: {e}", op.name)))?;
            }
            positive("operator.tol", op.tol)?;
            if let Some(t) = op.exact_tol {
                positive("operator.exact_tol", t)?;
            }
            if let Some(tr) = &op.trace {
                tr.psi.build()?;
                if tr.initial.is_empty() || tr.initial.len() > tr.ensemble_size || tr.n_max == 0 {
                    return Err(CliError::Config(format!(
                        "operator `{}` trace: need 1..=ensemble_size initial members and n_max >= 1",
                        op.name
                    )));
                }
                for s in &tr.initial {
                    parse_expr(s, POINT_VARS)
                        .map_err(|e| CliError::Config(format!("operator `{}` trace member `{s}`: {e}", op.name)))?;
                }
            }
        }
        Ok(())
    }

    pub fn build_family(&self, grid: &Arc<GridDomain>, f: &FamilySpec) -> Result<FunctionFamily, CliError> {
        let ctx = |e: mnc_core::Error| CliError::Config(format!("family `{}`: {e}", f.name));
        let family = match (&f.expr, &f.members) {
            (Some(expr), None) => {
                let cap = f.cap.ok_or_else(|| CliError::Config(format!("family `{}` needs a cap", f.name)))?;
                FunctionFamily::parse(grid, expr, cap).map_err(ctx)?
            }
            (None, Some(members)) => {
                let refs: Vec<&str> = members.iter().map(String::as_str).collect();
                FunctionFamily::from_point_exprs(grid, &refs).map_err(ctx)?
            }
            _ => {
                return Err(CliError::Config(format!(
                    "family `{}` needs exactly one of `expr` and `members`",
                    f.name
                )))
            }
        };
        match f.scale {
            Some(l) => mnc_core::family::scale(&family, l).map_err(ctx),
            None => Ok(family),
        }
    }

    pub fn build_operator(&self, op: &OperatorConfig) -> Result<OperatorSpec, CliError> {
        let kind = match op.kind {
            KindSpec::Fredholm => OperatorKind::Fredholm,
            KindSpec::Volterra => OperatorKind::Volterra,
        };
        let spec = OperatorSpec::parse(kind, &op.forcing, &op.kernel, &op.nonlinearity, op.lambda)
            .map_err(|e| CliError::Config(format!("operator `{}`: {e}", op.name)))?;
        Ok(match op.lipschitz {
            Some(l) => spec.with_lipschitz(l),
            None => spec,
        })
    }
}
