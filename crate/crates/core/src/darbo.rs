//! Integral operators on grid functions, comparison functions, the set
//! iteration `C_{n+1} = conv Φ(C_n)` and fixed-point extraction.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{sup_distance_values, GridDomain};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Env, Expr, Var, KERNEL_VARS, NONLINEARITY_VARS, POINT_VARS};
use crate::extended::ExtendedNonNegReal;
use crate::family::{convex_sample_with_draws, materialize, ConvexDraw, FunctionFamily, SampledFunction};
use crate::measure::{omega_hat, MeasureConfig};

/// A map on functions sampled on one grid.
pub trait GridOperator: Sync {
    fn domain(&self) -> &Arc<GridDomain>;
    fn apply(&self, x: &SampledFunction) -> Result<SampledFunction>;
}

#[derive(Debug, Clone)]
pub struct IdentityOperator(pub Arc<GridDomain>);

impl GridOperator for IdentityOperator {
    fn domain(&self) -> &Arc<GridDomain> {
        &self.0
    }

    fn apply(&self, x: &SampledFunction) -> Result<SampledFunction> {
        Ok(x.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Fredholm,
    Volterra,
}

/// `(Φx)(t) = g(t) + λ ∫ k(t, s) φ(x(s)) ds`, over the whole interval
/// (Fredholm) or over `[lower, t]` (Volterra).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub forcing: Expr,
    pub kernel: Expr,
    pub nonlinearity: Expr,
    pub lambda: f64,
    /// Declared Lipschitz constant of `φ`.
    pub lipschitz: Option<f64>,
}

impl OperatorSpec {
    pub fn parse(kind: OperatorKind, forcing: &str, kernel: &str, nonlinearity: &str, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda {lambda} is not finite")));
        }
        Ok(OperatorSpec {
            kind,
            forcing: parse_expr(forcing, POINT_VARS)?,
            kernel: parse_expr(kernel, KERNEL_VARS)?,
            nonlinearity: parse_expr(nonlinearity, NONLINEARITY_VARS)?,
            lambda,
            lipschitz: None,
        })
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// Samples the forcing and kernel on `domain`.
    pub fn compile(&self, domain: &Arc<GridDomain>) -> Result<CompiledOperator> {
        let pts = domain.points();
        let g = pts
            .iter()
            .map(|&t| finite(self.forcing.eval(&Env::point(t)), || format!("forcing at t = {t}")))
            .collect::<Result<Vec<_>>>()?;
        let kernel = pts
            .par_iter()
            .map(|&t| {
                pts.iter()
                    .map(|&s| {
                        let env = Env { s, ..Env::point(t) };
                        finite(self.kernel.eval(&env), || format!("kernel at t = {t}, s = {s}"))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let sup_k = kernel.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()));
        let lipschitz = self
            .lipschitz
            .or_else(|| (self.nonlinearity == Expr::Var(Var::X)).then_some(1.0));
        let width = domain.upper() - domain.lower();
        let contraction = lipschitz.map(|l| self.lambda.abs() * sup_k * l * width);
        let warning = match contraction {
            Some(q) if q < 1.0 => None,
            Some(q) => Some(format!("contraction constant {q} is not below 1")),
            None => Some("no Lipschitz bound declared for the nonlinearity; contractivity unchecked".into()),
        };
        Ok(CompiledOperator {
            spec: self.clone(),
            domain: Arc::clone(domain),
            weights: domain.trapezoid_weights(),
            g,
            kernel,
            contraction,
            warning,
        })
    }
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{} is {v}", what())))
    }
}

/// An operator with forcing and kernel sampled on a grid.
#[derive(Debug, Clone)]
pub struct CompiledOperator {
    spec: OperatorSpec,
    domain: Arc<GridDomain>,
    weights: Vec<f64>,
    g: Vec<f64>,
    kernel: Vec<Vec<f64>>,
    contraction: Option<f64>,
    warning: Option<String>,
}

impl CompiledOperator {
    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    /// `|λ| sup|k| L (upper - lower)` when a Lipschitz bound `L` is known.
    pub fn contraction(&self) -> Option<f64> {
        self.contraction
    }

    /// Set when contractivity could not be confirmed.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// The matrix `A` with `(Φx)_i = g_i + Σ_j A_ij φ(x_j)`.
    pub fn quadrature_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.g.len();
        let pts = self.domain.points();
        (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                match self.spec.kind {
                    OperatorKind::Fredholm => {
                        for j in 0..n {
                            row[j] = self.spec.lambda * self.weights[j] * self.kernel[i][j];
                        }
                    }
                    OperatorKind::Volterra => {
                        for j in 0..i {
                            let half = 0.5 * (pts[j + 1] - pts[j]) * self.spec.lambda;
                            row[j] += half * self.kernel[i][j];
                            row[j + 1] += half * self.kernel[i][j + 1];
                        }
                    }
                }
                row
            })
            .collect()
    }

    pub fn forcing(&self) -> &[f64] {
        &self.g
    }
}

impl GridOperator for CompiledOperator {
    fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    fn apply(&self, x: &SampledFunction) -> Result<SampledFunction> {
        if !crate::family::same_domain(x.domain(), &self.domain) {
            return Err(Error::GridMismatch);
        }
        let pts = self.domain.points();
        let phi = x
            .values()
            .iter()
            .map(|&v| {
                let env = Env { x: v, ..Env::point(0.0) };
                finite(self.spec.nonlinearity.eval(&env), || format!("nonlinearity at x = {v}"))
            })
            .collect::<Result<Vec<_>>>()?;
        let lambda = self.spec.lambda;
        let values: Vec<f64> = (0..pts.len())
            .into_par_iter()
            .map(|i| {
                let k = &self.kernel[i];
                let integral = match self.spec.kind {
                    OperatorKind::Fredholm => (0..pts.len()).map(|j| self.weights[j] * k[j] * phi[j]).sum::<f64>(),
                    OperatorKind::Volterra => (0..i)
                        .map(|j| 0.5 * (pts[j + 1] - pts[j]) * (k[j] * phi[j] + k[j + 1] * phi[j + 1]))
                        .sum(),
                };
                self.g[i] + lambda * integral
            })
            .collect();
        SampledFunction::new(&self.domain, format!("Φ({})", x.label()), values)
    }
}

pub fn apply_operator(op: &impl GridOperator, x: &SampledFunction) -> Result<SampledFunction> {
    op.apply(x)
}

/// A nondecreasing `ψ : [0, inf) -> [0, inf)` with `ψ^(n)(t) -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComparisonFunction {
    /// `q t` with `0 <= q < 1`.
    Linear { q: f64 },
    /// `t / (1 + t)`.
    Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCheck {
    pub nondecreasing: bool,
    pub iterates_nonincreasing: bool,
    /// `ψ^(10^4)(t) <= 1e-3 t` for each probe `t`.
    pub decays: bool,
    pub probes: Vec<(f64, f64)>,
}

impl ComparisonCheck {
    pub fn ok(&self) -> bool {
        self.nondecreasing && self.iterates_nonincreasing && self.decays
    }
}

impl ComparisonFunction {
    pub fn linear(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("linear comparison needs 0 <= q < 1, got {q}")));
        }
        Ok(ComparisonFunction::Linear { q })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ComparisonFunction::Linear { q } => q * t,
            ComparisonFunction::Rational => t / (1.0 + t),
        }
    }

    /// `ψ^(n)(t)` by repeated application.
    pub fn iterate(&self, t: f64, n: usize) -> f64 {
        (0..n).fold(t, |v, _| self.eval(v))
    }

    pub fn eval_ext(&self, t: ExtendedNonNegReal) -> ExtendedNonNegReal {
        match (self, t) {
            (_, ExtendedNonNegReal::Finite(v)) => ExtendedNonNegReal::finite(self.eval(v)),
            (ComparisonFunction::Rational, ExtendedNonNegReal::Infinite) => ExtendedNonNegReal::finite(1.0),
            (ComparisonFunction::Linear { q }, ExtendedNonNegReal::Infinite) => {
                ExtendedNonNegReal::Infinite.scale(*q)
            }
        }
    }

    /// Iterations after which `ψ^(n)(t) <= target`.
    pub fn iterations_to(&self, t: f64, target: f64) -> u64 {
        if t <= target {
            return 0;
        }
        match *self {
            ComparisonFunction::Linear { q } if q == 0.0 => 1,
            ComparisonFunction::Linear { q } => ((t / target).ln() / (1.0 / q).ln()).ceil() as u64,
            ComparisonFunction::Rational => (1.0 / target - 1.0 / t).ceil() as u64,
        }
    }

    /// Samples monotonicity on `[0, 100]` and decay of iterates from
    /// `t ∈ {0.1, 1, 10}` over at most `10^4` steps.
    pub fn check(&self) -> ComparisonCheck {
        let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 * 0.01).collect();
        let nondecreasing = grid.windows(2).all(|w| self.eval(w[0]) <= self.eval(w[1]));
        let mut iterates_nonincreasing = true;
        let mut probes = Vec::new();
        for t in [0.1, 1.0, 10.0] {
            let mut v = t;
            for _ in 0..10_000 {
                let next = self.eval(v);
                iterates_nonincreasing &= next <= v;
                v = next;
            }
            probes.push((t, v));
        }
        let decays = probes.iter().all(|&(t, v)| v <= 1e-3 * t);
        ComparisonCheck {
            nondecreasing,
            iterates_nonincreasing,
            decays,
            probes,
        }
    }
}

/// Settings for [`iterate_sets`] and [`verify_condition_b`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarboConfig {
    pub measure: MeasureConfig,
    /// Convex combinations added to each image before thinning.
    pub draws: usize,
    /// Stop once the ensemble diameter drops below this.
    pub diameter_tol: f64,
    /// Slack in the `ψ` bound comparisons.
    pub bound_tol: f64,
}

impl Default for DarboConfig {
    fn default() -> Self {
        DarboConfig {
            measure: MeasureConfig::new(vec![0.1, 0.05, 0.01], 1),
            draws: 20,
            diameter_tol: 1e-9,
            bound_tol: 0.02,
        }
    }
}

/// One kept member of `C_{n+1}` as a convex combination of `Φ(C_n)`.
pub type Provenance = ConvexDraw;

#[derive(Debug, Clone, Serialize)]
pub struct DarboTrace {
    #[serde(skip)]
    pub ensembles: Vec<Vec<SampledFunction>>,
    /// `provenance[k][j]`: member `j` of `C_{k+2}` over `Φ(C_{k+1})`.
    #[serde(skip)]
    pub provenance: Vec<Vec<Provenance>>,
    pub sizes: Vec<usize>,
    /// `Ω̂(C_{k+1})`.
    pub omega_values: Vec<ExtendedNonNegReal>,
    /// `ψ^(k)(Ω̂(C_1))`.
    pub bound_values: Vec<ExtendedNonNegReal>,
    pub diameters: Vec<f64>,
    /// `max_{x ∈ C_{k+1}} ‖Φx − x‖`; the last ensemble's entry is computed
    /// with one extra application.
    pub residuals: Vec<f64>,
    pub bound_holds: Vec<bool>,
}

impl DarboTrace {
    pub fn len(&self) -> usize {
        self.omega_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_values.is_empty()
    }

    pub fn bound_satisfied(&self) -> bool {
        self.bound_holds.iter().all(|&b| b)
    }
}

fn diameter(members: &[SampledFunction]) -> f64 {
    (0..members.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..members.len())
                .map(|j| sup_distance_values(members[i].values(), members[j].values()))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Greedy farthest-point subset of at most `size` members, seeded at member 0;
/// stops early once every remaining member duplicates a kept one up to
/// rounding (convex combinations of equal functions are not bit-equal).
fn thin(members: &[SampledFunction], size: usize) -> Vec<usize> {
    let duplicate = 1e-12 * members[0].sup_norm().max(1.0);
    let mut kept = vec![0];
    let mut nearest: Vec<f64> = members
        .par_iter()
        .map(|m| sup_distance_values(m.values(), members[0].values()))
        .collect();
    while kept.len() < size {
        let (next, far) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, &d)| if d > bd { (i, d) } else { (bi, bd) });
        if !(far > duplicate) {
            break;
        }
        kept.push(next);
        let center = members[next].values();
        nearest
            .par_iter_mut()
            .zip(members.par_iter())
            .for_each(|(n, m)| *n = n.min(sup_distance_values(m.values(), center)));
    }
    kept
}

fn explicit_members(family: &FunctionFamily) -> Result<Vec<SampledFunction>> {
    if !family.is_explicit() {
        return Err(Error::InvalidArgument("expected an explicit family".into()));
    }
    materialize(family, 1)
}

fn apply_all(op: &impl GridOperator, xs: &[SampledFunction]) -> Result<Vec<SampledFunction>> {
    xs.par_iter().map(|x| op.apply(x)).collect()
}

fn family_of(domain: &Arc<GridDomain>, members: Vec<SampledFunction>) -> Result<FunctionFamily> {
    FunctionFamily::explicit(domain, members)
}

/// Runs `C_{n+1} = conv Φ(C_n)` for at most `n_max` steps.
///
/// Each image is augmented with random convex combinations and thinned back
/// to `ensemble_size` members by farthest-point selection. Every kept member
/// is recorded as a convex combination of the image, so the nesting in the
/// closed convex hull can be checked afterwards.
pub fn iterate_sets(
    op: &impl GridOperator,
    psi: ComparisonFunction,
    c1: &FunctionFamily,
    ensemble_size: usize,
    n_max: usize,
    seed: u64,
    config: &DarboConfig,
) -> Result<DarboTrace> {
    if n_max == 0 || ensemble_size == 0 {
        return Err(Error::InvalidArgument("n_max and ensemble_size must be >= 1".into()));
    }
    let domain = Arc::clone(op.domain());
    let mut current = explicit_members(c1)?;
    if current.is_empty() || current.len() > ensemble_size {
        return Err(Error::InvalidArgument(format!(
            "initial ensemble has {} members; expected 1..={ensemble_size}",
            current.len()
        )));
    }
    let omega0 = omega_hat(&family_of(&domain, current.clone())?, &config.measure)?;
    let initial_diameter = diameter(&current);
    let mut trace = DarboTrace {
        ensembles: vec![current.clone()],
        provenance: Vec::new(),
        sizes: vec![current.len()],
        omega_values: vec![omega0],
        bound_values: vec![omega0],
        diameters: vec![initial_diameter],
        residuals: Vec::new(),
        bound_holds: vec![true],
    };
    let mut image = apply_all(op, &current)?;
    for step in 1..=n_max {
        trace.residuals.push(residual_of(&current, &image));
        if trace.diameters[step - 1] < config.diameter_tol {
            break;
        }
        let image_family = family_of(&domain, image.clone())?;
        let draw_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(step as u64);
        let (augmented, draws) = convex_sample_with_draws(&image_family, config.draws, draw_seed)?;
        let pool = materialize(&augmented, 1)?;
        let kept = thin(&pool, ensemble_size);
        let provenance: Vec<Provenance> = kept
            .iter()
            .map(|&k| {
                if k < image.len() {
                    ConvexDraw { terms: vec![(k, 1.0)] }
                } else {
                    draws[k - image.len()].clone()
                }
            })
            .collect();
        current = kept.into_iter().map(|k| pool[k].clone()).collect();

        let omega = omega_hat(&family_of(&domain, current.clone())?, &config.measure)?;
        let bound = psi.eval_ext(trace.bound_values[step - 1]);
        let diam = diameter(&current);
        if initial_diameter > 0.0 && diam > 10.0 * initial_diameter {
            return Err(Error::Diverged {
                iteration: step,
                diameter: diam,
            });
        }
        trace.bound_holds.push(omega.as_f64() <= bound.as_f64() + config.bound_tol);
        trace.ensembles.push(current.clone());
        trace.provenance.push(provenance);
        trace.sizes.push(current.len());
        trace.omega_values.push(omega);
        trace.bound_values.push(bound);
        trace.diameters.push(diam);
        image = apply_all(op, &current)?;
    }
    if trace.residuals.len() < trace.len() {
        trace.residuals.push(residual_of(&current, &image));
    }
    Ok(trace)
}

fn residual_of(xs: &[SampledFunction], images: &[SampledFunction]) -> f64 {
    xs.iter()
        .zip(images)
        .map(|(x, y)| sup_distance_values(x.values(), y.values()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionBEntry {
    pub family: String,
    pub omega_image: ExtendedNonNegReal,
    pub psi_of_omega: ExtendedNonNegReal,
    pub omega_passed: bool,
    pub diameter_image: f64,
    pub psi_of_diameter: f64,
    pub diameter_passed: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionBReport {
    pub entries: Vec<ConditionBEntry>,
    pub passed: bool,
}

/// Samples `Ω̂(Φ(A)) <= ψ(Ω̂(A))` on explicit families. The same comparison
/// is made for sup-norm diameters, which dominate `Ω̂` on finite ensembles,
/// so a too-tight `ψ` shows up as a violating pair.
pub fn verify_condition_b(
    op: &impl GridOperator,
    psi: ComparisonFunction,
    samples: &[FunctionFamily],
    config: &DarboConfig,
) -> Result<ConditionBReport> {
    let domain = Arc::clone(op.domain());
    let entries = samples
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let members = explicit_members(f)?;
            let image = apply_all(op, &members)?;
            let omega_a = omega_hat(f, &config.measure)?;
            let omega_image = omega_hat(&family_of(&domain, image.clone())?, &config.measure)?;
            let psi_of_omega = psi.eval_ext(omega_a);
            let omega_passed = omega_image.as_f64() <= psi_of_omega.as_f64() + config.bound_tol;
            let diameter_image = diameter(&image);
            let psi_of_diameter = psi.eval(diameter(&members));
            let diameter_passed = diameter_image <= psi_of_diameter + config.bound_tol;
            Ok(ConditionBEntry {
                family: format!("sample {i} ({} members)", members.len()),
                omega_image,
                psi_of_omega,
                omega_passed,
                diameter_image,
                psi_of_diameter,
                diameter_passed,
                passed: omega_passed && diameter_passed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = entries.iter().all(|e| e.passed);
    Ok(ConditionBReport { entries, passed })
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub x: SampledFunction,
    pub residual: f64,
    pub iters: usize,
    /// Whether the averaged iteration was switched on.
    pub averaged: bool,
}

/// Number of steps without a new best residual before switching to the
/// averaged iteration.
const STALL_WINDOW: usize = 10;

/// Picard iteration `x <- Φx` until `‖Φx − x‖ <= tol`. When the residual
/// fails to improve for ten steps the iteration switches to
/// `x <- (x + Φx) / 2`.
pub fn extract_fixed_point(
    op: &impl GridOperator,
    x0: &SampledFunction,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let mut x = x0.clone();
    let mut best = (f64::INFINITY, x0.clone());
    let mut since_best = 0;
    let mut averaged = false;
    for iters in 0..=max_iter {
        let y = op.apply(&x)?;
        let residual = sup_distance_values(x.values(), y.values());
        if residual <= tol {
            return Ok(FixedPoint {
                x,
                residual,
                iters,
                averaged,
            });
        }
        if residual < best.0 {
            best = (residual, x.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_WINDOW && !averaged {
                averaged = true;
                since_best = 0;
            }
        }
        x = if averaged {
            let values = x.values().iter().zip(y.values()).map(|(a, b)| 0.5 * (a + b)).collect();
            SampledFunction::new(op.domain(), "avg", values)?
        } else {
            y
        };
    }
    Err(Error::NotConverged {
        best: Box::new(best.1),
        residual: best.0,
        iters: max_iter,
    })
}

/// `count` random polynomials of degree at most `degree` with coefficients
/// in `[-1, 1]`.
pub fn random_polynomials(domain: &Arc<GridDomain>, count: usize, degree: usize, seed: u64) -> Result<FunctionFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = (0..count)
        .map(|i| {
            let coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..=1.0)).collect();
            SampledFunction::from_fn(domain, format!("poly{i}"), |t| {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            })
        })
        .collect();
    FunctionFamily::explicit(domain, members)
}
