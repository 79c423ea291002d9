//! The composite functional `Ω = ω + η` on families of bounded continuous
//! functions.
//!
//! `η` detects pointwise unboundedness and takes only the values `0` and
//! `+inf`. `ω` is the equicontinuity defect: for each grid point `t0` the
//! joint oscillation of the family over balls of shrinking radius, maximised
//! over `t0`. Parametric families are capped, and for each cap the radius
//! schedule is run to its end.

use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{neighborhood, neighborhood_at, sup_distance_values, GridDomain};
use crate::error::{Error, Result};
use crate::extended::ExtendedNonNegReal;
use crate::expr::GridProgram;
use crate::family::{convex_sample, member_values, scale, union, FamilyPart, FunctionFamily, MemberRef, SampledFunction};

pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1.5;
pub const DEFAULT_STABILIZATION_TOL: f64 = 0.02;

/// Settings shared by the `ω`, `η` and `Ω` estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureConfig {
    /// Strictly decreasing ball radii, all above the grid step.
    pub eps_schedule: Vec<f64>,
    pub cap: u64,
    /// Caps for the divergence detector; `[cap/4, cap/2, cap]` when absent.
    pub cap_schedule: Option<Vec<u64>>,
    pub divergence_factor: f64,
    /// Relative to the family's spread.
    pub stabilization_tol: f64,
}

impl MeasureConfig {
    pub fn new(eps_schedule: Vec<f64>, cap: u64) -> Self {
        MeasureConfig {
            eps_schedule,
            cap,
            cap_schedule: None,
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
            stabilization_tol: DEFAULT_STABILIZATION_TOL,
        }
    }

    pub fn caps(&self) -> Vec<u64> {
        self.cap_schedule
            .clone()
            .unwrap_or_else(|| vec![self.cap / 4, self.cap / 2, self.cap])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceWitness {
    pub t: f64,
    pub caps: Vec<u64>,
    /// `max_{n <= cap} |f_n(t)|` for each cap.
    pub maxima: Vec<f64>,
    /// Ratios of consecutive maxima.
    pub growth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaReport {
    pub value: ExtendedNonNegReal,
    pub divergence_witness: Option<DivergenceWitness>,
}

impl EtaReport {
    fn zero() -> Self {
        EtaReport {
            value: ExtendedNonNegReal::ZERO,
            divergence_witness: None,
        }
    }
}

fn growth_ratio(prev: f64, next: f64) -> f64 {
    if prev > 0.0 {
        next / prev
    } else if next > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

fn validate_caps(caps: &[u64]) -> Result<()> {
    if caps.len() < 3 || caps[0] == 0 || caps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "cap schedule must be strictly increasing, start at 1 or more and have at least 3 entries, got {caps:?}"
        )));
    }
    Ok(())
}

/// Divergence detector for pointwise unboundedness.
///
/// Explicit members are finitely many finite values, so only parametric parts
/// are examined. At every grid point the running maximum `M(t, cap)` is
/// tracked across the schedule; the family diverges at `t` when `M` grows by
/// more than `factor` over each of the last two schedule steps. The witness
/// is the lowest such `t`.
pub fn eta(family: &FunctionFamily, cap_schedule: &[u64], factor: f64) -> Result<EtaReport> {
    let Some(caps) = detector_caps(family, cap_schedule, factor)? else {
        return Ok(EtaReport::zero());
    };
    let points = family.domain().points();
    let len = points.len();
    let mut by_part = Vec::with_capacity(caps.len());
    for (part, caps) in family.parts().iter().zip(&caps) {
        let (FamilyPart::Parametric { expr, scale, .. }, Some(caps)) = (part, caps) else {
            by_part.push(None);
            continue;
        };
        let program = GridProgram::new(expr, points);
        let mut running = vec![0.0f64; len];
        let mut by_cap = Vec::with_capacity(caps.len());
        let mut done = 0;
        for &c in caps {
            let chunk = (done + 1..=c.max(done))
                .into_par_iter()
                .try_fold(
                    || vec![0.0f64; len],
                    |mut acc, n| {
                        let v = member_values(&program, points, *scale, n as f64)?;
                        for (a, x) in acc.iter_mut().zip(v) {
                            *a = a.max(x.abs());
                        }
                        Ok::<_, Error>(acc)
                    },
                )
                .try_reduce(|| vec![0.0f64; len], |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x = x.max(y);
                    }
                    Ok(a)
                })?;
            for (r, x) in running.iter_mut().zip(chunk) {
                *r = r.max(x);
            }
            by_cap.push(running.clone());
            done = done.max(c);
        }
        by_part.push(Some(by_cap));
    }
    Ok(eta_report(&by_part, points, cap_schedule, factor))
}

/// Validated schedule clipped to each part's count; `None` for explicit parts.
/// `Ok(None)` when the family has no parametric part and the detector is
/// trivially zero.
fn detector_caps(family: &FunctionFamily, cap_schedule: &[u64], factor: f64) -> Result<Option<Vec<Option<Vec<u64>>>>> {
    if family.is_explicit() {
        return Ok(None);
    }
    validate_caps(cap_schedule)?;
    if !(factor > 1.0) {
        return Err(Error::InvalidArgument(format!("divergence factor must exceed 1, got {factor}")));
    }
    Ok(Some(
        family
            .parts()
            .iter()
            .map(|p| match p {
                FamilyPart::Parametric { count, .. } => Some(cap_schedule.iter().map(|&c| c.min(*count)).collect()),
                FamilyPart::Explicit(_) => None,
            })
            .collect(),
    ))
}

/// `by_part[p][k][i]`: max `|f_n(t_i)|` over `n <= caps[k]` in part `p`.
/// The witness is the lowest diverging point, the first part winning ties.
fn eta_report(by_part: &[Option<Vec<Vec<f64>>>], points: &[f64], cap_schedule: &[u64], factor: f64) -> EtaReport {
    let mut best: Option<DivergenceWitness> = None;
    for by_cap in by_part.iter().flatten() {
        let hit = points.iter().enumerate().find_map(|(i, &t)| {
            let maxima: Vec<f64> = by_cap.iter().map(|row| row[i]).collect();
            let growth: Vec<f64> = maxima.windows(2).map(|w| growth_ratio(w[0], w[1])).collect();
            let k = growth.len();
            (growth[k - 2] > factor && growth[k - 1] > factor).then(|| DivergenceWitness {
                t,
                caps: cap_schedule.to_vec(),
                maxima,
                growth,
            })
        });
        if let Some(w) = hit {
            if best.as_ref().is_none_or(|b| w.t < b.t) {
                best = Some(w);
            }
        }
    }
    match best {
        Some(w) => EtaReport {
            value: ExtendedNonNegReal::Infinite,
            divergence_witness: Some(w),
        },
        None => EtaReport::zero(),
    }
}

fn check_eps(domain: &GridDomain, eps: f64) -> Result<()> {
    if !(eps > domain.step()) || !eps.is_finite() {
        return Err(Error::BelowGridResolution { eps, step: domain.step() });
    }
    Ok(())
}

fn validate_schedule(domain: &GridDomain, eps_schedule: &[f64]) -> Result<()> {
    if eps_schedule.is_empty() {
        return Err(Error::InvalidArgument("eps schedule is empty".into()));
    }
    if eps_schedule.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument(format!(
            "eps schedule must be strictly decreasing, got {eps_schedule:?}"
        )));
    }
    eps_schedule.iter().try_for_each(|&e| check_eps(domain, e))
}

/// Largest `|f(t0) - f(s)|` over members and over grid indices `s` in `set`.
pub fn omega_over_set(family: &FunctionFamily, t0_index: usize, set: &[usize], cap: u64) -> Result<f64> {
    let view = family.view(cap);
    (0..view.len())
        .into_par_iter()
        .map(|i| {
            let v = view.values(i)?;
            let c = v[t0_index];
            Ok(set.iter().map(|&s| (v[s] - c).abs()).fold(0.0, f64::max))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Joint oscillation of the first `cap` members over the open ball of radius
/// `eps` around the grid point `t0`.
pub fn omega_at(family: &FunctionFamily, t0: f64, eps: f64, cap: u64) -> Result<f64> {
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be >= 1".into()));
    }
    let nb = neighborhood(family.domain(), t0, eps)?;
    let set: Vec<usize> = nb.indices.collect();
    omega_over_set(family, nb.center_index, &set, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaCurve {
    pub t0: f64,
    /// `(eps, cap, value)` with `eps` decreasing.
    pub pairs: Vec<(f64, u64, f64)>,
    pub stabilized: bool,
}

impl OmegaCurve {
    pub fn value(&self) -> f64 {
        self.pairs.last().map_or(0.0, |p| p.2)
    }

    fn new(t0: f64, eps: &[f64], cap: u64, values: impl Iterator<Item = f64>, tol: f64) -> Self {
        let pairs: Vec<_> = eps.iter().zip(values).map(|(&e, v)| (e, cap, v)).collect();
        let stabilized = match pairs.as_slice() {
            [.., a, b] => (a.2 - b.2).abs() < tol,
            _ => false,
        };
        OmegaCurve { t0, pairs, stabilized }
    }
}

/// Largest distance from member 0 to any member; the scale for the
/// stabilization tolerance.
fn spread(family: &FunctionFamily, cap: u64) -> Result<f64> {
    let view = family.view(cap);
    if view.is_empty() {
        return Ok(0.0);
    }
    let first = view.values(0)?.into_owned();
    (0..view.len())
        .into_par_iter()
        .map(|i| Ok(sup_distance_values(&view.values(i)?, &first)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

fn absolute_tol(relative: f64, spread: f64) -> f64 {
    if spread > 0.0 {
        relative * spread
    } else {
        relative
    }
}

/// The curve `eps -> ω(F, B(t0, eps))` over a decreasing schedule. Stabilized
/// when the last two values differ by less than `stabilization_tol` times the
/// family's spread.
pub fn omega_point(
    family: &FunctionFamily,
    t0: f64,
    eps_schedule: &[f64],
    cap: u64,
    stabilization_tol: f64,
) -> Result<OmegaCurve> {
    validate_schedule(family.domain(), eps_schedule)?;
    let values = eps_schedule
        .iter()
        .map(|&e| omega_at(family, t0, e, cap))
        .collect::<Result<Vec<_>>>()?;
    let idx = family.domain().index_of(t0)?;
    let tol = absolute_tol(stabilization_tol, spread(family, cap)?);
    Ok(OmegaCurve::new(
        family.domain().points()[idx],
        eps_schedule,
        cap,
        values.into_iter(),
        tol,
    ))
}

/// Window extrema by sparse table: every window `[s, e)` is covered by the two
/// blocks of length `2^k` starting at `s` and ending at `e`, with
/// `2^k <= e - s`. The block offsets are planned once per grid and schedule.
struct WindowPlan {
    len: usize,
    levels: usize,
    /// Per schedule entry and grid point: flat offsets of the two blocks in a
    /// table laid out level by level.
    queries: Vec<Vec<(usize, usize)>>,
}

// Member values are checked finite, so plain comparisons agree with
// `f64::max`/`f64::min` up to the sign of zero, and they vectorize.
#[inline]
fn fmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

#[inline]
fn fmin(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

impl WindowPlan {
    fn new(len: usize, windows: &[Vec<Range<usize>>]) -> Self {
        let mut levels = 1;
        let queries = windows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|w| {
                        let width = w.end - w.start;
                        debug_assert!(width > 0, "balls contain their center");
                        let k = (usize::BITS - 1 - width.leading_zeros()) as usize;
                        levels = levels.max(k + 1);
                        (k * len + w.start, k * len + w.end - (1 << k))
                    })
                    .collect()
            })
            .collect();
        WindowPlan { len, levels, queries }
    }

    /// Scratch space for [`WindowPlan::accumulate`].
    fn scratch(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.levels * self.len], vec![0.0; self.levels * self.len])
    }

    /// Folds the oscillation of `values` over every window into `acc`.
    /// Level `k` of the tables holds extrema over `values[i..i + 2^k]`.
    fn accumulate(&self, values: &[f64], scratch: &mut (Vec<f64>, Vec<f64>), acc: &mut [Vec<f64>]) {
        let n = self.len;
        let (hi, lo) = scratch;
        hi[..n].copy_from_slice(values);
        lo[..n].copy_from_slice(values);
        for k in 1..self.levels {
            let half = 1 << (k - 1);
            let m = n.saturating_sub((1 << k) - 1);
            let (prev, cur) = hi.split_at_mut(k * n);
            let prev = &prev[(k - 1) * n..];
            for i in 0..m {
                cur[i] = fmax(prev[i], prev[i + half]);
            }
            let (prev, cur) = lo.split_at_mut(k * n);
            let prev = &prev[(k - 1) * n..];
            for i in 0..m {
                cur[i] = fmin(prev[i], prev[i + half]);
            }
        }
        for (row, queries) in acc.iter_mut().zip(&self.queries) {
            for ((r, &(a, b)), &v) in row.iter_mut().zip(queries).zip(values) {
                let osc = fmax(fmax(hi[a], hi[b]) - v, v - fmin(lo[a], lo[b]));
                *r = fmax(*r, osc);
            }
        }
    }
}

/// Per part and schedule step: max `|f_n(t_i)|` over the members added at
/// that step.
type DetectorBuckets = Vec<Option<Vec<Vec<f64>>>>;

struct Table {
    /// `rows[e][i]`: oscillation of the capped family over the ball of radius
    /// `eps_schedule[e]` around grid point `i`.
    rows: Vec<Vec<f64>>,
    spread: f64,
    /// Running maxima for the divergence detector, when requested.
    detector: Option<DetectorBuckets>,
}

fn max_into(a: &mut [f64], b: &[f64]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = x.max(y);
    }
}

/// One pass over the members of the capped family computing the oscillation
/// table, the spread and, given clipped detector caps that all fit under
/// `cap`, the divergence detector's running maxima.
fn omega_table(
    family: &FunctionFamily,
    eps_schedule: &[f64],
    cap: u64,
    detector_caps: Option<&[Option<Vec<u64>>]>,
) -> Result<Table> {
    let domain = family.domain();
    let pts = domain.points();
    let len = pts.len();
    let windows: Vec<Vec<Range<usize>>> = eps_schedule
        .iter()
        .map(|&e| (0..len).map(|i| neighborhood_at(domain, i, e, pts[i]).indices).collect())
        .collect();
    let plan = WindowPlan::new(len, &windows);
    let view = family.view(cap);
    let empty_buckets = || -> Option<DetectorBuckets> {
        detector_caps.map(|dc| dc.iter().map(|c| c.as_ref().map(|c| vec![vec![0.0f64; len]; c.len()])).collect())
    };
    let empty = || (vec![vec![0.0f64; len]; eps_schedule.len()], 0.0f64, empty_buckets());
    let (rows, spread, buckets) = if view.is_empty() {
        empty()
    } else {
        let first = view.values(0)?.into_owned();
        (0..view.len())
            .into_par_iter()
            .try_fold(
                || (empty(), plan.scratch()),
                |((mut acc, spread, mut buckets), mut scratch), m| {
                    let v = view.values(m)?;
                    plan.accumulate(&v, &mut scratch, &mut acc);
                    if let (Some(b), MemberRef::Parametric { part, n, .. }) = (buckets.as_mut(), view.member(m)) {
                        let caps = detector_caps.and_then(|dc| dc[part].as_ref()).expect("parametric part");
                        let k = caps.partition_point(|&c| c < n);
                        if let Some(row) = b[part].as_mut().and_then(|rows| rows.get_mut(k)) {
                            for (r, x) in row.iter_mut().zip(v.iter()) {
                                *r = r.max(x.abs());
                            }
                        }
                    }
                    let spread = spread.max(sup_distance_values(&v, &first));
                    Ok::<_, Error>(((acc, spread, buckets), scratch))
                },
            )
            .map(|r| r.map(|(table, _)| table))
            .try_reduce(empty, |(mut a, sa, mut ba), (b, sb, bb)| {
                for (ra, rb) in a.iter_mut().zip(&b) {
                    max_into(ra, rb);
                }
                if let (Some(ba), Some(bb)) = (ba.as_mut(), bb) {
                    for (pa, pb) in ba.iter_mut().zip(bb) {
                        if let (Some(pa), Some(pb)) = (pa.as_mut(), pb) {
                            for (x, y) in pa.iter_mut().zip(&pb) {
                                max_into(x, y);
                            }
                        }
                    }
                }
                Ok((a, sa.max(sb), ba))
            })?
    };
    // buckets to running maxima
    let detector = buckets.map(|parts| {
        parts
            .into_iter()
            .map(|p| {
                p.map(|mut steps| {
                    for k in 1..steps.len() {
                        let (done, rest) = steps.split_at_mut(k);
                        max_into(&mut rest[0], &done[k - 1]);
                    }
                    steps
                })
            })
            .collect()
    });
    Ok(Table { rows, spread, detector })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaEstimate {
    pub value: f64,
    pub argmax_t: f64,
    pub curves: Vec<OmegaCurve>,
}

/// Index of the largest final value. Exact ties go to the grid point nearest
/// the domain boundary, then to the lowest point: near a boundary, values that
/// differ only below `f64` resolution all round to the same maximum.
fn argmax(values: &[f64], domain: &GridDomain) -> usize {
    let pts = domain.points();
    let edge = |i: usize| (pts[i] - domain.lower()).min(domain.upper() - pts[i]);
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] || (values[i] == values[best] && edge(i) < edge(best)) {
            best = i;
        }
    }
    best
}

/// `ω̂(F)`: the largest final curve value over all grid points.
pub fn omega(family: &FunctionFamily, eps_schedule: &[f64], cap: u64, stabilization_tol: f64) -> Result<OmegaEstimate> {
    omega_with(family, eps_schedule, cap, stabilization_tol, None).map(|(est, _)| est)
}

fn omega_with(
    family: &FunctionFamily,
    eps_schedule: &[f64],
    cap: u64,
    stabilization_tol: f64,
    detector_caps: Option<&[Option<Vec<u64>>]>,
) -> Result<(OmegaEstimate, Option<DetectorBuckets>)> {
    validate_schedule(family.domain(), eps_schedule)?;
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be >= 1".into()));
    }
    let Table { rows, spread, detector } = omega_table(family, eps_schedule, cap, detector_caps)?;
    let tol = absolute_tol(stabilization_tol, spread);
    let pts = family.domain().points();
    let curves: Vec<OmegaCurve> = (0..pts.len())
        .map(|i| OmegaCurve::new(pts[i], eps_schedule, cap, rows.iter().map(|row| row[i]), tol))
        .collect();
    let finals = rows.last().expect("schedule is nonempty");
    let best = argmax(finals, family.domain());
    let est = OmegaEstimate {
        value: finals[best],
        argmax_t: pts[best],
        curves,
    };
    Ok((est, detector))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaReport {
    pub omega: f64,
    pub eta: EtaReport,
    #[serde(rename = "Omega")]
    pub total: ExtendedNonNegReal,
    pub argmax_t: f64,
    pub stabilized: bool,
    pub curves: Vec<OmegaCurve>,
}

impl OmegaReport {
    pub fn curve_at(&self, t0: f64) -> Option<&OmegaCurve> {
        self.curves.iter().find(|c| (c.t0 - t0).abs() < 1e-12)
    }
}

/// `Ω̂ = ω̂ + η̂`, with `+inf` absorbing. The empty family gives 0.
#[allow(non_snake_case)]
pub fn Omega(family: &FunctionFamily, config: &MeasureConfig) -> Result<OmegaReport> {
    if family.len(config.cap) == 0 {
        validate_schedule(family.domain(), &config.eps_schedule)?;
        return Ok(OmegaReport {
            omega: 0.0,
            eta: EtaReport::zero(),
            total: ExtendedNonNegReal::ZERO,
            argmax_t: family.domain().lower(),
            stabilized: true,
            curves: Vec::new(),
        });
    }
    validate_schedule(family.domain(), &config.eps_schedule)?;
    let caps = config.caps();
    let detector = detector_caps(family, &caps, config.divergence_factor)?;
    // the detector rides along the omega pass when its caps fit in the view
    let fused = detector.as_deref().filter(|_| caps.iter().all(|&c| c <= config.cap));
    let (est, buckets) = omega_with(family, &config.eps_schedule, config.cap, config.stabilization_tol, fused)?;
    let eta = match buckets {
        Some(by_part) => eta_report(&by_part, family.domain().points(), &caps, config.divergence_factor),
        None => eta(family, &caps, config.divergence_factor)?,
    };
    let total = ExtendedNonNegReal::finite(est.value) + eta.value;
    let stabilized = est
        .curves
        .iter()
        .find(|c| c.t0 == est.argmax_t)
        .is_some_and(|c| c.stabilized);
    Ok(OmegaReport {
        omega: est.value,
        eta,
        total,
        argmax_t: est.argmax_t,
        stabilized,
        curves: est.curves,
    })
}

/// `Ω̂` alone, without curves.
pub fn omega_hat(family: &FunctionFamily, config: &MeasureConfig) -> Result<ExtendedNonNegReal> {
    Omega(family, config).map(|r| r.total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomEntry {
    pub axiom: String,
    /// `None` for the fixed fixture checks.
    pub trial: Option<usize>,
    pub fixture: String,
    pub lhs: ExtendedNonNegReal,
    pub rhs: ExtendedNonNegReal,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub seed: u64,
    pub trials: usize,
    pub entries: Vec<AxiomEntry>,
    pub failures: usize,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn failures_for(&self, axiom: &str) -> usize {
        self.entries.iter().filter(|e| e.axiom == axiom && !e.passed).count()
    }
}

/// Settings for [`axiom_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomConfig {
    pub step: f64,
    pub measure: MeasureConfig,
    /// Absolute tolerance for the finite-union, convex-hull and limit checks.
    pub tolerance: f64,
    /// Cap for the fixed power-family fixtures.
    pub fixture_cap: u64,
}

impl Default for AxiomConfig {
    fn default() -> Self {
        let mut measure = MeasureConfig::new(vec![0.1, 0.05, 0.01], 1_000);
        measure.cap_schedule = Some(vec![250, 500, 1_000]);
        AxiomConfig {
            step: 1e-3,
            measure,
            tolerance: DEFAULT_STABILIZATION_TOL,
            fixture_cap: 10_000,
        }
    }
}

/// A literal the expression grammar accepts (it has no unary minus).
fn lit(v: f64) -> String {
    if v < 0.0 {
        format!("(0 - {})", -v)
    } else {
        format!("{v}")
    }
}

fn random_poly(rng: &mut ChaCha8Rng) -> String {
    let degree = rng.random_range(0..=3);
    (0..=degree)
        .map(|k| {
            let c = lit(rng.random_range(-1.0..=1.0));
            match k {
                0 => c,
                1 => format!("{c}*t"),
                _ => format!("{c}*t^{k}"),
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// A low-Lipschitz function `a + b*sin(t) ...` with `|b| + |c| <= 1`.
fn random_smooth(rng: &mut ChaCha8Rng) -> String {
    let a = rng.random_range(-2.0..=2.0);
    let b = rng.random_range(-0.5..=0.5);
    let c = rng.random_range(-0.5..=0.5);
    format!("{} + {}*sin(t) + {}*t", lit(a), lit(b), lit(c))
}

struct Suite<'a> {
    domain: &'a Arc<GridDomain>,
    config: &'a AxiomConfig,
    entries: Vec<AxiomEntry>,
}

impl Suite<'_> {
    fn omega_hat(&self, f: &FunctionFamily) -> Result<ExtendedNonNegReal> {
        omega_hat(f, &self.config.measure)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        axiom: &str,
        trial: Option<usize>,
        fixture: String,
        lhs: ExtendedNonNegReal,
        rhs: ExtendedNonNegReal,
        slack: f64,
        passed: bool,
    ) {
        self.entries.push(AxiomEntry {
            axiom: axiom.into(),
            trial,
            fixture,
            lhs,
            rhs,
            slack,
            passed,
        });
    }

    /// `|lhs - rhs| <= slack`, with two infinities equal.
    fn close(
        &mut self,
        axiom: &str,
        trial: Option<usize>,
        fixture: String,
        lhs: ExtendedNonNegReal,
        rhs: ExtendedNonNegReal,
        slack: f64,
    ) {
        let passed = match (lhs, rhs) {
            (ExtendedNonNegReal::Infinite, ExtendedNonNegReal::Infinite) => true,
            (a, b) => (a.as_f64() - b.as_f64()).abs() <= slack,
        };
        self.record(axiom, trial, fixture, lhs, rhs, slack, passed);
    }

    fn trial(&mut self, seed: u64, trial: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let d = self.domain;
        let tol = self.config.tolerance;
        let cap = self.config.measure.cap;
        let t = Some(trial);

        // monotonicity: a random subset of the power family inside a longer
        // prefix, and a random polynomial set inside a larger one
        let count = rng.random_range(20..=200u64);
        let mut picked: Vec<u64> = (0..rng.random_range(2..=10))
            .map(|_| rng.random_range(1..=count))
            .collect();
        picked.sort_unstable();
        picked.dedup();
        let srcs: Vec<String> = picked.iter().map(|n| format!("t^{n}")).collect();
        let small = FunctionFamily::from_point_exprs(d, &srcs.iter().map(String::as_str).collect::<Vec<_>>())?;
        let big = FunctionFamily::parse(d, "t^n", count)?;
        let (a, b) = (self.omega_hat(&small)?, self.omega_hat(&big)?);
        self.record(
            "MN2",
            t,
            format!("{{{}}} within t^n, n <= {count}", srcs.join(", ")),
            a,
            b,
            1e-9,
            a.as_f64() <= b.as_f64() + 1e-9,
        );
        let polys: Vec<String> = (0..rng.random_range(2..=8)).map(|_| random_poly(&mut rng)).collect();
        let k = rng.random_range(1..polys.len());
        let refs: Vec<&str> = polys.iter().map(String::as_str).collect();
        let sub = FunctionFamily::from_point_exprs(d, &refs[..k])?;
        let sup = FunctionFamily::from_point_exprs(d, &refs)?;
        let (a, b) = (self.omega_hat(&sub)?, self.omega_hat(&sup)?);
        self.record(
            "MN2",
            t,
            format!("first {k} of {{{}}}", polys.join("; ")),
            a,
            b,
            1e-9,
            a.as_f64() <= b.as_f64() + 1e-9,
        );

        // base fixture for the remaining axioms
        let p = random_poly(&mut rng);
        let c = rng.random_range(0.2..=1.5);
        let src = format!("{p} + {c}*t^n");
        let base = FunctionFamily::parse(d, &src, cap)?;
        let base_hat = self.omega_hat(&base)?;

        let lambda = rng.random_range(-3.0..=3.0);
        let scaled_hat = self.omega_hat(&scale(&base, lambda)?)?;
        self.close(
            "MN4",
            t,
            format!("lambda = {lambda} on {src}"),
            scaled_hat,
            base_hat.scale(lambda),
            1e-6 * (1.0 + f64::abs(lambda)),
        );

        let extra: Vec<String> = (0..rng.random_range(1..=5)).map(|_| random_smooth(&mut rng)).collect();
        let aug = FunctionFamily::from_point_exprs(d, &extra.iter().map(String::as_str).collect::<Vec<_>>())?;
        let union_hat = self.omega_hat(&union(&base, &aug)?)?;
        self.close(
            "MN5",
            t,
            format!("{src} with {{{}}}", extra.join("; ")),
            union_hat,
            base_hat,
            tol,
        );

        let draws = rng.random_range(5..=40);
        let draw_seed = rng.random::<u64>();
        let hull_hat = self.omega_hat(&convex_sample(&base, draws, draw_seed)?)?;
        self.close(
            "MN6",
            t,
            format!("{draws} convex draws (seed {draw_seed}) of {src}"),
            hull_hat,
            base_hat,
            tol,
        );

        // members p + c t^n / n converge uniformly to p
        let c3 = rng.random_range(-1.0..=1.0);
        let p3 = random_poly(&mut rng);
        let src3 = format!("{p3} + {}*t^n/n", lit(c3));
        let conv = FunctionFamily::parse(d, &src3, cap)?;
        let limit = FunctionFamily::from_point_exprs(d, &[p3.as_str()])?;
        let (a, b) = (self.omega_hat(&conv)?, self.omega_hat(&union(&conv, &limit)?)?);
        self.close("MN3", t, format!("{src3} with its limit {p3}"), b, a, tol);
        Ok(())
    }

    fn fixtures(&mut self) -> Result<()> {
        let d = self.domain;
        let mut cfg = self.config.measure.clone();
        cfg.cap = self.config.fixture_cap;
        cfg.cap_schedule = None;
        let powers = FunctionFamily::parse(d, "t^n", cfg.cap)?;
        let base = omega_hat(&powers, &cfg)?;

        let a = omega_hat(&FunctionFamily::parse(d, "t^n", 50)?, &cfg)?;
        let b = omega_hat(&FunctionFamily::parse(d, "t^n", 100)?, &cfg)?;
        self.record(
            "MN2",
            None,
            "t^n, n <= 50 within n <= 100".into(),
            a,
            b,
            1e-9,
            a.as_f64() <= b.as_f64() + 1e-9,
        );

        let scaled = omega_hat(&scale(&powers, -2.0)?, &cfg)?;
        self.close(
            "MN4",
            None,
            format!("lambda = -2 on t^n, cap {}", cfg.cap),
            scaled,
            ExtendedNonNegReal::finite(2.0),
            0.04,
        );
        let half = FunctionFamily::from_point_exprs(d, &["0.5"])?;
        let with_half = omega_hat(&union(&powers, &half)?, &cfg)?;
        self.close(
            "MN5",
            None,
            format!("t^n with constant 1/2, cap {}", cfg.cap),
            with_half,
            ExtendedNonNegReal::finite(1.0),
            0.02,
        );
        self.close(
            "MN5",
            None,
            format!("t^n with constant 1/2 against t^n, cap {}", cfg.cap),
            with_half,
            base,
            self.config.tolerance,
        );
        Ok(())
    }
}

/// Randomized checks of monotonicity (MN2), closure under uniform limits
/// (MN3), homogeneity (MN4), finite-union invariance (MN5) and convex-hull
/// invariance (MN6) for `Ω̂`, followed by fixed checks on the power family.
/// Each trial draws from its own ChaCha stream, so the report depends only on
/// `seed` and `trials`.
pub fn axiom_suite(seed: u64, trials: usize, config: &AxiomConfig) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let domain = Arc::new(crate::domain::make_grid(0.0, 1.0, config.step)?);
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut suite = Suite {
                domain: &domain,
                config,
                entries: Vec::new(),
            };
            suite.trial(seed, trial).map(|_| suite.entries)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut suite = Suite {
        domain: &domain,
        config,
        entries: per_trial.into_iter().flatten().collect(),
    };
    suite.fixtures()?;
    let failures = suite.entries.iter().filter(|e| !e.passed).count();
    Ok(AxiomReport {
        seed,
        trials,
        entries: suite.entries,
        failures,
    })
}

/// Convenience for tests and callers holding plain member lists.
pub fn omega_hat_of(members: Vec<SampledFunction>, config: &MeasureConfig) -> Result<ExtendedNonNegReal> {
    let domain = match members.first() {
        Some(m) => Arc::clone(m.domain()),
        None => return Ok(ExtendedNonNegReal::ZERO),
    };
    omega_hat(&FunctionFamily::explicit(&domain, members)?, config)
}
