//! Function families on a grid: explicit lists, parametric generators and the
//! set operations (scaling, union, convex sampling) the axioms are tested with.

use std::borrow::Cow;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, parse_family, Env, Expr, FamilyExpr, GridProgram, POINT_VARS};

/// Largest number of source members mixed into one convex combination.
pub const MAX_COMBINATION_SIZE: usize = 5;

/// A function in `C^b(T)` as seen through the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    #[serde(skip)]
    domain: Arc<GridDomain>,
    label: String,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(domain: &Arc<GridDomain>, label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} points",
                values.len(),
                domain.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: domain.points()[i],
                n: f64::NAN,
                value: *v,
            });
        }
        Ok(SampledFunction {
            domain: Arc::clone(domain),
            label: label.into(),
            values,
        })
    }

    /// Samples a closure; panics on non-finite values.
    pub fn from_fn(domain: &Arc<GridDomain>, label: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        let values = domain.points().iter().map(|&t| f(t)).collect();
        Self::new(domain, label, values).expect("closure produced a non-finite value")
    }

    /// Samples an expression in `t`.
    pub fn from_expr(domain: &Arc<GridDomain>, expr: &Expr) -> Result<Self> {
        let values = domain
            .points()
            .iter()
            .map(|&t| {
                let v = expr.eval(&Env::point(t));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { t, n: f64::NAN, value: v })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampledFunction {
            domain: Arc::clone(domain),
            label: expr.to_string(),
            values,
        })
    }

    /// Parses and samples an expression in `t`.
    pub fn parse(domain: &Arc<GridDomain>, src: &str) -> Result<Self> {
        let expr = parse_expr(src, POINT_VARS)?;
        Self::from_expr(domain, &expr)
    }

    pub fn constant(domain: &Arc<GridDomain>, c: f64) -> Self {
        Self::from_fn(domain, format!("{c}"), |_| c)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &SampledFunction) -> bool {
        same_domain(&self.domain, &other.domain)
    }

    pub fn scaled(&self, lambda: f64) -> SampledFunction {
        SampledFunction {
            domain: Arc::clone(&self.domain),
            label: format!("{lambda}*({})", self.label),
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn same_domain(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// One building block of a family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyPart {
    Explicit(Vec<SampledFunction>),
    /// Members `scale * expr(t, n)` for `n = 1..=count`.
    Parametric {
        expr: FamilyExpr,
        count: u64,
        scale: f64,
    },
}

impl FamilyPart {
    fn len_at(&self, cap: u64) -> usize {
        match self {
            FamilyPart::Explicit(m) => m.len(),
            FamilyPart::Parametric { count, .. } => (*count).min(cap) as usize,
        }
    }
}

/// A family `F ⊂ C^b(T)`: the union of its parts, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    domain: Arc<GridDomain>,
    parts: Vec<FamilyPart>,
}

impl FunctionFamily {
    pub fn empty(domain: &Arc<GridDomain>) -> Self {
        FunctionFamily {
            domain: Arc::clone(domain),
            parts: Vec::new(),
        }
    }

    pub fn explicit(domain: &Arc<GridDomain>, members: Vec<SampledFunction>) -> Result<Self> {
        if members.iter().any(|m| !same_domain(domain, &m.domain)) {
            return Err(Error::GridMismatch);
        }
        Ok(FunctionFamily {
            domain: Arc::clone(domain),
            parts: vec![FamilyPart::Explicit(members)],
        })
    }

    /// The family `{expr(., n) : n = 1..=count}`.
    pub fn parametric(domain: &Arc<GridDomain>, expr: FamilyExpr, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("parametric family needs count >= 1".into()));
        }
        Ok(FunctionFamily {
            domain: Arc::clone(domain),
            parts: vec![FamilyPart::Parametric {
                expr,
                count,
                scale: 1.0,
            }],
        })
    }

    /// Parses `src` as a family expression and builds the parametric family.
    pub fn parse(domain: &Arc<GridDomain>, src: &str, count: u64) -> Result<Self> {
        Self::parametric(domain, parse_family(src)?, count)
    }

    /// Explicit family from expressions in `t`.
    pub fn from_point_exprs(domain: &Arc<GridDomain>, srcs: &[&str]) -> Result<Self> {
        let members = srcs
            .iter()
            .map(|s| SampledFunction::parse(domain, s))
            .collect::<Result<Vec<_>>>()?;
        Self::explicit(domain, members)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn parts(&self) -> &[FamilyPart] {
        &self.parts
    }

    /// True when the family has no parametric part, i.e. is a finite list.
    pub fn is_explicit(&self) -> bool {
        self.parts.iter().all(|p| matches!(p, FamilyPart::Explicit(_)))
    }

    /// Number of members with parametric indices capped at `cap`.
    pub fn len(&self, cap: u64) -> usize {
        self.parts.iter().map(|p| p.len_at(cap)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len(u64::MAX) == 0
    }

    /// Members with parametric indices capped at `cap`.
    pub fn view(&self, cap: u64) -> FamilyView<'_> {
        let mut segments = Vec::with_capacity(self.parts.len());
        let mut start = 0;
        for (part, p) in self.parts.iter().enumerate() {
            let len = p.len_at(cap);
            segments.push(Segment { part, start, len });
            start += len;
        }
        let points = self.domain.points();
        let programs = self
            .parts
            .iter()
            .map(|p| match p {
                FamilyPart::Parametric { expr, .. } => Some(Arc::new(GridProgram::new(expr, points))),
                FamilyPart::Explicit(_) => None,
            })
            .collect();
        FamilyView {
            family: self,
            segments,
            programs,
            len: start,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    part: usize,
    start: usize,
    len: usize,
}

/// Index-addressable members of a family at a fixed cap. Parametric members
/// are evaluated on demand.
#[derive(Debug, Clone)]
pub struct FamilyView<'a> {
    family: &'a FunctionFamily,
    segments: Vec<Segment>,
    /// One per part; `None` for explicit parts.
    programs: Vec<Option<Arc<GridProgram>>>,
    len: usize,
}

/// Where a member of a view comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemberRef<'a> {
    Explicit(&'a SampledFunction),
    Parametric {
        part: usize,
        n: u64,
        expr: &'a FamilyExpr,
        scale: f64,
    },
}

impl<'a> FamilyView<'a> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain(&self) -> &'a Arc<GridDomain> {
        &self.family.domain
    }

    pub fn member(&self, i: usize) -> MemberRef<'a> {
        assert!(i < self.len, "member {i} out of range for a view of {}", self.len);
        let seg = self
            .segments
            .iter()
            .find(|s| i < s.start + s.len)
            .expect("segments cover the view");
        let local = i - seg.start;
        match &self.family.parts[seg.part] {
            FamilyPart::Explicit(m) => MemberRef::Explicit(&m[local]),
            FamilyPart::Parametric { expr, scale, .. } => MemberRef::Parametric {
                part: seg.part,
                n: local as u64 + 1,
                expr,
                scale: *scale,
            },
        }
    }

    /// Grid values of member `i`.
    pub fn values(&self, i: usize) -> Result<Cow<'a, [f64]>> {
        match self.member(i) {
            MemberRef::Explicit(f) => Ok(Cow::Borrowed(f.values())),
            MemberRef::Parametric { part, n, scale, .. } => {
                let program = self.programs[part].as_ref().expect("parametric parts have programs");
                member_values(program, self.domain().points(), scale, n as f64).map(Cow::Owned)
            }
        }
    }

    pub fn label(&self, i: usize) -> String {
        match self.member(i) {
            MemberRef::Explicit(f) => f.label().to_string(),
            MemberRef::Parametric { n, expr, scale, .. } if scale == 1.0 => format!("{expr} [n={n}]"),
            MemberRef::Parametric { n, expr, scale, .. } => format!("{scale}*({expr}) [n={n}]"),
        }
    }

    pub fn sampled(&self, i: usize) -> Result<SampledFunction> {
        let values = self.values(i)?.into_owned();
        Ok(SampledFunction {
            domain: Arc::clone(self.domain()),
            label: self.label(i),
            values,
        })
    }
}

/// Grid values of `scale * expr(., n)`, rejecting non-finite results.
pub(crate) fn member_values(program: &GridProgram, points: &[f64], scale: f64, n: f64) -> Result<Vec<f64>> {
    let mut values = program.eval_grid(points, n);
    for (v, &t) in values.iter_mut().zip(points) {
        *v = checked(*v, scale, t, n)?;
    }
    Ok(values)
}

fn checked(raw: f64, scale: f64, t: f64, n: f64) -> Result<f64> {
    let v = scale * raw;
    if raw.is_finite() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { t, n, value: raw })
    }
}

/// `scale * expr(t, n)`, rejecting non-finite results.
pub(crate) fn evaluate_member(expr: &FamilyExpr, scale: f64, t: f64, n: f64) -> Result<f64> {
    checked(expr.eval(&Env::member(t, n)), scale, t, n)
}

/// The first `min(cap, N)` members of every parametric part plus every
/// explicit member. `cap` must be at least 1.
pub fn materialize(family: &FunctionFamily, cap: u64) -> Result<Vec<SampledFunction>> {
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be >= 1".into()));
    }
    let view = family.view(cap);
    (0..view.len()).into_par_iter().map(|i| view.sampled(i)).collect()
}

/// `lambda * F`.
pub fn scale(family: &FunctionFamily, lambda: f64) -> Result<FunctionFamily> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("scale factor {lambda} is not finite")));
    }
    let parts = family
        .parts
        .iter()
        .map(|p| match p {
            FamilyPart::Explicit(m) => FamilyPart::Explicit(m.iter().map(|f| f.scaled(lambda)).collect()),
            FamilyPart::Parametric { expr, count, scale } => FamilyPart::Parametric {
                expr: expr.clone(),
                count: *count,
                scale: scale * lambda,
            },
        })
        .collect();
    Ok(FunctionFamily {
        domain: Arc::clone(&family.domain),
        parts,
    })
}

/// `A ∪ B` as concatenated member lists; duplicates are kept.
pub fn union(a: &FunctionFamily, b: &FunctionFamily) -> Result<FunctionFamily> {
    if !same_domain(&a.domain, &b.domain) {
        return Err(Error::GridMismatch);
    }
    let mut parts = a.parts.clone();
    parts.extend(b.parts.iter().cloned());
    Ok(FunctionFamily {
        domain: Arc::clone(&a.domain),
        parts,
    })
}

/// Bookkeeping for one sampled convex combination: `(member index, weight)`
/// pairs over the full source family, weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexDraw {
    pub terms: Vec<(usize, f64)>,
}

/// `sum_i w_i f_i` over members of the full (uncapped) family.
pub fn convex_combination(family: &FunctionFamily, terms: &[(usize, f64)]) -> Result<SampledFunction> {
    let view = family.view(u64::MAX);
    if terms.is_empty() {
        return Err(Error::InvalidArgument("empty convex combination".into()));
    }
    let total: f64 = terms.iter().map(|(_, w)| w).sum();
    if terms.iter().any(|&(i, w)| i >= view.len() || !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "convex weights must be nonnegative, sum to one and index existing members".into(),
        ));
    }
    let mut values = vec![0.0; family.domain.len()];
    for &(i, w) in terms {
        for (acc, v) in values.iter_mut().zip(view.values(i)?.iter()) {
            *acc += w * v;
        }
    }
    let label = terms
        .iter()
        .map(|(i, w)| format!("{w:.4}*#{i}"))
        .collect::<Vec<_>>()
        .join(" + ");
    Ok(SampledFunction {
        domain: Arc::clone(&family.domain),
        label: format!("conv[{label}]"),
        values,
    })
}

fn draw_combination(len: usize, seed: u64, draw: usize) -> ConvexDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    let k = rng.random_range(1..=len.min(MAX_COMBINATION_SIZE));
    let mut picked = index::sample(&mut rng, len, k).into_vec();
    picked.sort_unstable();
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    ConvexDraw {
        terms: picked.into_iter().zip(raw.into_iter().map(|w| w / total)).collect(),
    }
}

/// `F` plus `draws` random convex combinations of its members, together with
/// the weights used for each combination.
pub fn convex_sample_with_draws(
    family: &FunctionFamily,
    draws: usize,
    seed: u64,
) -> Result<(FunctionFamily, Vec<ConvexDraw>)> {
    let len = family.len(u64::MAX);
    if len == 0 {
        return Err(Error::InvalidArgument("convex sampling needs a nonempty family".into()));
    }
    if draws == 0 {
        return Ok((family.clone(), Vec::new()));
    }
    let plans: Vec<ConvexDraw> = (0..draws).map(|d| draw_combination(len, seed, d)).collect();
    let members = plans
        .par_iter()
        .map(|p| convex_combination(family, &p.terms))
        .collect::<Result<Vec<_>>>()?;
    let mut out = family.clone();
    out.parts.push(FamilyPart::Explicit(members));
    Ok((out, plans))
}

/// `F` plus `draws` random convex combinations of at most five members each,
/// with Dirichlet(1, ..., 1) weights. Deterministic for a fixed seed.
pub fn convex_sample(family: &FunctionFamily, draws: usize, seed: u64) -> Result<FunctionFamily> {
    convex_sample_with_draws(family, draws, seed).map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_grid, sup_distance};

    fn grid(h: f64) -> Arc<GridDomain> {
        Arc::new(make_grid(0.0, 1.0, h).unwrap())
    }

    #[test]
    fn materialize_direct_evaluation() {
        let g = grid(0.5);
        let f = FunctionFamily::parse(&g, "t^n", 100).unwrap();
        let m = materialize(&f, 2).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].values(), &[0.0, 0.5, 1.0]);
        assert_eq!(m[1].values(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn materialize_caps_at_count() {
        let g = grid(0.5);
        let f = FunctionFamily::parse(&g, "t^n", 3).unwrap();
        assert_eq!(materialize(&f, 10).unwrap().len(), 3);
        assert!(materialize(&f, 0).is_err());
    }

    #[test]
    fn explicit_ignores_cap() {
        let g = grid(0.1);
        let f = FunctionFamily::from_point_exprs(&g, &["t", "t^2", "sin(t)"]).unwrap();
        assert_eq!(materialize(&f, 7).unwrap().len(), 3);
        assert_eq!(materialize(&f, 1).unwrap().len(), 3);
    }

    #[test]
    fn non_finite_member_names_point_and_index() {
        let g = grid(0.5);
        let f = FunctionFamily::parse(&g, "log(t) * n", 3).unwrap();
        match materialize(&f, 3) {
            Err(Error::NonFinite { t, n, .. }) => {
                assert_eq!(t, 0.0);
                assert_eq!(n, 1.0);
            }
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn scaling() {
        let g = grid(0.25);
        let f = FunctionFamily::from_point_exprs(&g, &["t", "t^2"]).unwrap();
        let same = materialize(&scale(&f, 1.0).unwrap(), 1).unwrap();
        for (a, b) in same.iter().zip(materialize(&f, 1).unwrap()) {
            assert_eq!(a.values(), b.values());
        }
        let zero = materialize(&scale(&f, 0.0).unwrap(), 1).unwrap();
        assert!(zero.iter().all(|m| m.values().iter().all(|&v| v == 0.0)));
        let neg = materialize(&scale(&f, -2.0).unwrap(), 1).unwrap();
        for (m, p) in neg.iter().zip([1, 2]) {
            for (v, t) in m.values().iter().zip(g.points()) {
                assert!((v + 2.0 * t.powi(p)).abs() < 1e-15);
            }
        }
        assert!(scale(&f, f64::NAN).is_err());
    }

    #[test]
    fn unions() {
        let g = grid(0.1);
        let f = FunctionFamily::parse(&g, "t^n", 5).unwrap();
        let empty = FunctionFamily::explicit(&g, vec![]).unwrap();
        let u = union(&f, &empty).unwrap();
        assert_eq!(materialize(&u, 5).unwrap(), materialize(&f, 5).unwrap());
        let a = FunctionFamily::from_point_exprs(&g, &["t"]).unwrap();
        let b = FunctionFamily::from_point_exprs(&g, &["t^2"]).unwrap();
        assert_eq!(union(&a, &b).unwrap().len(1), 2);
        let half = FunctionFamily::from_point_exprs(&g, &["0.5"]).unwrap();
        assert_eq!(union(&f, &half).unwrap().len(5), 6);
        let other = FunctionFamily::empty(&grid(0.2));
        assert!(matches!(union(&f, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn convex_sampling_basics() {
        let g = grid(0.1);
        let f = FunctionFamily::from_point_exprs(&g, &["t", "1 - t"]).unwrap();
        assert_eq!(convex_sample(&f, 0, 9).unwrap(), f);
        let mid = convex_combination(&f, &[(0, 0.5), (1, 0.5)]).unwrap();
        assert!(mid.values().iter().all(|v| (v - 0.5).abs() < 1e-15));
        let (s, draws) = convex_sample_with_draws(&f, 12, 3).unwrap();
        assert_eq!(s.len(1), 14);
        let members = materialize(&s, 1).unwrap();
        for (d, m) in draws.iter().zip(&members[2..]) {
            let rebuilt = convex_combination(&f, &d.terms).unwrap();
            assert_eq!(sup_distance(&rebuilt, m).unwrap(), 0.0);
            assert!(d.terms.len() <= MAX_COMBINATION_SIZE);
        }
        assert_eq!(convex_sample(&f, 12, 3).unwrap(), s);
        assert!(convex_sample(&FunctionFamily::empty(&g), 1, 0).is_err());
    }

    #[test]
    fn convex_samples_stay_within_pointwise_envelope() {
        let g = grid(0.05);
        let f = FunctionFamily::parse(&g, "sin(n * t) + t^n", 30).unwrap();
        let src = materialize(&f, 30).unwrap();
        let s = convex_sample(&f, 50, 11).unwrap();
        for m in &materialize(&s, 30).unwrap()[30..] {
            for (j, v) in m.values().iter().enumerate() {
                let lo = src.iter().map(|f| f.values()[j]).fold(f64::INFINITY, f64::min);
                let hi = src.iter().map(|f| f.values()[j]).fold(f64::NEG_INFINITY, f64::max);
                assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }
}
