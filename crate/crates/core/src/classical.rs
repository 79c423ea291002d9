//! Kuratowski (`α`) and Hausdorff (`χ`) measures of non-compactness under the
//! sup norm.
//!
//! Small explicit families get exact values by exhaustive search. Parametric
//! families get brackets: lower bounds from separated subsets (greedy
//! farthest-point selection and geometric index probes), upper bounds from
//! explicit nets.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{sup_distance, sup_distance_values, GridDomain};
use crate::error::{Error, Result};
use crate::expr::FamilyExpr;
use crate::extended::ExtendedNonNegReal;
use crate::family::{evaluate_member, FamilyPart, FunctionFamily, SampledFunction};

/// Largest member count accepted by [`kuratowski_exact`].
pub const MAX_PARTITION_MEMBERS: usize = 12;
/// Largest candidate-center count accepted by [`hausdorff_exact`].
pub const MAX_NET_CENTERS: usize = 20;
/// Largest index a geometric probe may evaluate.
pub const MAX_PROBE_INDEX: f64 = 1e300;

/// A lower and upper estimate of one measure, with how each was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MncBracket {
    pub lower: ExtendedNonNegReal,
    pub upper: ExtendedNonNegReal,
    pub lower_witness: String,
    pub upper_witness: String,
}

impl MncBracket {
    fn zero(witness: &str) -> Self {
        MncBracket {
            lower: ExtendedNonNegReal::ZERO,
            upper: ExtendedNonNegReal::ZERO,
            lower_witness: witness.into(),
            upper_witness: witness.into(),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower.as_f64() <= v && v <= self.upper.as_f64()
    }
}

/// Symmetric matrix of pairwise sup distances.
pub fn distance_matrix(members: &[SampledFunction]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = members.first() {
        if members.iter().any(|m| !m.same_grid(first)) {
            return Err(Error::GridMismatch);
        }
    }
    Ok(members
        .par_iter()
        .map(|a| {
            members
                .iter()
                .map(|b| sup_distance_values(a.values(), b.values()))
                .collect()
        })
        .collect())
}

/// Minimum over partitions into at most `max_parts` blocks of the largest
/// block diameter.
pub fn kuratowski_exact(members: &[SampledFunction], max_parts: usize) -> Result<f64> {
    if max_parts == 0 {
        return Err(Error::InvalidArgument("max_parts must be >= 1".into()));
    }
    if members.len() > MAX_PARTITION_MEMBERS {
        return Err(Error::TooLarge(format!(
            "{} members; exhaustive partition search allows at most {MAX_PARTITION_MEMBERS}",
            members.len()
        )));
    }
    if members.len() <= max_parts {
        return Ok(0.0);
    }
    let d = distance_matrix(members)?;
    let single_block = d.iter().flatten().fold(0.0, |m: f64, &v| m.max(v));

    struct Search<'a> {
        d: &'a [Vec<f64>],
        max_parts: usize,
        best: f64,
        blocks: Vec<(Vec<usize>, f64)>,
    }

    impl Search<'_> {
        fn place(&mut self, i: usize, worst: f64) {
            if worst >= self.best {
                return;
            }
            if i == self.d.len() {
                self.best = worst;
                return;
            }
            for b in 0..self.blocks.len() {
                let grown = self.blocks[b]
                    .0
                    .iter()
                    .map(|&j| self.d[i][j])
                    .fold(self.blocks[b].1, f64::max);
                let saved = self.blocks[b].1;
                self.blocks[b].0.push(i);
                self.blocks[b].1 = grown;
                self.place(i + 1, worst.max(grown));
                self.blocks[b].0.pop();
                self.blocks[b].1 = saved;
            }
            if self.blocks.len() < self.max_parts {
                self.blocks.push((vec![i], 0.0));
                self.place(i + 1, worst);
                self.blocks.pop();
            }
        }
    }

    let mut search = Search {
        d: &d,
        max_parts,
        // a strict bound so the single-block partition is still visited
        best: single_block + 1.0,
        blocks: Vec::new(),
    };
    search.place(0, 0.0);
    Ok(search.best.min(single_block))
}

/// Minimum over `k`-subsets of `centers` of the largest distance from a
/// member to its nearest chosen center.
pub fn hausdorff_exact(
    members: &[SampledFunction],
    centers: &[SampledFunction],
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if members.is_empty() {
        return Err(Error::InvalidArgument("members must be nonempty".into()));
    }
    if centers.len() > MAX_NET_CENTERS {
        return Err(Error::TooLarge(format!(
            "{} centers; exhaustive net search allows at most {MAX_NET_CENTERS}",
            centers.len()
        )));
    }
    if k > centers.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available centers",
            centers.len()
        )));
    }
    let d = members
        .par_iter()
        .map(|m| centers.iter().map(|c| sup_distance(m, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let c = centers.len() as u32;
    let mut best = f64::INFINITY;
    // Gosper's hack over k-bit masks in ascending order
    let mut mask: u32 = (1u32 << k) - 1;
    while mask < (1u32 << c) {
        let radius = d
            .iter()
            .map(|row| {
                (0..c)
                    .filter(|j| mask & (1 << j) != 0)
                    .map(|j| row[j as usize])
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        best = best.min(radius);
        let low = mask & mask.wrapping_neg();
        let ripple = mask + low;
        mask = (((ripple ^ mask) >> 2) / low) | ripple;
    }
    Ok(best)
}

/// Greedy farthest-point selection and the separation it certifies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationProfile {
    /// Member indices in selection order, starting with member 0.
    pub selected: Vec<usize>,
    pub labels: Vec<String>,
    /// `(m, δ(m))`: minimum pairwise distance of the first `m` selections.
    pub levels: Vec<(usize, f64)>,
    /// Largest distance from member 0 to any member.
    pub seed_radius: f64,
}

impl SeparationProfile {
    pub fn delta(&self, m: usize) -> Option<f64> {
        self.levels.iter().find(|(k, _)| *k == m).map(|(_, d)| *d)
    }
}

/// Distances from `center` to every member of the capped view.
fn distances_to(view: &crate::family::FamilyView<'_>, center: &[f64]) -> Result<Vec<f64>> {
    (0..view.len())
        .into_par_iter()
        .map(|i| Ok(sup_distance_values(&view.values(i)?, center)))
        .collect()
}

/// Greedy farthest-point separated subsets of sizes `2..=m_max`, seeded at
/// the first member; ties go to the lowest index.
pub fn separation_profile(family: &FunctionFamily, cap: u64, m_max: usize) -> Result<SeparationProfile> {
    if m_max < 2 {
        return Err(Error::InvalidArgument("m_max must be >= 2".into()));
    }
    if cap < m_max as u64 {
        return Err(Error::InvalidArgument(format!("cap {cap} is smaller than m_max {m_max}")));
    }
    let view = family.view(cap);
    if view.is_empty() {
        return Err(Error::InvalidArgument("family is empty".into()));
    }
    let seed = view.values(0)?.into_owned();
    let mut nearest = distances_to(&view, &seed)?;
    let seed_radius = nearest.iter().copied().fold(0.0, f64::max);
    let mut selected = vec![0];
    let mut labels = vec![view.label(0)];
    let mut levels = Vec::new();
    let mut delta = f64::INFINITY;
    for m in 2..=m_max.min(view.len()) {
        let (next, far) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, &d)| if d > bd { (i, d) } else { (bi, bd) });
        delta = delta.min(far);
        levels.push((m, delta));
        selected.push(next);
        labels.push(view.label(next));
        if m < m_max.min(view.len()) {
            let dist = distances_to(&view, &view.values(next)?)?;
            for (n, d) in nearest.iter_mut().zip(dist) {
                *n = n.min(d);
            }
        }
    }
    Ok(SeparationProfile {
        selected,
        labels,
        levels,
        seed_radius,
    })
}

/// Pairwise distances of members at geometrically growing indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub indices: Vec<f64>,
    /// `(j, k, ‖f_{n_j} − f_{n_k}‖)` for `j < k`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub delta: f64,
    /// Conditional bound on `α`; `χ` gets half of it.
    pub alpha: MncBracket,
    pub chi: MncBracket,
}

/// Sup over `T` of `|g(t)|`, sampled on the grid plus points clustered
/// geometrically at both endpoints, then refined by golden-section search
/// around the best sample. Every evaluated point lies in `T`, so the result
/// never exceeds the true supremum.
fn refined_sup(domain: &GridDomain, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    const PER_DECADE: i32 = 32;
    const DECADES: i32 = 16;
    let (lo, hi) = (domain.lower(), domain.upper());
    let width = hi - lo;
    let mut ts: Vec<f64> = domain.points().to_vec();
    for k in PER_DECADE..=PER_DECADE * DECADES {
        let off = width * 10f64.powf(-(k as f64) / PER_DECADE as f64);
        ts.push(lo + off);
        ts.push(hi - off);
    }
    ts.retain(|t| (lo..=hi).contains(t));
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let vals = ts.iter().map(|&t| g(t).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let (best, mut top) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });

    let (mut a, mut b) = (ts[best.saturating_sub(1)], ts[(best + 1).min(ts.len() - 1)]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = g(x1)?.abs();
    let mut f2 = g(x2)?.abs();
    for _ in 0..80 {
        top = top.max(f1).max(f2);
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = g(x2)?.abs();
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = g(x1)?.abs();
        }
    }
    Ok(top.max(f1).max(f2))
}

fn single_parametric(family: &FunctionFamily) -> Result<(&FamilyExpr, f64)> {
    match family.parts() {
        [FamilyPart::Parametric { expr, scale, .. }] => Ok((expr, *scale)),
        _ => Err(Error::InvalidArgument(
            "geometric probe needs a family with exactly one parametric part".into(),
        )),
    }
}

/// Evaluates members at `n_j = ⌈ratio^j⌉`, `j = 0..levels`, and reports the
/// minimum pairwise distance `δ`. If the pattern persists for all `j`, the
/// family contains an infinite `δ`-separated sequence, so `α ≥ δ` and
/// `χ ≥ δ/2`. No upper bound is claimed.
pub fn geometric_probe(family: &FunctionFamily, ratio: f64, levels: usize) -> Result<ProbeResult> {
    if !(ratio > 1.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!("probe ratio must exceed 1, got {ratio}")));
    }
    if levels < 2 {
        return Err(Error::InvalidArgument("probe needs at least 2 levels".into()));
    }
    let (expr, scale) = single_parametric(family)?;
    let indices = (0..levels)
        .map(|j| {
            let n = ratio.powi(j as i32).ceil();
            if n > MAX_PROBE_INDEX || !n.is_finite() {
                Err(Error::IndexOverflow { index: n })
            } else {
                Ok(n)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let domain: &Arc<GridDomain> = family.domain();
    let pair_list: Vec<(usize, usize)> = (0..levels)
        .flat_map(|j| (j + 1..levels).map(move |k| (j, k)))
        .collect();
    let pairs = pair_list
        .par_iter()
        .map(|&(j, k)| {
            let (a, b) = (indices[j], indices[k]);
            let d = refined_sup(domain, |t| {
                Ok(evaluate_member(expr, scale, t, a)? - evaluate_member(expr, scale, t, b)?)
            })?;
            Ok((j, k, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let delta = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let witness = format!(
        "indices ceil({ratio}^j), j < {levels}: min pairwise distance {delta} (conditional on the pattern persisting)"
    );
    Ok(ProbeResult {
        alpha: MncBracket {
            lower: ExtendedNonNegReal::finite(delta),
            upper: ExtendedNonNegReal::Infinite,
            lower_witness: witness.clone(),
            upper_witness: "none".into(),
        },
        chi: MncBracket {
            lower: ExtendedNonNegReal::finite(delta / 2.0),
            upper: ExtendedNonNegReal::Infinite,
            lower_witness: witness,
            upper_witness: "none".into(),
        },
        indices,
        pairs,
        delta,
    })
}

/// Settings for [`mnc_bracket`].
#[derive(Debug, Clone)]
pub struct BracketConfig {
    pub probe_ratio: f64,
    pub probe_levels: usize,
    /// Size of the greedy separated subset.
    pub separation_m: usize,
    /// Candidate single-ball centers for the `χ` upper bound.
    pub witness_centers: Vec<SampledFunction>,
}

impl Default for BracketConfig {
    fn default() -> Self {
        BracketConfig {
            probe_ratio: 100.0,
            probe_levels: 5,
            separation_m: 5,
            witness_centers: Vec::new(),
        }
    }
}

fn check_bracket(measure: &'static str, b: &MncBracket) -> Result<()> {
    if b.lower > b.upper {
        return Err(Error::InconsistentBracket {
            measure,
            lower: b.lower.as_f64(),
            upper: b.upper.as_f64(),
        });
    }
    Ok(())
}

/// Brackets for `α` and `χ` of `family` at `cap`.
///
/// Explicit families are finite, hence relatively compact: both measures are
/// zero. For parametric families the `α` lower bound is the larger of the
/// probe separation and the greedy separation at `separation_m`; the `χ`
/// lower bound is half of it. The `χ` upper bound is the best single-ball
/// radius among the witness centers and member 0, and `α ≤ 2χ` gives the `α`
/// upper bound.
pub fn mnc_bracket(family: &FunctionFamily, cap: u64, config: &BracketConfig) -> Result<(MncBracket, MncBracket)> {
    if family.is_explicit() {
        return Ok((
            MncBracket::zero("finite family: singleton blocks"),
            MncBracket::zero("finite family: every member is a center"),
        ));
    }
    let view = family.view(cap);
    if view.is_empty() {
        return Err(Error::InvalidArgument("family is empty at this cap".into()));
    }

    let mut lower = 0.0;
    let mut lower_witness = String::from("none");
    let m = config.separation_m.min(view.len());
    let seed_radius;
    if m >= 2 {
        let profile = separation_profile(family, cap.max(m as u64), m)?;
        seed_radius = profile.seed_radius;
        if let Some(&(m, d)) = profile.levels.last() {
            lower = d;
            lower_witness = format!("greedy {m}-point separated subset, δ = {d}");
        }
    } else {
        seed_radius = seed_radius_of(&view)?;
    }
    if single_parametric(family).is_ok() {
        let probe = geometric_probe(family, config.probe_ratio, config.probe_levels)?;
        if probe.delta > lower {
            lower = probe.delta;
            lower_witness = probe.alpha.lower_witness.clone();
        }
    }

    let mut radius = seed_radius;
    let mut upper_witness = format!("ball around member 0 ({}) of radius {radius}", view.label(0));
    for c in &config.witness_centers {
        if !crate::family::same_domain(c.domain(), family.domain()) {
            return Err(Error::GridMismatch);
        }
        let r = distances_to(&view, c.values())?.into_iter().fold(0.0, f64::max);
        if r < radius {
            radius = r;
            upper_witness = format!("ball around {} of radius {r}", c.label());
        }
    }

    let alpha = MncBracket {
        lower: ExtendedNonNegReal::finite(lower),
        upper: ExtendedNonNegReal::finite(2.0 * radius),
        lower_witness: lower_witness.clone(),
        upper_witness: format!("{upper_witness}; diameter at most twice the radius"),
    };
    let chi = MncBracket {
        lower: ExtendedNonNegReal::finite(lower / 2.0),
        upper: ExtendedNonNegReal::finite(radius),
        lower_witness: format!("half of the α lower bound: {lower_witness}"),
        upper_witness,
    };
    check_bracket("alpha", &alpha)?;
    check_bracket("chi", &chi)?;
    assert!(chi.upper <= alpha.upper);
    Ok((alpha, chi))
}

fn seed_radius_of(view: &crate::family::FamilyView<'_>) -> Result<f64> {
    let seed = view.values(0)?.into_owned();
    Ok(distances_to(view, &seed)?.into_iter().fold(0.0, f64::max))
}
