//! Ultrafilters of zero sets on finite discrete spaces.
//!
//! Every subset of a finite discrete space is a zero set, so a collection of
//! zero sets is a set of bitmasks over `{0, .., n-1}`. With `n <= 5` there are
//! at most 32 subsets, and a collection fits in a `u32`-indexed `u64` mask.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 5;
/// Largest `n` for which every collection of subsets is enumerated.
pub const MAX_EXHAUSTIVE_POINTS: usize = 4;

/// A subset of the ground set as a bitmask.
pub type Subset = u32;
/// A collection of subsets: bit `A` is set when subset `A` belongs to it.
pub type Collection = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FiniteSpace {
    n: usize,
}

impl FiniteSpace {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=MAX_POINTS).contains(&n) {
            return Err(Error::InvalidArgument(format!("n must be in 1..={MAX_POINTS}, got {n}")));
        }
        Ok(FiniteSpace { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn full(&self) -> Subset {
        (1 << self.n) - 1
    }

    /// All subsets in ascending bitmask order: the zero sets, and also the
    /// open sets.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> {
        0..=self.full()
    }

    pub fn subset_count(&self) -> usize {
        1 << self.n
    }

    pub fn complement(&self, a: Subset) -> Subset {
        self.full() & !a
    }

    /// `P_t = {A : t ∈ A}`.
    pub fn principal(&self, t: usize) -> Ultrafilter {
        assert!(t < self.n);
        Ultrafilter::from_sets(self.subsets().filter(|a| a & (1 << t) != 0))
    }
}

/// A collection of zero sets; an ultrafilter when built by
/// [`enumerate_ultrafilters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Ultrafilter {
    pub sets: Collection,
}

impl Ultrafilter {
    pub fn from_sets(sets: impl IntoIterator<Item = Subset>) -> Self {
        Ultrafilter {
            sets: sets.into_iter().fold(0, |m, a| m | (1 << a)),
        }
    }

    pub fn contains(&self, a: Subset) -> bool {
        self.sets & (1 << a) != 0
    }

    pub fn members(&self) -> impl Iterator<Item = Subset> + '_ {
        (0..64).filter(|&a| self.contains(a))
    }

    /// The point `t` with `self = P_t`, if any.
    pub fn principal_point(&self, space: &FiniteSpace) -> Option<usize> {
        (0..space.n()).find(|&t| space.principal(t) == *self)
    }

    pub fn describe(&self) -> String {
        let sets: Vec<String> = self
            .members()
            .map(|a| {
                let pts: Vec<String> = (0..MAX_POINTS).filter(|t| a & (1 << t) != 0).map(|t| t.to_string()).collect();
                format!("{{{}}}", pts.join(","))
            })
            .collect();
        format!("[{}]", sets.join(" "))
    }
}

/// (ω1): every finite subcollection has nonempty intersection. The empty
/// subcollection intersects to the whole space, so this is the condition on
/// the intersection of all members.
pub fn finite_intersection_property(space: &FiniteSpace, c: Collection) -> bool {
    let u = Ultrafilter { sets: c };
    u.members().fold(space.full(), |acc, a| acc & a) != 0
}

/// (ω1) and (ω2): no zero set outside `c` can be added keeping (ω1).
pub fn is_ultrafilter_by_definition(space: &FiniteSpace, c: Collection) -> bool {
    if !finite_intersection_property(space, c) {
        return false;
    }
    space
        .subsets()
        .filter(|&a| c & (1 << a) == 0)
        .all(|a| !finite_intersection_property(space, c | (1 << a)))
}

fn check_space(space: &FiniteSpace, c: Collection) {
    debug_assert!(space.subset_count() == 64 || c >> space.subset_count() == 0);
}

/// All ω-ultrafilters in ascending order of their collection mask.
///
/// For `n <= 4` every collection of subsets is tested directly. For `n = 5`
/// (2^32 collections) the search is pruned: a collection with (ω1) has a
/// nonempty core `K` (the intersection of its members) and lies inside the
/// up-set of `K`; since up-sets of nonempty cores have (ω1), a maximal one is
/// the up-set of some nonempty `K`, so only those candidates are tested.
pub fn enumerate_ultrafilters(space: &FiniteSpace) -> Vec<Ultrafilter> {
    if space.n() <= MAX_EXHAUSTIVE_POINTS {
        enumerate_exhaustive(space)
    } else {
        enumerate_pruned(space)
    }
}

pub fn enumerate_exhaustive(space: &FiniteSpace) -> Vec<Ultrafilter> {
    assert!(space.n() <= MAX_EXHAUSTIVE_POINTS, "2^(2^n) collections are out of reach");
    let total: u64 = 1 << space.subset_count();
    (0..total)
        .filter(|&c| is_ultrafilter_by_definition(space, c))
        .map(|sets| Ultrafilter { sets })
        .collect()
}

/// `{A : K ⊆ A}`.
pub fn up_set(space: &FiniteSpace, core: Subset) -> Collection {
    space.subsets().filter(|a| a & core == core).fold(0, |m, a| m | (1 << a))
}

pub fn enumerate_pruned(space: &FiniteSpace) -> Vec<Ultrafilter> {
    let mut found: Vec<Ultrafilter> = space
        .subsets()
        .filter(|&k| k != 0)
        .map(|k| up_set(space, k))
        .filter(|&c| {
            check_space(space, c);
            is_ultrafilter_by_definition(space, c)
        })
        .map(|sets| Ultrafilter { sets })
        .collect();
    found.sort();
    found.dedup();
    found
}

/// (U1): pairwise (hence finite) intersections of members stay in `u`, and
/// `∅ ∉ u`. (U2): a zero set meeting every member belongs to `u`.
///
/// Without `∅ ∉ u` the collection of all subsets would satisfy both
/// closure conditions.
pub fn check_characterization(u: &Ultrafilter, space: &FiniteSpace) -> bool {
    if u.contains(0) || u.sets == 0 {
        return false;
    }
    let members: Vec<Subset> = u.members().collect();
    let u1 = members.iter().all(|&a| members.iter().all(|&b| u.contains(a & b)));
    let u2 = space
        .subsets()
        .all(|a| !members.iter().all(|&b| a & b != 0) || u.contains(a));
    u1 && u2
}

/// Which of (U1)/(U2) fails first, for reporting.
pub fn characterization_failure(u: &Ultrafilter, space: &FiniteSpace) -> Option<String> {
    if u.sets == 0 {
        return Some("empty collection".into());
    }
    if u.contains(0) {
        return Some("contains the empty set".into());
    }
    let members: Vec<Subset> = u.members().collect();
    for &a in &members {
        for &b in &members {
            if !u.contains(a & b) {
                return Some(format!("(U1) fails: {a:#b} ∩ {b:#b} is missing"));
            }
        }
    }
    space
        .subsets()
        .find(|&a| members.iter().all(|&b| a & b != 0) && !u.contains(a))
        .map(|a| format!("(U2) fails for A = {a:#b}"))
}

/// Over all collections on `n <= 3` points: (ω1)∧(ω2) agrees with the
/// characterization. Returns the number of collections checked and the first
/// disagreement.
pub fn check_characterization_equivalence(space: &FiniteSpace) -> Result<(u64, Option<Collection>)> {
    if space.n() > 3 {
        return Err(Error::TooLarge(format!(
            "equivalence over all collections is limited to n <= 3, got {}",
            space.n()
        )));
    }
    let total: u64 = 1 << space.subset_count();
    let bad = (0..total).find(|&c| {
        is_ultrafilter_by_definition(space, c) != check_characterization(&Ultrafilter { sets: c }, space)
    });
    Ok((total, bad))
}

/// `A ∪ B ∈ u ⟹ A ∈ u ∨ B ∈ u` for every ultrafilter and every pair of zero
/// sets. Returns the number of (ultrafilter, A, B) triples checked.
pub fn check_union_corollary(space: &FiniteSpace) -> (usize, bool) {
    let wall = enumerate_ultrafilters(space);
    let mut checked = 0;
    let mut ok = true;
    for u in &wall {
        for a in space.subsets() {
            for b in space.subsets() {
                checked += 1;
                ok &= !u.contains(a | b) || u.contains(a) || u.contains(b);
            }
        }
    }
    (checked, ok)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StarSet {
    pub open_set: Subset,
    /// Indices into the enumeration of ultrafilters.
    pub members: Vec<usize>,
}

/// `U* = {u : T \ U ∉ u}`.
pub fn star(space: &FiniteSpace, wall: &[Ultrafilter], open_set: Subset) -> StarSet {
    assert!(open_set <= space.full(), "open set outside the ground set");
    let comp = space.complement(open_set);
    StarSet {
        open_set,
        members: (0..wall.len()).filter(|&i| !wall[i].contains(comp)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntersectionCheck {
    pub pairs: usize,
    pub passed: usize,
    pub empty_star_is_empty: bool,
    pub full_star_is_everything: bool,
    pub stars_cover: bool,
    /// First failing pair `(U, V)`.
    pub first_failure: Option<(Subset, Subset)>,
}

impl IntersectionCheck {
    pub fn ok(&self) -> bool {
        self.passed == self.pairs && self.empty_star_is_empty && self.full_star_is_everything && self.stars_cover
    }
}

/// `U* ∩ V* = (U ∩ V)*` over all pairs of open sets, plus `∅* = ∅`,
/// `T* = Wall` and that stars cover `Wall`.
pub fn check_intersection_formula(space: &FiniteSpace) -> IntersectionCheck {
    let wall = enumerate_ultrafilters(space);
    let stars: Vec<StarSet> = space.subsets().map(|u| star(space, &wall, u)).collect();
    let mut pairs = 0;
    let mut passed = 0;
    let mut first_failure = None;
    for u in space.subsets() {
        for v in space.subsets() {
            pairs += 1;
            let lhs: Vec<usize> = stars[u as usize]
                .members
                .iter()
                .copied()
                .filter(|i| stars[v as usize].members.contains(i))
                .collect();
            if lhs == stars[(u & v) as usize].members {
                passed += 1;
            } else if first_failure.is_none() {
                first_failure = Some((u, v));
            }
        }
    }
    let mut covered = vec![false; wall.len()];
    for s in &stars {
        for &i in &s.members {
            covered[i] = true;
        }
    }
    IntersectionCheck {
        pairs,
        passed,
        empty_star_is_empty: stars[0].members.is_empty(),
        full_star_is_everything: stars[space.full() as usize].members.len() == wall.len(),
        stars_cover: covered.iter().all(|&c| c),
        first_failure,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallmanSummary {
    pub n: usize,
    pub ultrafilters: usize,
    pub all_principal: bool,
    /// `t -> P_t` hits every enumerated ultrafilter exactly once.
    pub principal_bijection: bool,
    pub characterization_ok: bool,
    /// Collections checked for the definition/characterization equivalence
    /// (only for `n <= 3`).
    pub equivalence_checked: Option<u64>,
    pub equivalence_ok: Option<bool>,
    pub union_triples: usize,
    pub union_ok: bool,
    pub intersection: IntersectionCheck,
}

impl WallmanSummary {
    pub fn ok(&self) -> bool {
        self.ultrafilters == self.n
            && self.all_principal
            && self.principal_bijection
            && self.characterization_ok
            && self.equivalence_ok.unwrap_or(true)
            && self.union_ok
            && self.intersection.ok()
    }

    pub fn headline(&self) -> String {
        format!(
            "{} ultrafilters, {}; intersection formula: {}/{} pairs pass",
            self.ultrafilters,
            if self.all_principal { "all principal" } else { "not all principal" },
            self.intersection.passed,
            self.intersection.pairs
        )
    }
}

/// Every check of this module for one space.
pub fn summarize(space: &FiniteSpace) -> Result<WallmanSummary> {
    let wall = enumerate_ultrafilters(space);
    let points: Vec<Option<usize>> = wall.iter().map(|u| u.principal_point(space)).collect();
    let all_principal = points.iter().all(Option::is_some);
    let mut hit: Vec<usize> = points.iter().flatten().copied().collect();
    hit.sort_unstable();
    let principal_bijection = all_principal && hit == (0..space.n()).collect::<Vec<_>>();
    let (equivalence_checked, equivalence_ok) = if space.n() <= 3 {
        let (checked, bad) = check_characterization_equivalence(space)?;
        (Some(checked), Some(bad.is_none()))
    } else {
        (None, None)
    };
    let (union_triples, union_ok) = check_union_corollary(space);
    Ok(WallmanSummary {
        n: space.n(),
        ultrafilters: wall.len(),
        all_principal,
        principal_bijection,
        characterization_ok: wall.iter().all(|u| check_characterization(u, space)),
        equivalence_checked,
        equivalence_ok,
        union_triples,
        union_ok,
        intersection: check_intersection_formula(space),
    })
}
