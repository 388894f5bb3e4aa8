//! Finite partial orders, their cones and initial segments, admissible
//! schedules, and the initial-segment calculus ξ_Φ[u,v].
//!
//! The iteration length `I` is a finite strict partial order. Initial
//! segments (downward-closed subsets) index the projections of conditions;
//! the three-rule recursion ξ_Φ[u,v] computes the largest initial segment on
//! which the splitting cells indexed by `u` and `v` must agree.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::bits::Word;

pub type ElemId = usize;

/// Default cap on `|elements|` for exhaustive initial-segment enumeration.
pub const SEGMENT_ENUM_CAP: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PosetError {
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("duplicate element {0:?}")]
    DuplicateElement(String),
    #[error("order relation contains a cycle")]
    CyclicOrder,
    #[error("subset is not downward closed: contains {member:?} but not {missing:?} < {member:?}")]
    NotDownwardClosed { member: String, missing: String },
    #[error("poset has {size} elements, exceeding the enumeration cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("bit strings have different lengths ({u} vs {v})")]
    LengthMismatch { u: usize, v: usize },
    #[error("schedule horizon {horizon} exceeded (position {needed} requested)")]
    HorizonExceeded { needed: usize, horizon: usize },
    #[error("schedule value at position {position} lies outside the support")]
    ValueOutsideSupport { position: usize },
    #[error("element {element:?} occurs {count} times, below the declared fairness {fairness}")]
    FairnessViolated {
        element: String,
        count: usize,
        fairness: usize,
    },
}

/// A subset of poset elements as a bitmask. Plain set, not necessarily
/// downward closed; see [`Segment`] for the checked kind.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ElemSet(u32);

impl ElemSet {
    pub const EMPTY: ElemSet = ElemSet(0);

    pub fn full(n: usize) -> ElemSet {
        assert!(n <= 32);
        ElemSet(if n == 0 { 0 } else { u32::MAX >> (32 - n) })
    }

    pub fn singleton(i: ElemId) -> ElemSet {
        ElemSet(1 << i)
    }

    pub fn contains(&self, i: ElemId) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(&self, i: ElemId) -> ElemSet {
        ElemSet(self.0 | 1 << i)
    }

    pub fn intersect(&self, other: ElemSet) -> ElemSet {
        ElemSet(self.0 & other.0)
    }

    pub fn union(&self, other: ElemSet) -> ElemSet {
        ElemSet(self.0 | other.0)
    }

    pub fn minus(&self, other: ElemSet) -> ElemSet {
        ElemSet(self.0 & !other.0)
    }

    pub fn is_subset_of(&self, other: ElemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = ElemId> + '_ {
        (0..32).filter(|i| self.contains(*i))
    }

    pub fn raw(&self) -> u32 {
        self.0
    }

    pub fn from_raw(bits: u32) -> ElemSet {
        ElemSet(bits)
    }
}

impl FromIterator<ElemId> for ElemSet {
    fn from_iter<T: IntoIterator<Item = ElemId>>(iter: T) -> Self {
        let mut s = ElemSet::EMPTY;
        for i in iter {
            s = s.with(i);
        }
        s
    }
}

impl fmt::Debug for ElemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElemSet({:b})", self.0)
    }
}

/// The four cones of an element used by the calculus.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConeKind {
    /// `[<i] = {j : j < i}`
    Lt,
    /// `[≤i] = {j : j ≤ i}`
    Le,
    /// `[≱i] = {j : j ≱ i}`, the cone the ξ-calculus intersects with
    NotGe,
    /// `[≯i] = {j : j ≯ i}`, which contains `i` itself
    NotGt,
}

/// A finite strict partial order with named elements.
///
/// The strict relation is transitively closed on construction; cyclic input
/// is a load error. Canonical element order is declaration order.
#[derive(Debug, PartialEq, Eq)]
pub struct FinitePoset {
    names: Vec<String>,
    /// `below[i]` = mask of elements strictly below `i`.
    below: Vec<ElemSet>,
}

impl FinitePoset {
    pub fn new(
        names: Vec<String>,
        lt_pairs: &[(String, String)],
    ) -> Result<Arc<FinitePoset>, PosetError> {
        if names.len() > 32 {
            return Err(PosetError::CapExceeded {
                size: names.len(),
                cap: 32,
            });
        }
        for (k, name) in names.iter().enumerate() {
            if names[..k].contains(name) {
                return Err(PosetError::DuplicateElement(name.clone()));
            }
        }
        let index = |name: &str| -> Result<ElemId, PosetError> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| PosetError::UnknownElement(name.to_owned()))
        };
        let n = names.len();
        let mut below = vec![ElemSet::EMPTY; n];
        for (lo, hi) in lt_pairs {
            let (lo, hi) = (index(lo)?, index(hi)?);
            if lo == hi {
                return Err(PosetError::CyclicOrder);
            }
            below[hi] = below[hi].with(lo);
        }
        // Kahn's toposort for acyclicity.
        let mut remaining: Vec<ElemId> = (0..n).collect();
        let mut removed = ElemSet::EMPTY;
        while !remaining.is_empty() {
            let pos = remaining
                .iter()
                .position(|&i| below[i].minus(removed).is_empty())
                .ok_or(PosetError::CyclicOrder)?;
            removed = removed.with(remaining.remove(pos));
        }
        // Transitive closure.
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..n {
                let mut acc = below[i];
                for j in below[i].iter() {
                    acc = acc.union(below[j]);
                }
                if acc != below[i] {
                    below[i] = acc;
                    changed = true;
                }
            }
        }
        Ok(Arc::new(FinitePoset { names, below }))
    }

    /// A linear order `names[0] < names[1] < ...`.
    pub fn chain(names: &[&str]) -> Arc<FinitePoset> {
        let pairs: Vec<(String, String)> = names
            .windows(2)
            .map(|w| (w[0].to_owned(), w[1].to_owned()))
            .collect();
        FinitePoset::new(names.iter().map(|s| s.to_string()).collect(), &pairs).unwrap()
    }

    /// Pairwise incomparable elements.
    pub fn antichain(names: &[&str]) -> Arc<FinitePoset> {
        FinitePoset::new(names.iter().map(|s| s.to_string()).collect(), &[]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: ElemId) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn elem(&self, name: &str) -> Result<ElemId, PosetError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| PosetError::UnknownElement(name.to_owned()))
    }

    pub fn elements(&self) -> ElemSet {
        ElemSet::full(self.len())
    }

    pub fn lt(&self, i: ElemId, j: ElemId) -> bool {
        self.below[j].contains(i)
    }

    pub fn le(&self, i: ElemId, j: ElemId) -> bool {
        i == j || self.lt(i, j)
    }

    /// Elements strictly below `i`.
    pub fn strictly_below(&self, i: ElemId) -> ElemSet {
        self.below[i]
    }

    pub fn cone(&self, i: ElemId, kind: ConeKind) -> ElemSet {
        let n = self.len();
        match kind {
            ConeKind::Lt => self.below[i],
            ConeKind::Le => self.below[i].with(i),
            ConeKind::NotGe => (0..n).filter(|&j| !self.le(i, j)).collect(),
            ConeKind::NotGt => (0..n).filter(|&j| !self.lt(i, j)).collect(),
        }
    }

    /// True iff `subset` is downward closed.
    pub fn is_initial_segment(&self, subset: ElemSet) -> bool {
        subset.iter().all(|j| self.below[j].is_subset_of(subset))
    }

    fn downward_closure_witness(&self, subset: ElemSet) -> Option<(ElemId, ElemId)> {
        for j in subset.iter() {
            for k in self.below[j].iter() {
                if !subset.contains(k) {
                    return Some((j, k));
                }
            }
        }
        None
    }
}

/// Builds the cone as a verified [`Segment`]. All four cone kinds are
/// downward closed in any poset; the check is kept as a guard.
pub fn cone_segment(poset: &Arc<FinitePoset>, i: ElemId, kind: ConeKind) -> Segment {
    let members = poset.cone(i, kind);
    debug_assert!(poset.is_initial_segment(members));
    Segment {
        poset: poset.clone(),
        members,
    }
}

/// Every downward-closed subset, each exactly once, sorted by size then
/// lexicographically on the member list.
pub fn all_initial_segments(poset: &Arc<FinitePoset>) -> Result<Vec<Segment>, PosetError> {
    all_initial_segments_capped(poset, SEGMENT_ENUM_CAP)
}

pub fn all_initial_segments_capped(
    poset: &Arc<FinitePoset>,
    cap: usize,
) -> Result<Vec<Segment>, PosetError> {
    let n = poset.len();
    if n > cap {
        return Err(PosetError::CapExceeded { size: n, cap });
    }
    let mut masks: Vec<ElemSet> = (0..1u64 << n)
        .map(|m| ElemSet(m as u32))
        .filter(|m| poset.is_initial_segment(*m))
        .collect();
    masks.sort_by_cached_key(|m| (m.len(), m.iter().collect::<Vec<_>>()));
    Ok(masks
        .into_iter()
        .map(|members| Segment {
            poset: poset.clone(),
            members,
        })
        .collect())
}

/// Every downward-closed subset of the given segment, canonically ordered
/// (size, then lexicographic on the member list).
pub fn initial_segments_within(support: &Segment) -> Vec<Segment> {
    let poset = support.poset();
    let n = poset.len();
    let mut masks: Vec<ElemSet> = (0..1u64 << n)
        .map(|m| ElemSet(m as u32))
        .filter(|m| m.is_subset_of(support.members()) && poset.is_initial_segment(*m))
        .collect();
    masks.sort_by_cached_key(|m| (m.len(), m.iter().collect::<Vec<_>>()));
    masks
        .into_iter()
        .map(|members| Segment {
            poset: poset.clone(),
            members,
        })
        .collect()
}

/// A downward-closed subset of a poset. The invariant is enforced at
/// construction; set operations that preserve it are provided directly.
#[derive(Clone)]
pub struct Segment {
    poset: Arc<FinitePoset>,
    members: ElemSet,
}

impl Segment {
    pub fn new(poset: Arc<FinitePoset>, members: ElemSet) -> Result<Segment, PosetError> {
        if let Some((j, k)) = poset.downward_closure_witness(members) {
            return Err(PosetError::NotDownwardClosed {
                member: poset.name(j).to_owned(),
                missing: poset.name(k).to_owned(),
            });
        }
        Ok(Segment { poset, members })
    }

    pub fn from_names(poset: &Arc<FinitePoset>, names: &[&str]) -> Result<Segment, PosetError> {
        let mut members = ElemSet::EMPTY;
        for name in names {
            members = members.with(poset.elem(name)?);
        }
        Segment::new(poset.clone(), members)
    }

    pub fn full(poset: &Arc<FinitePoset>) -> Segment {
        Segment {
            members: poset.elements(),
            poset: poset.clone(),
        }
    }

    pub fn empty(poset: &Arc<FinitePoset>) -> Segment {
        Segment {
            poset: poset.clone(),
            members: ElemSet::EMPTY,
        }
    }

    pub fn poset(&self) -> &Arc<FinitePoset> {
        &self.poset
    }

    pub fn members(&self) -> ElemSet {
        self.members
    }

    pub fn contains(&self, i: ElemId) -> bool {
        self.members.contains(i)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ElemId> + '_ {
        self.members.iter()
    }

    fn same_poset(&self, other: &Segment) -> bool {
        Arc::ptr_eq(&self.poset, &other.poset) || *self.poset == *other.poset
    }

    /// Intersection of initial segments is an initial segment.
    pub fn intersect(&self, other: &Segment) -> Segment {
        assert!(self.same_poset(other), "segments over different posets");
        Segment {
            poset: self.poset.clone(),
            members: self.members.intersect(other.members),
        }
    }

    /// Union of initial segments is an initial segment.
    pub fn union(&self, other: &Segment) -> Segment {
        assert!(self.same_poset(other), "segments over different posets");
        Segment {
            poset: self.poset.clone(),
            members: self.members.union(other.members),
        }
    }

    /// Intersection with a cone of the same poset.
    pub fn intersect_cone(&self, i: ElemId, kind: ConeKind) -> Segment {
        let members = self.members.intersect(self.poset.cone(i, kind));
        debug_assert!(self.poset.is_initial_segment(members));
        Segment {
            poset: self.poset.clone(),
            members,
        }
    }

    pub fn is_subset_of(&self, other: &Segment) -> bool {
        self.same_poset(other) && self.members.is_subset_of(other.members)
    }

    pub fn names(&self) -> Vec<String> {
        self.iter().map(|i| self.poset.name(i).to_owned()).collect()
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.same_poset(other) && self.members == other.members
    }
}

impl Eq for Segment {}

impl fmt::Debug for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.poset.name(i))?;
        }
        write!(f, "}}")
    }
}

/// A finite truncation of an admissible function Φ: a sequence of coordinates
/// over a support segment, with a declared minimum per-element occurrence
/// count. An admissible function hits every coordinate infinitely often;
/// that has no finite analog, so fairness is an explicit parameter.
#[derive(Clone, PartialEq, Debug)]
pub struct Schedule {
    support: Segment,
    values: Vec<ElemId>,
    fairness: usize,
}

impl Schedule {
    pub fn new(
        support: Segment,
        values: Vec<ElemId>,
        fairness: usize,
    ) -> Result<Schedule, PosetError> {
        for (position, &v) in values.iter().enumerate() {
            if !support.contains(v) {
                return Err(PosetError::ValueOutsideSupport { position });
            }
        }
        for i in support.iter() {
            let count = values.iter().filter(|&&v| v == i).count();
            if count < fairness {
                return Err(PosetError::FairnessViolated {
                    element: support.poset().name(i).to_owned(),
                    count,
                    fairness,
                });
            }
        }
        Ok(Schedule {
            support,
            values,
            fairness,
        })
    }

    /// Support members in canonical order, repeated `rounds` times.
    pub fn fair_round_robin(support: Segment, rounds: usize) -> Schedule {
        let one: Vec<ElemId> = support.iter().collect();
        let values: Vec<ElemId> = std::iter::repeat_with(|| one.iter().copied())
            .take(rounds)
            .flatten()
            .collect();
        Schedule {
            support,
            values,
            fairness: rounds,
        }
    }

    pub fn support(&self) -> &Segment {
        &self.support
    }

    pub fn poset(&self) -> &Arc<FinitePoset> {
        self.support.poset()
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn fairness(&self) -> usize {
        self.fairness
    }

    pub fn values(&self) -> &[ElemId] {
        &self.values
    }

    pub fn value(&self, n: usize) -> Result<ElemId, PosetError> {
        self.values
            .get(n)
            .copied()
            .ok_or(PosetError::HorizonExceeded {
                needed: n + 1,
                horizon: self.horizon(),
            })
    }

    /// The first `n` positions as a schedule (fairness drops to the realized
    /// minimum occurrence count).
    pub fn truncated(&self, n: usize) -> Schedule {
        let values: Vec<ElemId> = self.values.iter().copied().take(n).collect();
        let fairness = self
            .support
            .iter()
            .map(|i| values.iter().filter(|&&v| v == i).count())
            .min()
            .unwrap_or(0);
        Schedule {
            support: self.support.clone(),
            values,
            fairness,
        }
    }

    /// The initial segment ξ_Φ[u,v], computed by the three recursion rules:
    /// start from the full support and intersect with `[≱Φ(n)]` exactly at
    /// the positions where `u` and `v` disagree.
    pub fn xi_pair(&self, u: &Word, v: &Word) -> Result<Segment, PosetError> {
        if u.len() != v.len() {
            return Err(PosetError::LengthMismatch {
                u: u.len(),
                v: v.len(),
            });
        }
        if u.len() > self.horizon() {
            return Err(PosetError::HorizonExceeded {
                needed: u.len(),
                horizon: self.horizon(),
            });
        }
        let mut xi = self.support.clone();
        for n in 0..u.len() {
            if u.bit(n) != v.bit(n) {
                xi = xi.intersect_cone(self.values[n], ConeKind::NotGe);
            }
        }
        Ok(xi)
    }
}
