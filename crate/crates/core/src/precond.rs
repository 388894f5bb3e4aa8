//! Validators for the condition axioms P-1..P-4 and shrinkability, plus the
//! condition-building operations: Spl(X,i,e), restriction, amalgamation along
//! an inverse projection, iterated splitting X_Φ[u], and clopen localization.
//!
//! Closedness (P-1) is automatic for stored shadows and nonemptiness is a
//! type invariant, so P-1 always reports true. P-2 has no depth-free finite
//! meaning, so it is parameterized by a splitting modulus k: every node of
//! every section's prefix tree at depth ≤ N−k must have a splitting
//! descendant within k levels. P-3 reports, per coordinate, the minimal m
//! such that membership of a fiber in any basic-clopen section predicate is
//! determined by the fiber's depth-min(N, m·(|s|+1)) truncation. P-4 is
//! checked exhaustively over all pairs of initial segments of the support.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::bits::Word;
use crate::clopen::{Clopen, ClopenError};
use crate::poset::{ElemId, PosetError, Schedule, Segment};
use crate::shadow::{SectionTree, ShadowError, ShadowPoint, TreeSystem};

#[derive(Debug, Error)]
pub enum PrecondError {
    #[error(transparent)]
    Shadow(#[from] ShadowError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Clopen(#[from] ClopenError),
    #[error("degenerate section at {element:?} over fiber {fiber:?}")]
    DegenerateSection { element: String, fiber: String },
    #[error("degenerate section at step {step} (element {element:?})")]
    DegenerateAtStep { step: usize, element: String },
    #[error("segment is not contained in the support")]
    SegmentNotInSupport,
    #[error("operand is not a subset of the restriction")]
    SubsetViolation,
    #[error("schedule support does not match the condition support")]
    ScheduleMismatch,
    #[error("point does not belong to the condition")]
    PointNotInCondition,
    #[error("predicate excludes the anchor point")]
    PredicateExcludesPoint,
    #[error("schedule horizon {horizon} exhausted before containment")]
    BudgetExhausted { horizon: usize },
}

/// Outcome of the per-coordinate perfectness check.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub enum SplittingOutcome {
    /// Minimal k such that every prefix-tree node at depth ≤ N−k has a
    /// splitting descendant within k levels, over every fiber.
    Modulus(usize),
    /// Some fiber's section never splits below the witness node.
    Degenerate { fiber: String, node: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingEntry {
    pub element: String,
    pub outcome: SplittingOutcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct OpennessEntry {
    pub element: String,
    /// Minimal determining modulus; always ≤ depth.
    pub modulus: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AmalgamFailure {
    pub xi: Vec<String>,
    pub eta: Vec<String>,
    /// Point of `X|ξ`, rendered.
    pub x: String,
    /// Point of `X|η` agreeing with `x` on ξ∩η whose union is missing.
    pub y: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    /// The splitting budget the report was checked against.
    pub budget: usize,
    pub nonempty: bool,
    pub splitting: Vec<SplittingEntry>,
    pub openness: Vec<OpennessEntry>,
    pub amalgamation: Option<AmalgamFailure>,
    pub shrink: Option<ShrinkReport>,
}

impl ValidationReport {
    /// P-1..P-4 verdict at the report's splitting budget. The openness
    /// moduli are informational.
    pub fn passes(&self, budget: usize) -> bool {
        self.nonempty
            && self.amalgamation.is_none()
            && self.splitting.iter().all(|e| match e.outcome {
                SplittingOutcome::Modulus(k) => k <= budget,
                SplittingOutcome::Degenerate { .. } => false,
            })
    }

    pub fn ok(&self) -> bool {
        self.passes(self.budget)
    }

    /// Largest splitting modulus over the support, if no section degenerated.
    pub fn splitting_modulus(&self) -> Option<usize> {
        self.splitting
            .iter()
            .map(|e| match e.outcome {
                SplittingOutcome::Modulus(k) => Some(k),
                SplittingOutcome::Degenerate { .. } => None,
            })
            .try_fold(0usize, |acc, k| k.map(|k| acc.max(k)))
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("p1: {}", if self.nonempty { "pass" } else { "fail" })];
        for e in &self.splitting {
            match &e.outcome {
                SplittingOutcome::Modulus(k) => out.push(format!(
                    "p2[{}]: modulus {} (budget {}): {}",
                    e.element,
                    k,
                    self.budget,
                    if *k <= self.budget { "pass" } else { "fail" }
                )),
                SplittingOutcome::Degenerate { fiber, node } => out.push(format!(
                    "p2[{}]: degenerate (fiber {fiber:?}, node {node:?})",
                    e.element
                )),
            }
        }
        for e in &self.openness {
            out.push(format!("p3[{}]: modulus {}", e.element, e.modulus));
        }
        match &self.amalgamation {
            None => out.push("p4: pass".to_owned()),
            Some(w) => out.push(format!(
                "p4: fail (xi={:?}, eta={:?}, x={:?}, y={:?})",
                w.xi, w.eta, w.x, w.y
            )),
        }
        if let Some(shrink) = &self.shrink {
            out.push(format!("shrink: {}", if shrink.shrunk { "resolved" } else { "residual" }));
        }
        out
    }
}

/// Runs P-1..P-4. Failures are report entries, not errors.
pub fn validate(x: &TreeSystem, budget: usize) -> ValidationReport {
    let poset = x.support().poset();
    let mut splitting = Vec::new();
    let mut openness = Vec::new();
    for i in x.support().iter() {
        splitting.push(SplittingEntry {
            element: poset.name(i).to_owned(),
            outcome: splitting_outcome(x, i),
        });
        openness.push(OpennessEntry {
            element: poset.name(i).to_owned(),
            modulus: openness_modulus(x, i),
        });
    }
    ValidationReport {
        budget,
        nonempty: !x.is_empty(),
        splitting,
        openness,
        amalgamation: check_p4(x),
        shrink: None,
    }
}

/// [`validate`] plus a shrinkability run under the given schedule.
pub fn validate_with_shrink(
    x: &TreeSystem,
    budget: usize,
    schedule: &Schedule,
) -> Result<ValidationReport, PrecondError> {
    let mut report = validate(x, budget);
    report.shrink = Some(shrink_check(x, schedule)?);
    Ok(report)
}

/// Minimal splitting modulus of one section's prefix tree, or the shallowest
/// node with no splitting descendant reachable within the depth.
fn section_modulus(section: &SectionTree) -> Result<usize, Word> {
    let n = section.depth();
    // nodes[d] = sorted prefixes of length d.
    let mut nodes: Vec<Vec<u32>> = Vec::with_capacity(n + 1);
    for d in 0..=n {
        let mut level: Vec<u32> = section.leaves().iter().map(|&l| l >> (n - d)).collect();
        level.sort_unstable();
        level.dedup();
        nodes.push(level);
    }
    // gap[d][idx] = levels down to the nearest splitting descendant.
    let mut gaps: Vec<Vec<Option<usize>>> = vec![Vec::new(); n + 1];
    gaps[n] = vec![None; nodes[n].len()];
    for d in (0..n).rev() {
        gaps[d] = nodes[d]
            .iter()
            .map(|&t| {
                let child0 = nodes[d + 1].binary_search(&(t << 1));
                let child1 = nodes[d + 1].binary_search(&(t << 1 | 1));
                match (child0, child1) {
                    (Ok(_), Ok(_)) => Some(0),
                    (Ok(c), Err(_)) | (Err(_), Ok(c)) => gaps[d + 1][c].map(|g| g + 1),
                    (Err(_), Err(_)) => unreachable!("prefix without child"),
                }
            })
            .collect();
    }
    // k is valid iff every node s with |s| ≤ N−k has gap(s) ≤ k; the minimal
    // valid k is one more than the largest obstruction min(N−|s|, gap(s)−1).
    let mut worst: i64 = -1;
    let mut witness: Option<(usize, u32)> = None;
    for d in 0..=n {
        for (idx, &t) in nodes[d].iter().enumerate() {
            let c = match gaps[d][idx] {
                Some(0) => -1,
                Some(g) => (n - d).min(g - 1) as i64,
                None => (n - d) as i64,
            };
            if c > worst {
                worst = c;
                witness = Some((d, t));
            }
        }
    }
    let k = (worst + 1) as usize;
    if k <= n {
        Ok(k)
    } else {
        let (d, t) = witness.expect("an obstruction exists when k > depth");
        Err(Word::new(d, t))
    }
}

fn splitting_outcome(x: &TreeSystem, element: ElemId) -> SplittingOutcome {
    let fibers = x
        .fibered_sections(element)
        .expect("element is in the support");
    let lower = x
        .support()
        .intersect_cone(element, crate::poset::ConeKind::Lt);
    let mut modulus = 0usize;
    for (z, leaves) in fibers {
        let section = SectionTree::new(x.depth(), leaves).expect("fiber is nonempty");
        match section_modulus(&section) {
            Ok(k) => modulus = modulus.max(k),
            Err(node) => {
                let fiber = ShadowPoint::new(lower.clone(), x.depth(), z)
                    .expect("projection fits")
                    .render();
                return SplittingOutcome::Degenerate {
                    fiber,
                    node: node.to_string(),
                };
            }
        }
    }
    SplittingOutcome::Modulus(modulus)
}

/// Truncates every coordinate block of a packed point to its first `d` bits.
fn truncate_packed(packed: u64, member_count: usize, depth: usize, d: usize) -> u64 {
    let mut key = 0u64;
    for k in 0..member_count {
        let block = packed >> ((member_count - 1 - k) * depth)
            & if depth == 0 { 0 } else { (1 << depth) - 1 };
        key = key << d | block >> (depth - d);
    }
    key
}

/// Minimal m such that, for every basic clopen [s], membership of a fiber in
/// `{x|<i : x ∈ X, x(i) ⊇ s}` depends only on the fiber's depth-min(N,
/// m(|s|+1)) truncation among fibers of `X|<i`.
fn openness_modulus(x: &TreeSystem, element: ElemId) -> usize {
    let n = x.depth();
    let member = x.member_index(element).expect("element is in the support");
    let lower = x
        .support()
        .intersect_cone(element, crate::poset::ConeKind::Lt);
    let proj = crate::shadow::Projector::new(x.support(), &lower, n).expect("sub-support");
    let mut fibers: Vec<u64> = x.points().iter().map(|&p| proj.apply(p)).collect();
    fibers.sort_unstable();
    fibers.dedup();
    let fiber_index = |z: u64| fibers.binary_search(&z).expect("fiber of a point");
    let m_members = lower.len();

    let determined_at = |hit: &[bool], d: usize| -> bool {
        let mut seen: HashMap<u64, bool> = HashMap::new();
        for (idx, &z) in fibers.iter().enumerate() {
            let key = truncate_packed(z, m_members, n, d);
            match seen.insert(key, hit[idx]) {
                Some(prev) if prev != hit[idx] => return false,
                _ => {}
            }
        }
        true
    };

    let mut needed = 0usize;
    for len in 0..=n {
        for s in Word::all_of_len(len) {
            let mut hit = vec![false; fibers.len()];
            for &p in x.points() {
                let block = Word::new(n, x.coord_block(p, member));
                if s.is_prefix_of(&block) {
                    hit[fiber_index(proj.apply(p))] = true;
                }
            }
            if hit.iter().all(|&h| h) || hit.iter().all(|&h| !h) {
                continue;
            }
            let mut m = needed;
            loop {
                let d = n.min(m * (len + 1));
                if determined_at(&hit, d) {
                    break;
                }
                m += 1;
            }
            needed = needed.max(m);
            if needed >= n {
                return n;
            }
        }
    }
    needed
}

/// Exhaustive P-4 scan over all pairs of initial segments of the support.
/// Returns the first failure witness in canonical order, if any.
pub fn check_p4(x: &TreeSystem) -> Option<AmalgamFailure> {
    let segs = crate::poset::initial_segments_within(x.support());
    for xi in &segs {
        let p = x.project(xi).expect("sub-support");
        for eta in &segs {
            if eta == xi {
                continue;
            }
            let q = x.project(eta).expect("sub-support");
            let union = xi.union(eta);
            let both = x.project(&union).expect("sub-support");
            let inter = xi.intersect(eta);
            let proj_p = crate::shadow::Projector::new(xi, &inter, x.depth()).unwrap();
            let proj_q = crate::shadow::Projector::new(eta, &inter, x.depth()).unwrap();
            let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
            for (idx, &y) in q.points().iter().enumerate() {
                buckets.entry(proj_q.apply(y)).or_default().push(idx);
            }
            for &px in p.points() {
                let Some(ys) = buckets.get(&proj_p.apply(px)) else {
                    continue;
                };
                let xp = ShadowPoint::new(xi.clone(), x.depth(), px).unwrap();
                for &yi in ys {
                    let yp = q.point(yi);
                    let glued = xp.glue(&yp).expect("agreement on the overlap");
                    if !both.contains(glued.packed()) {
                        return Some(AmalgamFailure {
                            xi: xi.names(),
                            eta: eta.names(),
                            x: xp.render(),
                            y: yp.render(),
                        });
                    }
                }
            }
        }
    }
    None
}

/// Replays a P-4 witness: true iff the witnessed union is indeed missing.
pub fn p4_witness_fails(x: &TreeSystem, w: &AmalgamFailure) -> Result<bool, PrecondError> {
    let poset = x.support().poset();
    let xi = Segment::from_names(poset, &w.xi.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    let eta = Segment::from_names(poset, &w.eta.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    let xp = ShadowPoint::parse(&xi, x.depth(), &w.x)?;
    let yp = ShadowPoint::parse(&eta, x.depth(), &w.y)?;
    let in_xi = x.project(&xi)?.contains(xp.packed());
    let in_eta = x.project(&eta)?.contains(yp.packed());
    let glued = xp.glue(&yp)?;
    let missing = !x.project(&xi.union(&eta))?.contains(glued.packed());
    Ok(in_xi && in_eta && missing)
}

/// Per-fiber stems of the sections at `element`. Errors if any fiber's
/// section is degenerate.
fn fiber_stems(
    x: &TreeSystem,
    element: ElemId,
) -> Result<HashMap<u64, usize>, PrecondError> {
    let fibers = x.fibered_sections(element)?;
    let lower = x
        .support()
        .intersect_cone(element, crate::poset::ConeKind::Lt);
    let mut stems = HashMap::with_capacity(fibers.len());
    for (z, leaves) in fibers {
        let section = SectionTree::new(x.depth(), leaves)?;
        let (_, stem) = section.root_stem().map_err(|_| {
            PrecondError::DegenerateSection {
                element: x.support().poset().name(element).to_owned(),
                fiber: ShadowPoint::new(lower.clone(), x.depth(), z)
                    .expect("projection fits")
                    .render(),
            }
        })?;
        stems.insert(z, stem);
    }
    Ok(stems)
}

/// `Spl(X,i,e) = {x ∈ X : x(i) ∈ Spl(D_{X,x|<i}(i), e)}`: per-fiber stem
/// filtering. Every fiber must split (no degenerate sections).
pub fn spl(x: &TreeSystem, element: ElemId, e: bool) -> Result<TreeSystem, PrecondError> {
    let member = x.member_index(element)?;
    let stems = fiber_stems(x, element)?;
    let lower = x
        .support()
        .intersect_cone(element, crate::poset::ConeKind::Lt);
    let proj = crate::shadow::Projector::new(x.support(), &lower, x.depth())?;
    let n = x.depth();
    let points: Vec<u64> = x
        .points()
        .iter()
        .copied()
        .filter(|&p| {
            let stem = stems[&proj.apply(p)];
            let block = x.coord_block(p, member);
            (block >> (n - 1 - stem)) & 1 == e as u32
        })
        .collect();
    debug_assert!(!points.is_empty());
    Ok(TreeSystem::new(x.support().clone(), n, points)?)
}

/// The exact depth-N shadow of the infinite splitting: fibers whose section
/// still branches visibly are filtered at their stem; fully pinned fibers
/// pass through whole, because their split happens below the stored depth.
/// Used by the search walks, whose infinite counterparts never degenerate;
/// the condition-building [`spl`] stays strict.
pub fn spl_shadow(x: &TreeSystem, element: ElemId, e: bool) -> Result<TreeSystem, PrecondError> {
    let member = x.member_index(element)?;
    let lower = x
        .support()
        .intersect_cone(element, crate::poset::ConeKind::Lt);
    let proj = crate::shadow::Projector::new(x.support(), &lower, x.depth())?;
    let mut stems: HashMap<u64, Option<usize>> = HashMap::new();
    for (z, leaves) in x.fibered_sections(element)? {
        let section = SectionTree::new(x.depth(), leaves)?;
        stems.insert(z, section.root_stem().ok().map(|(_, stem)| stem));
    }
    let n = x.depth();
    let points: Vec<u64> = x
        .points()
        .iter()
        .copied()
        .filter(|&p| match stems[&proj.apply(p)] {
            Some(stem) => (x.coord_block(p, member) >> (n - 1 - stem)) & 1 == e as u32,
            None => true,
        })
        .collect();
    Ok(TreeSystem::new(x.support().clone(), n, points)?)
}

/// `X|ξ` for an initial ξ ⊆ support; preserves P-1..P-4.
pub fn restrict(x: &TreeSystem, xi: &Segment) -> Result<TreeSystem, PrecondError> {
    if !xi.is_subset_of(x.support()) {
        return Err(PrecondError::SegmentNotInSupport);
    }
    Ok(x.project(xi)?)
}

/// `Z = X ∩ (Y|⁻¹ζ) = {x ∈ X : x|ξ ∈ Y}` where ξ = support of `Y`.
/// Requires `Y ⊆ X|ξ`; then `Z|ξ = Y` exactly.
pub fn amalgam(x: &TreeSystem, y: &TreeSystem) -> Result<TreeSystem, PrecondError> {
    let xi = y.support();
    if !xi.is_subset_of(x.support()) || y.depth() != x.depth() {
        return Err(PrecondError::SegmentNotInSupport);
    }
    let projected = x.project(xi)?;
    if !y.is_subset_of(&projected) {
        return Err(PrecondError::SubsetViolation);
    }
    let proj = crate::shadow::Projector::new(x.support(), xi, x.depth())?;
    let points: Vec<u64> = x
        .points()
        .iter()
        .copied()
        .filter(|&p| y.contains(proj.apply(p)))
        .collect();
    debug_assert!(!points.is_empty());
    Ok(TreeSystem::new(x.support().clone(), x.depth(), points)?)
}

fn check_schedule(x: &TreeSystem, schedule: &Schedule) -> Result<(), PrecondError> {
    if schedule.support() != x.support() {
        return Err(PrecondError::ScheduleMismatch);
    }
    Ok(())
}

/// `X_Φ[u]` by left-to-right folding; `X_Φ[Λ] = X`.
pub fn iterate_spl(
    x: &TreeSystem,
    schedule: &Schedule,
    u: &Word,
) -> Result<TreeSystem, PrecondError> {
    check_schedule(x, schedule)?;
    let mut cur = x.clone();
    for step in 0..u.len() {
        let element = schedule.value(step)?;
        cur = spl(&cur, element, u.bit(step)).map_err(|err| match err {
            PrecondError::DegenerateSection { element, .. } => {
                PrecondError::DegenerateAtStep { step, element }
            }
            other => other,
        })?;
    }
    Ok(cur)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub enum BranchResult {
    /// The branch reached the horizon (or pinned to a single stored point
    /// earlier; splitting below the stored depth is invisible).
    Residual {
        size: usize,
        /// Per support element, the common-prefix depth of the residual's
        /// coordinate strings.
        pinned: Vec<(String, usize)>,
    },
    /// A section degenerated while the cell still had ≥ 2 points.
    Degenerate { step: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchOutcome {
    pub branch: String,
    pub result: BranchResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkReport {
    pub branches: Vec<BranchOutcome>,
    /// True iff every branch reaches a single stored point.
    pub shrunk: bool,
}

impl ShrinkReport {
    pub fn max_residual(&self) -> usize {
        self.branches
            .iter()
            .map(|b| match b.result {
                BranchResult::Residual { size, .. } => size,
                BranchResult::Degenerate { .. } => usize::MAX,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn residuals(&self) -> Option<Vec<usize>> {
        self.branches
            .iter()
            .map(|b| match b.result {
                BranchResult::Residual { size, .. } => Some(size),
                BranchResult::Degenerate { .. } => None,
            })
            .collect()
    }
}

fn pinned_depths(cell: &TreeSystem) -> Vec<(String, usize)> {
    let poset = cell.support().poset();
    cell.support()
        .iter()
        .enumerate()
        .map(|(k, element)| {
            let mut blocks = cell.points().iter().map(|&p| cell.coord_block(p, k));
            let first = Word::new(cell.depth(), blocks.next().expect("nonempty"));
            let lcp = blocks.fold(first, |acc, b| {
                acc.common_prefix(&Word::new(cell.depth(), b))
            });
            (poset.name(element).to_owned(), lcp.len())
        })
        .collect()
}

/// Folds every splitting branch of the schedule, reporting the residual size
/// and pinned depth per coordinate (or the step at which a section
/// degenerated). A branch stops early once its cell is a single point.
pub fn shrink_check(x: &TreeSystem, schedule: &Schedule) -> Result<ShrinkReport, PrecondError> {
    check_schedule(x, schedule)?;
    let mut branches = Vec::new();
    walk_branches(x, schedule, 0, Word::empty(), &mut branches)?;
    let shrunk = branches.iter().all(|b| {
        matches!(b.result, BranchResult::Residual { size: 1, .. })
    });
    Ok(ShrinkReport { branches, shrunk })
}

fn walk_branches(
    cell: &TreeSystem,
    schedule: &Schedule,
    step: usize,
    branch: Word,
    out: &mut Vec<BranchOutcome>,
) -> Result<(), PrecondError> {
    if step == schedule.horizon() || cell.len() == 1 {
        out.push(BranchOutcome {
            branch: branch.to_string(),
            result: BranchResult::Residual {
                size: cell.len(),
                pinned: pinned_depths(cell),
            },
        });
        return Ok(());
    }
    let element = schedule.value(step)?;
    match fiber_stems(cell, element) {
        Err(PrecondError::DegenerateSection { .. }) => {
            out.push(BranchOutcome {
                branch: branch.to_string(),
                result: BranchResult::Degenerate { step },
            });
            Ok(())
        }
        Err(other) => Err(other),
        Ok(_) => {
            for e in [false, true] {
                let next = spl(cell, element, e)?;
                walk_branches(&next, schedule, step + 1, branch.push(e), out)?;
            }
            Ok(())
        }
    }
}

/// Walks the splitting branch of `anchor` until the cell lies inside the
/// predicate; returns the minimal such address and its cell. The walk uses
/// the exact-shadow splitting ([`spl_shadow`]): a coordinate pinned on the
/// anchor's fiber splits below the stored depth, so the step keeps the fiber
/// and takes the canonical 0 direction.
pub(crate) fn locate_with<F: Fn(u64) -> bool>(
    x: &TreeSystem,
    schedule: &Schedule,
    anchor: u64,
    pred: F,
) -> Result<(Word, TreeSystem), PrecondError> {
    check_schedule(x, schedule)?;
    if !x.contains(anchor) {
        return Err(PrecondError::PointNotInCondition);
    }
    if !pred(anchor) {
        return Err(PrecondError::PredicateExcludesPoint);
    }
    let mut cur = x.clone();
    let mut addr = Word::empty();
    loop {
        if cur.points().iter().all(|&p| pred(p)) {
            return Ok((addr, cur));
        }
        if addr.len() == schedule.horizon() {
            return Err(PrecondError::BudgetExhausted {
                horizon: schedule.horizon(),
            });
        }
        let element = schedule.value(addr.len())?;
        let member = cur.member_index(element)?;
        let lower = cur
            .support()
            .intersect_cone(element, crate::poset::ConeKind::Lt);
        let proj = crate::shadow::Projector::new(cur.support(), &lower, cur.depth())?;
        let anchor_fiber = proj.apply(anchor);
        let anchor_section = cur
            .fibered_sections(element)?
            .into_iter()
            .find(|(z, _)| *z == anchor_fiber)
            .map(|(_, leaves)| leaves)
            .expect("anchor lies in the cell");
        let e = if anchor_section.len() >= 2 {
            let stem = SectionTree::new(cur.depth(), anchor_section)?
                .root_stem()
                .expect("section has two leaves")
                .1;
            (cur.coord_block(anchor, member) >> (cur.depth() - 1 - stem)) & 1 == 1
        } else {
            false
        };
        cur = spl_shadow(&cur, element, e)?;
        addr = addr.push(e);
    }
}

/// Minimal-length u with `x0 ∈ X_Φ[u]` and `X_Φ[u] ⊆ U` (Prop. clop at
/// finite depth). Requires `x0 ∈ X` and `U(x0)`.
pub fn locate_clopen(
    x: &TreeSystem,
    schedule: &Schedule,
    x0: &ShadowPoint,
    u: &Clopen,
) -> Result<Word, PrecondError> {
    if x0.support() != x.support() || x0.depth() != x.depth() {
        return Err(PrecondError::PointNotInCondition);
    }
    let pred = u.compile(x.support(), x.depth())?;
    locate_with(x, schedule, x0.packed(), |p| pred.eval(p)).map(|(addr, _)| addr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Inside,
    Outside,
}

/// Finds `Y ⊆ X` with `Y ⊆ C` or `Y ∩ C = ∅` (clopen case of the
/// Borel-decision corollary). Prefers the inside witness: localizes around
/// the least point of `X ∩ C`, falling back to the outside route.
pub fn decide_clopen(
    x: &TreeSystem,
    schedule: &Schedule,
    c: &Clopen,
) -> Result<(TreeSystem, Side), PrecondError> {
    let pred = c.compile(x.support(), x.depth())?;
    if pred.holds_on_all(x) {
        return Ok((x.clone(), Side::Inside));
    }
    if pred.misses_all(x) {
        return Ok((x.clone(), Side::Outside));
    }
    let inside_anchor = x
        .points()
        .iter()
        .copied()
        .find(|&p| pred.eval(p))
        .expect("some point satisfies the predicate");
    match locate_with(x, schedule, inside_anchor, |p| pred.eval(p)) {
        Ok((_, cell)) => Ok((cell, Side::Inside)),
        Err(PrecondError::BudgetExhausted { .. }) => {
            let outside_anchor = x
                .points()
                .iter()
                .copied()
                .find(|&p| !pred.eval(p))
                .expect("some point misses the predicate");
            let (_, cell) = locate_with(x, schedule, outside_anchor, |p| !pred.eval(p))?;
            Ok((cell, Side::Outside))
        }
        Err(other) => Err(other),
    }
}

/// Iterated clopen decisions: the finite-level Borel scheme convenience loop.
pub fn decide_all(
    x: &TreeSystem,
    schedule: &Schedule,
    preds: &[Clopen],
) -> Result<TreeSystem, PrecondError> {
    let mut cur = x.clone();
    for c in preds {
        let (next, _) = decide_clopen(&cur, schedule, c)?;
        cur = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::{ConeKind, FinitePoset};
    use std::sync::Arc;

    fn full_support_cube(poset: &Arc<FinitePoset>, depth: usize) -> TreeSystem {
        TreeSystem::full_cube(Segment::full(poset), depth).unwrap()
    }

    #[test]
    fn full_cube_validates_with_expected_moduli() {
        let poset = FinitePoset::chain(&["p", "q"]);
        let cube = full_support_cube(&poset, 3);
        let report = validate(&cube, 1);
        assert!(report.passes(1));
        assert_eq!(report.splitting_modulus(), Some(1));
        assert!(report.openness.iter().all(|e| e.modulus == 0));
    }

    #[test]
    fn diagonal_over_antichain_fails_p4() {
        // Points with x(a) = x(b) bitwise.
        let poset = FinitePoset::antichain(&["a", "b"]);
        let support = Segment::full(&poset);
        let n = 2;
        let points: Vec<u64> = (0..1u64 << n).map(|b| b << n | b).collect();
        let sys = TreeSystem::new(support, n, points).unwrap();
        let report = validate(&sys, n);
        let w = report.amalgamation.as_ref().expect("P-4 must fail");
        assert_eq!(w.xi, vec!["a".to_owned()]);
        assert_eq!(w.eta, vec!["b".to_owned()]);
        assert!(p4_witness_fails(&sys, w).unwrap());
        assert!(!report.passes(n));
    }

    #[test]
    fn degenerate_sections_are_reported_with_replayable_witnesses() {
        // q is pinned to 00 over every p-fiber
        let poset = FinitePoset::chain(&["p", "q"]);
        let support = Segment::full(&poset);
        let points: Vec<u64> = (0..4u64).map(|p| p << 2).collect();
        let sys = TreeSystem::new(support.clone(), 2, points).unwrap();
        let report = validate(&sys, 2);
        assert!(!report.passes(2));
        let q_entry = report
            .splitting
            .iter()
            .find(|e| e.element == "q")
            .unwrap();
        match &q_entry.outcome {
            SplittingOutcome::Degenerate { fiber, node } => {
                // replay: the witnessed fiber's section never splits below
                // the witness node
                let lower = support.intersect_cone(1, crate::poset::ConeKind::Lt);
                let z = ShadowPoint::parse(&lower, 2, fiber).unwrap();
                let section = sys.section(1, &z).unwrap();
                let node: Word = node.parse().unwrap();
                assert!(section
                    .leaf_words()
                    .filter(|w| node.is_prefix_of(w))
                    .count() <= 1);
            }
            other => panic!("expected a degenerate witness, got {other:?}"),
        }
    }

    #[test]
    fn spl_on_full_cube_keeps_first_bit() {
        let poset = FinitePoset::antichain(&["p"]);
        let cube = full_support_cube(&poset, 2);
        let one = spl(&cube, 0, true).unwrap();
        assert_eq!(one.points(), &[0b10, 0b11]);
        let report = validate(&one, 2);
        assert!(report.passes(2));
    }

    #[test]
    fn split_cube_projects_and_sections_as_filtered() {
        let poset = FinitePoset::chain(&["p", "q"]);
        let cube = full_support_cube(&poset, 2);
        let p = poset.elem("p").unwrap();
        let q = poset.elem("q").unwrap();
        // Spl at p projected to {p} keeps exactly the strings starting 0
        let zero = spl(&cube, p, false).unwrap();
        let p_only = Segment::from_names(&poset, &["p"]).unwrap();
        let projected = zero.project(&p_only).unwrap();
        assert_eq!(projected.points(), &[0b00, 0b01]);
        // sections of Spl at q hold the strings with first bit 1
        let one = spl(&cube, q, true).unwrap();
        let lower = one.support().intersect_cone(q, ConeKind::Lt);
        let z = crate::shadow::ShadowPoint::new(lower, 2, 0b01).unwrap();
        assert_eq!(one.section(q, &z).unwrap().leaves(), &[0b10, 0b11]);
    }

    #[test]
    fn split_deep_cube_stays_valid() {
        let poset = FinitePoset::chain(&["p", "q"]);
        let cube = full_support_cube(&poset, 3);
        let q = poset.elem("q").unwrap();
        let split = spl(&cube, q, false).unwrap();
        assert!(validate(&split, 3).passes(3));
    }

    #[test]
    fn spl_filters_composed() {
        let poset = FinitePoset::chain(&["p", "q"]);
        let cube = full_support_cube(&poset, 3);
        let once = spl(&cube, 0, false).unwrap();
        let twice = spl(&once, 0, false).unwrap();
        assert!(twice.is_subset_of(&once));
    }

    // Lemma-shaped identities: splitting does not move the ≱i projection and
    // separates the ≤i projections.
    #[test]
    fn spl_projection_identities() {
        let poset = FinitePoset::chain(&["p", "q", "r"]);
        let cube = full_support_cube(&poset, 2);
        for i in 0..3 {
            let zero = spl(&cube, i, false).unwrap();
            let one = spl(&cube, i, true).unwrap();
            let keep = cube.support().intersect_cone(i, ConeKind::NotGe);
            assert_eq!(
                zero.project(&keep).unwrap(),
                cube.project(&keep).unwrap()
            );
            assert_eq!(one.project(&keep).unwrap(), cube.project(&keep).unwrap());
            let le = cube.support().intersect_cone(i, ConeKind::Le);
            let a = zero.project(&le).unwrap();
            let b = one.project(&le).unwrap();
            assert!(a.points().iter().all(|p| !b.contains(*p)));
        }
    }

    #[test]
    fn restrict_cases() {
        let poset = FinitePoset::chain(&["p", "q"]);
        let cube = full_support_cube(&poset, 2);
        assert_eq!(restrict(&cube, cube.support()).unwrap(), cube);
        let empty = Segment::empty(&poset);
        let trivial = restrict(&cube, &empty).unwrap();
        assert_eq!(trivial.len(), 1);
        let split = spl(&cube, 1, false).unwrap();
        let p_only = Segment::from_names(&poset, &["p"]).unwrap();
        let restricted = restrict(&split, &p_only).unwrap();
        assert!(validate(&restricted, 2).passes(2));
    }

    #[test]
    fn amalgam_identity_and_fiber() {
        let poset = FinitePoset::chain(&["p", "q"]);
        let cube = full_support_cube(&poset, 2);
        let p_only = Segment::from_names(&poset, &["p"]).unwrap();
        let projected = restrict(&cube, &p_only).unwrap();
        // Y = X|ξ → Z = X
        assert_eq!(amalgam(&cube, &projected).unwrap(), cube);
        // single point of X|ξ → the fiber over it
        let y = TreeSystem::new(p_only.clone(), 2, vec![0b01]).unwrap();
        let fiber = amalgam(&cube, &y).unwrap();
        assert_eq!(fiber.len(), 4);
        assert_eq!(restrict(&fiber, &p_only).unwrap(), y);
        // subset violation
        let stranger = TreeSystem::new(p_only, 2, vec![0b01, 0b10]).unwrap();
        let small = spl(&cube, 0, false).unwrap();
        assert!(matches!(
            amalgam(&small, &stranger),
            Err(PrecondError::SubsetViolation)
        ));
    }

    // Lemma pro' as an identity on small fixtures: for Z = amalgam(X, Y) and
    // an initial ξ, Z|ξ = X|ξ ∩ {z : z|ξ∩η ∈ Y|ξ∩η}.
    #[test]
    fn amalgam_projection_identity() {
        let poset = FinitePoset::antichain(&["a", "b"]);
        let cube = full_support_cube(&poset, 2);
        let eta = Segment::from_names(&poset, &["b"]).unwrap();
        let y = spl(&restrict(&cube, &eta).unwrap(), 1, true).unwrap();
        let z = amalgam(&cube, &y).unwrap();
        for xi in crate::poset::all_initial_segments(&poset).unwrap() {
            let inter = xi.intersect(&eta);
            let y_inter = y.project(&inter).unwrap();
            let lhs = z.project(&xi).unwrap();
            let x_xi = cube.project(&xi).unwrap();
            let proj = crate::shadow::Projector::new(&xi, &inter, 2).unwrap();
            let rhs: Vec<u64> = x_xi
                .points()
                .iter()
                .copied()
                .filter(|&p| y_inter.contains(proj.apply(p)))
                .collect();
            assert_eq!(lhs.points(), rhs.as_slice());
        }
    }

    #[test]
    fn iterate_spl_cases() {
        let poset = FinitePoset::antichain(&["a", "b"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::new(Segment::full(&poset), vec![0, 1], 1).unwrap();
        // u = Λ → X
        assert_eq!(iterate_spl(&cube, &sched, &Word::empty()).unwrap(), cube);
        // Φ=(a,b), u=10 → x(a)(0)=1, x(b)(0)=0
        let cell = iterate_spl(&cube, &sched, &"10".parse().unwrap()).unwrap();
        assert!(cell
            .iter_points()
            .all(|x| x.coord(0).unwrap().bit(0) && !x.coord(1).unwrap().bit(0)));
        // partition at order 2
        let mut seen = Vec::new();
        for u in Word::all_of_len(2) {
            let c = iterate_spl(&cube, &sched, &u).unwrap();
            seen.extend_from_slice(c.points());
        }
        seen.sort_unstable();
        assert_eq!(seen, cube.points());
    }

    #[test]
    fn shrink_full_cube_under_fair_schedule() {
        let poset = FinitePoset::antichain(&["a", "b"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::fair_round_robin(Segment::full(&poset), 2);
        let report = shrink_check(&cube, &sched).unwrap();
        assert!(report.shrunk);
        assert_eq!(report.residuals().unwrap(), vec![1; 16]);
    }

    #[test]
    fn shrink_empty_schedule_keeps_everything() {
        let poset = FinitePoset::antichain(&["a"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::new(Segment::full(&poset), vec![], 0).unwrap();
        let report = shrink_check(&cube, &sched).unwrap();
        assert_eq!(report.branches.len(), 1);
        assert_eq!(report.max_residual(), cube.len());
    }

    // Truncated analog of the non-shrinkable two-class set: splits that
    // avoid the minimal element can never separate the classes.
    #[test]
    fn shrink_two_class_set_avoiding_minimal_keeps_two_points() {
        let poset = FinitePoset::chain(&["p", "q", "r"]);
        let support = Segment::full(&poset);
        let n = 2;
        let mut points = Vec::new();
        for p in 0..1u64 << n {
            for q in 0..1u64 << n {
                for r in 0..1u64 << n {
                    let b = p >> (n - 1);
                    if q >> (n - 1) == b && r >> (n - 1) == b {
                        points.push(p << (2 * n) | q << n | r);
                    }
                }
            }
        }
        let sys = TreeSystem::new(support.clone(), n, points).unwrap();
        assert!(validate(&sys, n).passes(n));
        // schedule over q, r only (omit the minimal p); values q,r once each:
        // every split pins the one free tail bit of q resp. r.
        let q = poset.elem("q").unwrap();
        let r = poset.elem("r").unwrap();
        let sched = Schedule::new(support, vec![q, r], 0).unwrap();
        let report = shrink_check(&sys, &sched).unwrap();
        assert!(!report.shrunk);
        for b in &report.branches {
            match &b.result {
                BranchResult::Residual { size, .. } => assert!(*size >= 2),
                BranchResult::Degenerate { .. } => panic!("no degeneracy expected"),
            }
        }
    }

    #[test]
    fn locate_clopen_cases() {
        let poset = FinitePoset::antichain(&["a", "b"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::fair_round_robin(Segment::full(&poset), 2);
        let x0 = ShadowPoint::new(Segment::full(&poset), 2, 0b10_00).unwrap();
        // U = everything → Λ
        let u = locate_clopen(&cube, &sched, &x0, &Clopen::everything()).unwrap();
        assert!(u.is_empty());
        // U = {x(a)(0)=1}, Φ(0)=a → (1)
        let u = locate_clopen(&cube, &sched, &x0, &Clopen::atom("a", "1")).unwrap();
        assert_eq!(u.to_string(), "1");
        // U excluding x0 → precondition error
        assert!(matches!(
            locate_clopen(&cube, &sched, &x0, &Clopen::atom("a", "0")),
            Err(PrecondError::PredicateExcludesPoint)
        ));
    }

    #[test]
    fn decide_all_localizes_every_predicate() {
        let poset = FinitePoset::antichain(&["a", "b"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::fair_round_robin(Segment::full(&poset), 2);
        let preds = [Clopen::atom("a", "1"), Clopen::atom("b", "0")];
        let y = decide_all(&cube, &sched, &preds).unwrap();
        for c in &preds {
            let compiled = c.compile(y.support(), y.depth()).unwrap();
            assert!(compiled.holds_on_all(&y) || compiled.misses_all(&y));
        }
    }

    #[test]
    fn validate_with_shrink_attaches_the_report() {
        let poset = FinitePoset::antichain(&["a"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::fair_round_robin(Segment::full(&poset), 2);
        let report = validate_with_shrink(&cube, 1, &sched).unwrap();
        assert!(report.ok());
        assert!(report.shrink.as_ref().unwrap().shrunk);
    }

    #[test]
    fn decide_clopen_cases() {
        let poset = FinitePoset::antichain(&["a", "b"]);
        let cube = full_support_cube(&poset, 2);
        let sched = Schedule::fair_round_robin(Segment::full(&poset), 2);
        let (y, side) = decide_clopen(&cube, &sched, &Clopen::everything()).unwrap();
        assert_eq!((y.len(), side), (cube.len(), Side::Inside));
        let absurd = Clopen::everything().not();
        let (y, side) = decide_clopen(&cube, &sched, &absurd).unwrap();
        assert_eq!((y.len(), side), (cube.len(), Side::Outside));
        let half = Clopen::atom("a", "1");
        let (y, side) = decide_clopen(&cube, &sched, &half).unwrap();
        assert_eq!(side, Side::Inside);
        assert_eq!(y, spl(&cube, 0, true).unwrap());
        assert!(validate(&y, 2).passes(2));
    }
}
