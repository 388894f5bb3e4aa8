//! The canonical cell correspondence between two conditions over the same
//! support: matched splitting cells X_Φ[u] ↔ Y_Φ[u], the induced point map
//! on resolved cells, the projection-compatibility laws, and the
//! one-dimensional transfer f_PQ with its image-commutation claim.
//!
//! Cells are folded with singleton absorption: once a cell is a single
//! stored point, all further splitting happens below the visible depth and
//! the depth-N shadow stays that point. A section that degenerates while its
//! cell still has ≥ 2 points is a hard error.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bits::Word;
use crate::poset::{initial_segments_within, ConeKind, PosetError, Schedule, Segment};
use crate::precond::{self, PrecondError};
use crate::shadow::{SectionTree, ShadowError, TreeSystem};

#[derive(Debug, Error)]
pub enum HomeoError {
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error("source and target have different supports or depths")]
    ShapeMismatch,
    #[error("the restrictions to the segment differ, h2 does not apply")]
    ProjectionMismatch,
    #[error("the correspondence is not resolved on every cell")]
    NotFullyResolved,
    #[error("point is not a resolved source point")]
    UnmatchedPoint,
    #[error("not a subtree: leaves are not contained in the host tree")]
    NotASubtree,
    #[error("depth exhausted before the splitting addresses resolve")]
    DepthExhausted,
}

/// The matched-cell correspondence between two conditions.
#[derive(Clone, Debug)]
pub struct CellHomeo {
    schedule: Schedule,
    order: usize,
    source: TreeSystem,
    target: TreeSystem,
    pairs: BTreeMap<Word, (TreeSystem, TreeSystem)>,
    point_map: BTreeMap<Word, (u64, u64)>,
}

fn descend(cell: &TreeSystem, element: crate::poset::ElemId, e: bool) -> Result<TreeSystem, PrecondError> {
    if cell.len() == 1 {
        return Ok(cell.clone());
    }
    precond::spl(cell, element, e)
}

/// Builds the order-M correspondence u ↦ (X_Φ[u], Y_Φ[u]) with the point map
/// F(x_u) = y_u on cells resolved on both sides.
pub fn build_homeo(
    x: &TreeSystem,
    y: &TreeSystem,
    schedule: &Schedule,
    order: usize,
) -> Result<CellHomeo, HomeoError> {
    if !x.same_shape(y) || schedule.support() != x.support() {
        return Err(HomeoError::ShapeMismatch);
    }
    let mut level: Vec<(Word, TreeSystem, TreeSystem)> =
        vec![(Word::empty(), x.clone(), y.clone())];
    let mut pairs = BTreeMap::new();
    for m in 0..order {
        let element = schedule.value(m)?;
        let mut next = Vec::with_capacity(level.len() * 2);
        for (u, cx, cy) in &level {
            for e in [false, true] {
                next.push((u.push(e), descend(cx, element, e)?, descend(cy, element, e)?));
            }
        }
        level = next;
    }
    for (u, cx, cy) in level {
        pairs.insert(u, (cx, cy));
    }
    // Branches that resolved early on one side collapse to the same visible
    // point; their pairing below the stored depth is invisible, so only
    // uniquely resolved branches enter the point map (keeps it bijective).
    let singletons: Vec<(Word, u64, u64)> = pairs
        .iter()
        .filter(|(_, (cx, cy))| cx.len() == 1 && cy.len() == 1)
        .map(|(u, (cx, cy))| (*u, cx.points()[0], cy.points()[0]))
        .collect();
    let count = |pick: fn(&(Word, u64, u64)) -> u64, value: u64| {
        singletons.iter().filter(|e| pick(e) == value).count()
    };
    let point_map = singletons
        .iter()
        .filter(|&&(_, x, y)| count(|e| e.1, x) == 1 && count(|e| e.2, y) == 1)
        .map(|&(u, x, y)| (u, (x, y)))
        .collect();
    Ok(CellHomeo {
        schedule: schedule.clone(),
        order,
        source: x.clone(),
        target: y.clone(),
        pairs,
        point_map,
    })
}

impl CellHomeo {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn source(&self) -> &TreeSystem {
        &self.source
    }

    pub fn target(&self) -> &TreeSystem {
        &self.target
    }

    pub fn pairs(&self) -> &BTreeMap<Word, (TreeSystem, TreeSystem)> {
        &self.pairs
    }

    /// Branches whose cells are singletons on both sides, with their points.
    pub fn point_map(&self) -> &BTreeMap<Word, (u64, u64)> {
        &self.point_map
    }

    pub fn fully_resolved(&self) -> bool {
        self.point_map.len() == self.pairs.len()
    }

    /// h1 on resolved points: x_a|ξ = x_b|ξ iff y_a|ξ = y_b|ξ, for every
    /// initial ξ of the support. Exhaustive.
    pub fn check_h1(&self) -> Result<bool, HomeoError> {
        let n = self.source.depth();
        let resolved: Vec<&(u64, u64)> = self.point_map.values().collect();
        for xi in initial_segments_within(self.source.support()) {
            let proj = crate::shadow::Projector::new(self.source.support(), &xi, n)?;
            for &&(xa, ya) in &resolved {
                for &&(xb, yb) in &resolved {
                    let src_eq = proj.apply(xa) == proj.apply(xb);
                    let dst_eq = proj.apply(ya) == proj.apply(yb);
                    if src_eq != dst_eq {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// h2: when X|ξ = Y|ξ, matched cells (and hence resolved points) agree
    /// under projection to ξ. Checked cell-by-cell, which is the inductive
    /// claim behind the law. A violated precondition is reported distinctly.
    pub fn check_h2(&self, xi: &Segment) -> Result<bool, HomeoError> {
        if self.source.project(xi)? != self.target.project(xi)? {
            return Err(HomeoError::ProjectionMismatch);
        }
        for (cx, cy) in self.pairs.values() {
            if cx.project(xi)? != cy.project(xi)? {
                return Ok(false);
            }
        }
        let proj = crate::shadow::Projector::new(self.source.support(), xi, self.source.depth())?;
        Ok(self
            .point_map
            .values()
            .all(|&(x, y)| proj.apply(x) == proj.apply(y)))
    }

    /// Cell-level s-2/s-3 pattern identity: source cells and target cells
    /// have identical projection-equality patterns over every initial ξ and
    /// identical ≤i-disjointness patterns.
    pub fn cell_patterns_match(&self) -> Result<bool, HomeoError> {
        let segments = initial_segments_within(self.source.support());
        let keys: Vec<&Word> = self.pairs.keys().collect();
        for &u in &keys {
            for &v in &keys {
                let (xu, yu) = &self.pairs[u];
                let (xv, yv) = &self.pairs[v];
                for xi in &segments {
                    if (xu.project(xi)? == xv.project(xi)?) != (yu.project(xi)? == yv.project(xi)?)
                    {
                        return Ok(false);
                    }
                }
                for i in self.source.support().iter() {
                    let le = self.source.support().intersect_cone(i, ConeKind::Le);
                    let src_disjoint = {
                        let a = xu.project(&le)?;
                        let b = xv.project(&le)?;
                        a.points().iter().all(|p| !b.contains(*p))
                    };
                    let dst_disjoint = {
                        let a = yu.project(&le)?;
                        let b = yv.project(&le)?;
                        a.points().iter().all(|p| !b.contains(*p))
                    };
                    if src_disjoint != dst_disjoint {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Image of a sub-shadow under the point map. Requires full resolution.
    pub fn image_of(&self, sub: &TreeSystem) -> Result<TreeSystem, HomeoError> {
        if !self.fully_resolved() {
            return Err(HomeoError::NotFullyResolved);
        }
        let forward: BTreeMap<u64, u64> = self.point_map.values().copied().collect();
        let points = sub
            .points()
            .iter()
            .map(|p| forward.get(p).copied().ok_or(HomeoError::UnmatchedPoint))
            .collect::<Result<Vec<u64>, _>>()?;
        Ok(TreeSystem::new(
            self.target.support().clone(),
            self.target.depth(),
            points,
        )?)
    }
}

/// The two routes of the transfer claim, plus the maximal-s step on both
/// sides.
#[derive(Clone, Debug)]
pub struct TransferReport {
    /// f''(P'[u])
    pub image_of_cell: SectionTree,
    /// (f''P')[u]
    pub cell_of_image: SectionTree,
    pub max_s_source: Word,
    pub max_s_target: Word,
    /// The maximal-s walks stopped at a singleton host cell; beyond it the
    /// address extends below the visible depth.
    pub source_hit_wall: bool,
    pub target_hit_wall: bool,
}

impl TransferReport {
    pub fn holds(&self) -> bool {
        self.image_of_cell == self.cell_of_image
    }

    /// The maximal-s addresses agree as far as the visible depth permits:
    /// exactly when neither walk hit the wall, as prefixes otherwise.
    pub fn max_s_agrees(&self) -> bool {
        if !self.source_hit_wall && !self.target_hit_wall {
            self.max_s_source == self.max_s_target
        } else {
            self.max_s_source.is_prefix_of(&self.max_s_target)
                || self.max_s_target.is_prefix_of(&self.max_s_source)
        }
    }
}

/// Forward image under f_PQ of a set of P-leaves: each leaf's split address
/// in P names the matching cell of Q.
fn forward_image(
    p: &SectionTree,
    q: &SectionTree,
    leaves: &SectionTree,
) -> Result<SectionTree, HomeoError> {
    let mut out: Vec<u32> = Vec::new();
    for &leaf in leaves.leaves() {
        let addr = p.address_of(leaf).ok_or(HomeoError::NotASubtree)?;
        out.extend_from_slice(q.cell(&addr).leaves());
    }
    Ok(SectionTree::new(q.depth(), out)?)
}

/// Maximal s with `sub ⊆ host.cell(s)`; the walk stops at singleton host
/// cells (wall = true), beyond which s extends below the visible depth.
fn maximal_containing_address(host: &SectionTree, sub: &SectionTree) -> (Word, bool) {
    let mut s = Word::empty();
    let mut cell = host.clone();
    loop {
        if cell.len() == 1 {
            return (s, true);
        }
        let mut advanced = false;
        for e in [false, true] {
            let child = cell.spl(e).expect("non-singleton cell splits");
            if sub.is_subset_of(&child) {
                s = s.push(e);
                cell = child;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return (s, false);
        }
    }
}

/// `P'[u]` without absorption: splitting a cell that is already a single
/// leaf would happen below the visible depth, making the forward image of
/// the cell incomputable at this depth.
fn strict_cell(tree: &SectionTree, u: &Word) -> Result<SectionTree, HomeoError> {
    let mut cur = tree.clone();
    for e in u.bits_iter() {
        if cur.len() == 1 {
            return Err(HomeoError::DepthExhausted);
        }
        cur = cur.spl(e).expect("non-singleton cell splits");
    }
    Ok(cur)
}

/// Computes f_PQ''(P'[u]) and (f_PQ''P')[u] and the maximal-s step on both
/// sides. P and Q must have ≥ 2 leaves; P' must be a sub-shadow of P whose
/// splitting stays visible through `u`.
pub fn transfer_1d(
    p: &SectionTree,
    q: &SectionTree,
    p_sub: &SectionTree,
    u: &Word,
) -> Result<TransferReport, HomeoError> {
    if p.len() < 2 || q.len() < 2 {
        return Err(ShadowError::DegenerateSection.into());
    }
    if !p_sub.is_subset_of(p) {
        return Err(HomeoError::NotASubtree);
    }
    let sub_cell = strict_cell(p_sub, u)?;
    let image_of_cell = forward_image(p, q, &sub_cell)?;
    let q_sub = forward_image(p, q, p_sub)?;
    let cell_of_image = q_sub.cell(u);
    let (max_s_source, source_hit_wall) = maximal_containing_address(p, &sub_cell);
    let (max_s_target, target_hit_wall) = maximal_containing_address(q, &cell_of_image);
    Ok(TransferReport {
        image_of_cell,
        cell_of_image,
        max_s_source,
        max_s_target,
        source_hit_wall,
        target_hit_wall,
    })
}
