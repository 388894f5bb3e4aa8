//! Splitting systems (S-1..S-3), their refinement and level expansion, and
//! finite-order fusion with the generic-point cell map.
//!
//! A Φ-splitting system of order m is an indexed family ⟨X_u : u ∈ 2^{≤m}⟩
//! with nested splits (S-1), agreement on ξ[u,v] (S-2), and ≤i-disjointness
//! below dropped coordinates (S-3). Refinement re-matches the top level
//! around a shrunken member; expansion splits every top cell once. Fusion at
//! finite order returns the level-M cell union together with the per-level
//! pinned-depth profile, the finite stand-in for the S-4 diameter clause.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bits::Word;
use crate::poset::{ConeKind, PosetError, Schedule, Segment};
use crate::precond::{self, PrecondError};
use crate::shadow::{ShadowError, TreeSystem};

#[derive(Debug, Error)]
pub enum SplitSysError {
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error("family key {0:?} is missing")]
    MissingKey(String),
    #[error("family member {key:?} has a mismatched support or depth")]
    ShapeMismatch { key: String },
    #[error("refinement index must name a top-level cell of order {order}")]
    BadRefinementIndex { order: usize },
    #[error("replacement is not a subset of the named member")]
    SubsetViolation,
    #[error("system fails verification: {0}")]
    VerificationFailed(String),
}

/// One S-1/S-2/S-3 violation, replayable from the named cells.
#[derive(Clone, Debug, Serialize)]
pub struct SystemViolation {
    pub law: &'static str,
    pub u: String,
    pub v: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemReport {
    pub order: usize,
    pub violations: Vec<SystemViolation>,
}

impl SystemReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn lines(&self) -> Vec<String> {
        if self.ok() {
            return vec![format!("order {}: S-1 S-2 S-3 pass", self.order)];
        }
        self.violations
            .iter()
            .map(|v| format!("{} fail at u={:?} v={:?}: {}", v.law, v.u, v.v, v.detail))
            .collect()
    }
}

/// An indexed family ⟨X_u : u ∈ 2^{≤m}⟩ of tree systems over one support.
#[derive(Clone, Debug)]
pub struct SplittingSystem {
    schedule: Schedule,
    order: usize,
    family: BTreeMap<Word, TreeSystem>,
}

impl SplittingSystem {
    /// The canonical system X_u = X_Φ[u] for u ∈ 2^{≤order}.
    pub fn canonical(
        root: &TreeSystem,
        schedule: &Schedule,
        order: usize,
    ) -> Result<SplittingSystem, SplitSysError> {
        if schedule.support() != root.support() {
            return Err(PrecondError::ScheduleMismatch.into());
        }
        let mut family = BTreeMap::new();
        family.insert(Word::empty(), root.clone());
        for m in 0..order {
            let element = schedule.value(m)?;
            for u in Word::all_of_len(m) {
                let parent = family[&u].clone();
                for e in [false, true] {
                    family.insert(u.push(e), precond::spl(&parent, element, e)?);
                }
            }
        }
        Ok(SplittingSystem {
            schedule: schedule.clone(),
            order,
            family,
        })
    }

    /// Builds from an explicit family; checks the key set and shapes only
    /// (run [`SplittingSystem::verify`] for S-1..S-3).
    pub fn from_family(
        schedule: Schedule,
        order: usize,
        family: BTreeMap<Word, TreeSystem>,
    ) -> Result<SplittingSystem, SplitSysError> {
        for m in 0..=order {
            for u in Word::all_of_len(m) {
                let member = family
                    .get(&u)
                    .ok_or_else(|| SplitSysError::MissingKey(u.to_string()))?;
                if member.support() != schedule.support() {
                    return Err(SplitSysError::ShapeMismatch { key: u.to_string() });
                }
            }
        }
        let expected: usize = (0..=order).map(|m| 1usize << m).sum();
        if family.len() != expected {
            return Err(SplitSysError::BadRefinementIndex { order });
        }
        let depth = family[&Word::empty()].depth();
        if family.values().any(|s| s.depth() != depth) {
            return Err(SplitSysError::ShapeMismatch {
                key: "depth".to_owned(),
            });
        }
        Ok(SplittingSystem {
            schedule,
            order,
            family,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn support(&self) -> &Segment {
        self.schedule.support()
    }

    pub fn member(&self, u: &Word) -> Option<&TreeSystem> {
        self.family.get(u)
    }

    pub fn family(&self) -> &BTreeMap<Word, TreeSystem> {
        &self.family
    }

    pub fn root(&self) -> &TreeSystem {
        &self.family[&Word::empty()]
    }

    pub fn depth(&self) -> usize {
        self.root().depth()
    }

    /// Union of the top-level cells.
    pub fn level_union(&self) -> TreeSystem {
        let mut points = Vec::new();
        for u in Word::all_of_len(self.order) {
            points.extend_from_slice(self.family[&u].points());
        }
        TreeSystem::new(self.support().clone(), self.depth(), points).expect("cells are nonempty")
    }

    /// Exhaustive S-1/S-2/S-3 scan over all pairs and coordinates.
    pub fn verify(&self) -> Result<SystemReport, SplitSysError> {
        let mut violations = Vec::new();
        // S-1: X_{u^e} ⊆ Spl(X_u, Φ(n), e)
        for n in 0..self.order {
            let element = self.schedule.value(n)?;
            for u in Word::all_of_len(n) {
                for e in [false, true] {
                    let child = &self.family[&u.push(e)];
                    match precond::spl(&self.family[&u], element, e) {
                        Ok(split) => {
                            if !child.is_subset_of(&split) {
                                violations.push(SystemViolation {
                                    law: "S-1",
                                    u: u.to_string(),
                                    v: u.push(e).to_string(),
                                    detail: format!(
                                        "cell is not inside Spl(parent, {}, {})",
                                        self.support().poset().name(element),
                                        e as u8
                                    ),
                                });
                            }
                        }
                        Err(err) => violations.push(SystemViolation {
                            law: "S-1",
                            u: u.to_string(),
                            v: u.push(e).to_string(),
                            detail: format!("parent does not split: {err}"),
                        }),
                    }
                }
            }
        }
        // S-2 and S-3 over all equal-length pairs.
        for m in 0..=self.order {
            for u in Word::all_of_len(m) {
                for v in Word::all_of_len(m) {
                    let xi = self.schedule.xi_pair(&u, &v)?;
                    let xu = &self.family[&u];
                    let xv = &self.family[&v];
                    if xu.project(&xi)? != xv.project(&xi)? {
                        violations.push(SystemViolation {
                            law: "S-2",
                            u: u.to_string(),
                            v: v.to_string(),
                            detail: format!("projections to {xi:?} differ"),
                        });
                    }
                    for i in self.support().iter().filter(|&i| !xi.contains(i)) {
                        let le = self.support().intersect_cone(i, ConeKind::Le);
                        let pu = xu.project(&le)?;
                        let pv = xv.project(&le)?;
                        if pu.points().iter().any(|p| pv.contains(*p)) {
                            violations.push(SystemViolation {
                                law: "S-3",
                                u: u.to_string(),
                                v: v.to_string(),
                                detail: format!(
                                    "≤{} projections intersect",
                                    self.support().poset().name(i)
                                ),
                            });
                        }
                    }
                }
            }
        }
        Ok(SystemReport {
            order: self.order,
            violations,
        })
    }

    /// Re-defines the top level around a shrunken member: X'_u = X_u ∩
    /// (X|ξ[u,u0])|⁻¹; the named member becomes exactly `x`. Levels below
    /// the top are untouched.
    pub fn refine(&self, u0: &Word, x: &TreeSystem) -> Result<SplittingSystem, SplitSysError> {
        if u0.len() != self.order {
            return Err(SplitSysError::BadRefinementIndex { order: self.order });
        }
        let target = self
            .family
            .get(u0)
            .ok_or_else(|| SplitSysError::MissingKey(u0.to_string()))?;
        if !x.is_subset_of(target) {
            return Err(SplitSysError::SubsetViolation);
        }
        let mut family = self.family.clone();
        for u in Word::all_of_len(self.order) {
            let xi = self.schedule.xi_pair(&u, u0)?;
            let shrunk = x.project(&xi)?;
            let member = &self.family[&u];
            let proj = crate::shadow::Projector::new(member.support(), &xi, member.depth())?;
            let points: Vec<u64> = member
                .points()
                .iter()
                .copied()
                .filter(|&p| shrunk.contains(proj.apply(p)))
                .collect();
            family.insert(
                u,
                TreeSystem::new(member.support().clone(), member.depth(), points)?,
            );
        }
        debug_assert_eq!(family[u0], *x);
        Ok(SplittingSystem {
            schedule: self.schedule.clone(),
            order: self.order,
            family,
        })
    }

    /// Adjoins level m+1 by splitting every top cell at Φ(m).
    pub fn expand(&self) -> Result<SplittingSystem, SplitSysError> {
        let element = self.schedule.value(self.order)?;
        let mut family = self.family.clone();
        for u in Word::all_of_len(self.order) {
            for e in [false, true] {
                family.insert(u.push(e), precond::spl(&self.family[&u], element, e)?);
            }
        }
        Ok(SplittingSystem {
            schedule: self.schedule.clone(),
            order: self.order + 1,
            family,
        })
    }
}

/// Result of fusing a verified system of order M.
#[derive(Clone)]
pub struct FusionResult {
    fused: TreeSystem,
    cells: BTreeMap<Word, TreeSystem>,
    pinned_profile: Vec<usize>,
}

impl FusionResult {
    pub fn fused(&self) -> &TreeSystem {
        &self.fused
    }

    pub fn cells(&self) -> &BTreeMap<Word, TreeSystem> {
        &self.cells
    }

    /// δ(m) for m = 0..=M: the minimum over u ∈ 2^m and over coordinates of
    /// the common-prefix depth within X_u (the diameter proxy).
    pub fn pinned_profile(&self) -> &[usize] {
        &self.pinned_profile
    }

    /// The cell indexed by a full-order branch, flagged resolved when it is
    /// a singleton at the stored depth.
    pub fn generic_point(&self, a: &Word) -> Option<(&TreeSystem, bool)> {
        self.cells.get(a).map(|cell| (cell, cell.len() == 1))
    }
}

fn min_pinned_depth(sys: &TreeSystem) -> usize {
    let n = sys.depth();
    (0..sys.support().len())
        .map(|k| {
            let mut blocks = sys.points().iter().map(|&p| sys.coord_block(p, k));
            let first = Word::new(n, blocks.next().expect("nonempty"));
            blocks
                .fold(first, |acc, b| acc.common_prefix(&Word::new(n, b)))
                .len()
        })
        .min()
        .unwrap_or(n)
}

/// Verifies the system, then returns the level-M union with its cell map and
/// pinned-depth profile.
pub fn fuse(sys: &SplittingSystem) -> Result<FusionResult, SplitSysError> {
    let report = sys.verify()?;
    if !report.ok() {
        return Err(SplitSysError::VerificationFailed(
            report.lines().join("; "),
        ));
    }
    let fused = sys.level_union();
    let cells: BTreeMap<Word, TreeSystem> = Word::all_of_len(sys.order())
        .map(|u| (u, sys.family()[&u].clone()))
        .collect();
    let pinned_profile = (0..=sys.order())
        .map(|m| {
            Word::all_of_len(m)
                .map(|u| min_pinned_depth(&sys.family()[&u]))
                .min()
                .expect("level is nonempty")
        })
        .collect();
    Ok(FusionResult {
        fused,
        cells,
        pinned_profile,
    })
}
