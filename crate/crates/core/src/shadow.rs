//! Finite-depth shadows of points and closed subsets of the product cube
//! `D^ζ`, with projections, gluing, sections, and root/stem/Spl on sections.
//!
//! A shadow stores only its depth-N point set; every shallower truncation is
//! computed by bit slicing, so downward closure and extendability hold by
//! construction. A stored point denotes the clopen set of all infinite points
//! extending it. Points are packed into a single `u64`: support members in
//! canonical order, most significant block first, each block holding one
//! coordinate's bits most-significant-first, so numeric order on the packed
//! word is lexicographic order on the rendered point.

use std::fmt;

use thiserror::Error;

use crate::bits::{Word, MAX_WORD_LEN};
use crate::poset::{ConeKind, ElemId, Segment};

/// Hard cap on `|support| * depth` enforced at construction.
pub const PACK_CAP_BITS: usize = MAX_WORD_LEN;
/// Cap on full-cube materialization (point count `2^(|support|*depth)`).
pub const CUBE_ENUM_CAP_BITS: usize = 24;

#[derive(Debug, Error)]
pub enum ShadowError {
    #[error("|support| * depth = {bits} bits exceeds the packing cap {PACK_CAP_BITS}")]
    PackingCapExceeded { bits: usize },
    #[error("full cube over {bits} bits exceeds the enumeration cap {CUBE_ENUM_CAP_BITS}")]
    EnumerationCapExceeded { bits: usize },
    #[error("a tree system must contain at least one point")]
    EmptySystem,
    #[error("packed point {point:#x} does not fit {bits} bits")]
    PointOutOfRange { point: u64, bits: usize },
    #[error("{outer:?} is not a sub-support of {inner:?}")]
    NotASubSupport { outer: String, inner: String },
    #[error("points disagree at shared element {element:?}")]
    OverlapDisagreement { element: String },
    #[error("element {element:?} lies outside the support")]
    ElementOutsideSupport { element: String },
    #[error("the fiber point is not in the projection of the system")]
    FiberOutsideProjection,
    #[error("degenerate section: root/stem need at least two distinct points")]
    DegenerateSection,
    #[error("operands have different supports or depths")]
    ShapeMismatch,
    #[error("a section must contain at least one leaf")]
    EmptySection,
    #[error("malformed point literal {0:?}")]
    BadPointLiteral(String),
}

fn block_mask(depth: usize) -> u64 {
    if depth == 0 {
        0
    } else {
        (1u64 << depth) - 1
    }
}

/// Extracts member `k`'s coordinate block from a packed point.
fn block(packed: u64, k: usize, member_count: usize, depth: usize) -> u32 {
    (packed >> ((member_count - 1 - k) * depth) & block_mask(depth)) as u32
}

fn place(block: u32, k: usize, member_count: usize, depth: usize) -> u64 {
    (block as u64) << ((member_count - 1 - k) * depth)
}

/// A depth-N point of the cube over a support segment.
#[derive(Clone, PartialEq, Eq)]
pub struct ShadowPoint {
    support: Segment,
    depth: usize,
    packed: u64,
}

impl ShadowPoint {
    pub fn new(support: Segment, depth: usize, packed: u64) -> Result<ShadowPoint, ShadowError> {
        let bits = support.len() * depth;
        if bits > PACK_CAP_BITS {
            return Err(ShadowError::PackingCapExceeded { bits });
        }
        if bits < 64 && packed >> bits != 0 {
            return Err(ShadowError::PointOutOfRange {
                point: packed,
                bits,
            });
        }
        Ok(ShadowPoint {
            support,
            depth,
            packed,
        })
    }

    pub fn support(&self) -> &Segment {
        &self.support
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn packed(&self) -> u64 {
        self.packed
    }

    /// The bit string this point assigns to `element`.
    pub fn coord(&self, element: ElemId) -> Result<Word, ShadowError> {
        let k = member_index(&self.support, element).ok_or_else(|| {
            ShadowError::ElementOutsideSupport {
                element: self.support.poset().name(element).to_owned(),
            }
        })?;
        Ok(Word::new(
            self.depth,
            block(self.packed, k, self.support.len(), self.depth),
        ))
    }

    /// `x|ξ`: the usual restriction. `ξ` must be a sub-support.
    pub fn project(&self, xi: &Segment) -> Result<ShadowPoint, ShadowError> {
        let proj = Projector::new(&self.support, xi, self.depth)?;
        Ok(ShadowPoint {
            support: xi.clone(),
            depth: self.depth,
            packed: proj.apply(self.packed),
        })
    }

    /// `x∪y`: the union map, defined when the two points agree on the
    /// intersection of their supports.
    pub fn glue(&self, other: &ShadowPoint) -> Result<ShadowPoint, ShadowError> {
        if self.depth != other.depth {
            return Err(ShadowError::ShapeMismatch);
        }
        let merged = self.support.union(&other.support);
        let n = self.depth;
        let m = merged.len();
        let mut packed = 0u64;
        for (k, element) in merged.iter().enumerate() {
            let from_left = member_index(&self.support, element)
                .map(|j| block(self.packed, j, self.support.len(), n));
            let from_right = member_index(&other.support, element)
                .map(|j| block(other.packed, j, other.support.len(), n));
            let b = match (from_left, from_right) {
                (Some(a), Some(b)) if a != b => {
                    return Err(ShadowError::OverlapDisagreement {
                        element: merged.poset().name(element).to_owned(),
                    });
                }
                (Some(a), _) => a,
                (_, Some(b)) => b,
                (None, None) => unreachable!(),
            };
            packed |= place(b, k, m, n);
        }
        ShadowPoint::new(merged, n, packed)
    }

    /// Parses the `elem:bits;elem:bits` form. Fragments may come in any
    /// order but must cover the support exactly once each.
    pub fn parse(support: &Segment, depth: usize, s: &str) -> Result<ShadowPoint, ShadowError> {
        let bad = || ShadowError::BadPointLiteral(s.to_owned());
        let m = support.len();
        let mut blocks: Vec<Option<u32>> = vec![None; m];
        let fragments: Vec<&str> = if s.is_empty() {
            vec![]
        } else {
            s.split(';').collect()
        };
        for frag in fragments {
            let (name, bits) = frag.split_once(':').ok_or_else(bad)?;
            let element = support
                .poset()
                .elem(name.trim())
                .map_err(|_| bad())?;
            let k = member_index(support, element).ok_or_else(bad)?;
            let word: Word = bits.trim().parse().map_err(|_| bad())?;
            if word.len() != depth || blocks[k].is_some() {
                return Err(bad());
            }
            blocks[k] = Some(word.raw());
        }
        let mut packed = 0u64;
        for (k, b) in blocks.into_iter().enumerate() {
            packed |= place(b.ok_or_else(bad)?, k, m, depth);
        }
        ShadowPoint::new(support.clone(), depth, packed)
    }

    /// Renders as `elem:bits;elem:bits` in canonical element order.
    pub fn render(&self) -> String {
        self.support
            .iter()
            .enumerate()
            .map(|(k, element)| {
                format!(
                    "{}:{}",
                    self.support.poset().name(element),
                    Word::new(self.depth, block(self.packed, k, self.support.len(), self.depth))
                )
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Debug for ShadowPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShadowPoint({})", self.render())
    }
}

pub(crate) fn member_index(support: &Segment, element: ElemId) -> Option<usize> {
    if !support.contains(element) {
        return None;
    }
    Some(support.iter().take_while(|&e| e != element).count())
}

/// Repacks points from one support onto a sub-support.
pub(crate) struct Projector {
    pieces: Vec<(u32, u64, u32)>, // (src shift, mask, dst shift)
}

impl Projector {
    pub(crate) fn new(from: &Segment, to: &Segment, depth: usize) -> Result<Projector, ShadowError> {
        if !to.is_subset_of(from) {
            return Err(ShadowError::NotASubSupport {
                outer: format!("{from:?}"),
                inner: format!("{to:?}"),
            });
        }
        let (m, m2) = (from.len(), to.len());
        let mut pieces = Vec::with_capacity(m2);
        let mut j = 0usize;
        for (k, element) in from.iter().enumerate() {
            if to.contains(element) {
                let src = ((m - 1 - k) * depth) as u32;
                let dst = ((m2 - 1 - j) * depth) as u32;
                pieces.push((src, block_mask(depth), dst));
                j += 1;
            }
        }
        Ok(Projector { pieces })
    }

    pub(crate) fn apply(&self, packed: u64) -> u64 {
        let mut out = 0u64;
        for &(src, mask, dst) in &self.pieces {
            out |= (packed >> src & mask) << dst;
        }
        out
    }
}

/// A depth-N shadow of a closed set `X ⊆ D^ζ`: the set of its depth-N points.
#[derive(Clone, PartialEq, Eq)]
pub struct TreeSystem {
    support: Segment,
    depth: usize,
    points: Vec<u64>,
}

impl TreeSystem {
    pub fn new(
        support: Segment,
        depth: usize,
        mut points: Vec<u64>,
    ) -> Result<TreeSystem, ShadowError> {
        let bits = support.len() * depth;
        if bits > PACK_CAP_BITS {
            return Err(ShadowError::PackingCapExceeded { bits });
        }
        if points.is_empty() {
            return Err(ShadowError::EmptySystem);
        }
        if bits < 64 {
            if let Some(&p) = points.iter().find(|&&p| p >> bits != 0) {
                return Err(ShadowError::PointOutOfRange { point: p, bits });
            }
        }
        points.sort_unstable();
        points.dedup();
        Ok(TreeSystem {
            support,
            depth,
            points,
        })
    }

    /// The full cube `D^ζ` truncated at `depth`.
    pub fn full_cube(support: Segment, depth: usize) -> Result<TreeSystem, ShadowError> {
        let bits = support.len() * depth;
        if bits > PACK_CAP_BITS {
            return Err(ShadowError::PackingCapExceeded { bits });
        }
        if bits > CUBE_ENUM_CAP_BITS {
            return Err(ShadowError::EnumerationCapExceeded { bits });
        }
        let points: Vec<u64> = (0..1u64 << bits).collect();
        Ok(TreeSystem {
            support,
            depth,
            points,
        })
    }

    pub fn singleton(point: ShadowPoint) -> TreeSystem {
        TreeSystem {
            support: point.support,
            depth: point.depth,
            points: vec![point.packed],
        }
    }

    pub fn support(&self) -> &Segment {
        &self.support
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn contains(&self, packed: u64) -> bool {
        self.points.binary_search(&packed).is_ok()
    }

    pub fn point(&self, idx: usize) -> ShadowPoint {
        ShadowPoint {
            support: self.support.clone(),
            depth: self.depth,
            packed: self.points[idx],
        }
    }

    pub fn iter_points(&self) -> impl Iterator<Item = ShadowPoint> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    pub fn is_subset_of(&self, other: &TreeSystem) -> bool {
        self.support == other.support
            && self.depth == other.depth
            && self.points.iter().all(|&p| other.contains(p))
    }

    pub fn same_shape(&self, other: &TreeSystem) -> bool {
        self.support == other.support && self.depth == other.depth
    }

    /// Set union of two shadows over the same support and depth.
    pub fn union(&self, other: &TreeSystem) -> Result<TreeSystem, ShadowError> {
        if !self.same_shape(other) {
            return Err(ShadowError::ShapeMismatch);
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        TreeSystem::new(self.support.clone(), self.depth, points)
    }

    /// `X|ξ = {x|ξ : x ∈ X}`, deduplicated.
    pub fn project(&self, xi: &Segment) -> Result<TreeSystem, ShadowError> {
        let proj = Projector::new(&self.support, xi, self.depth)?;
        let points: Vec<u64> = self.points.iter().map(|&p| proj.apply(p)).collect();
        TreeSystem::new(xi.clone(), self.depth, points)
    }

    pub(crate) fn member_index(&self, element: ElemId) -> Result<usize, ShadowError> {
        member_index(&self.support, element).ok_or_else(|| ShadowError::ElementOutsideSupport {
            element: self.support.poset().name(element).to_owned(),
        })
    }

    pub(crate) fn coord_block(&self, packed: u64, member: usize) -> u32 {
        block(packed, member, self.support.len(), self.depth)
    }

    /// Groups the points by their projection to `support ∩ [<i]` and collects
    /// each fiber's set of `i`-coordinates. Fibers come back sorted by the
    /// projected point, leaves sorted within each fiber.
    pub(crate) fn fibered_sections(
        &self,
        element: ElemId,
    ) -> Result<Vec<(u64, Vec<u32>)>, ShadowError> {
        let member = self.member_index(element)?;
        let lower = self.support.intersect_cone(element, ConeKind::Lt);
        let proj = Projector::new(&self.support, &lower, self.depth)?;
        let mut fibers: Vec<(u64, u32)> = self
            .points
            .iter()
            .map(|&p| (proj.apply(p), self.coord_block(p, member)))
            .collect();
        fibers.sort_unstable();
        let mut out: Vec<(u64, Vec<u32>)> = Vec::new();
        for (z, leaf) in fibers {
            match out.last_mut() {
                Some((zz, leaves)) if *zz == z => {
                    if leaves.last() != Some(&leaf) {
                        leaves.push(leaf);
                    }
                }
                _ => out.push((z, vec![leaf])),
            }
        }
        Ok(out)
    }

    /// `D_{Xz}(i) = {x(i) : x ∈ X, z = x|<i}`.
    pub fn section(&self, element: ElemId, z: &ShadowPoint) -> Result<SectionTree, ShadowError> {
        let member = self.member_index(element)?;
        let lower = self.support.intersect_cone(element, ConeKind::Lt);
        if z.support != lower || z.depth != self.depth {
            return Err(ShadowError::NotASubSupport {
                outer: format!("{lower:?}"),
                inner: format!("{:?}", z.support),
            });
        }
        let proj = Projector::new(&self.support, &lower, self.depth)?;
        let leaves: Vec<u32> = self
            .points
            .iter()
            .filter(|&&p| proj.apply(p) == z.packed)
            .map(|&p| self.coord_block(p, member))
            .collect();
        if leaves.is_empty() {
            return Err(ShadowError::FiberOutsideProjection);
        }
        SectionTree::new(self.depth, leaves)
    }
}

impl fmt::Debug for TreeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TreeSystem(support={:?}, depth={}, {} points)",
            self.support,
            self.depth,
            self.len()
        )
    }
}

/// A nonempty set of equal-length bit strings: the shadow of a subset of `D`.
#[derive(Clone, PartialEq, Eq)]
pub struct SectionTree {
    depth: usize,
    leaves: Vec<u32>,
}

impl SectionTree {
    pub fn new(depth: usize, mut leaves: Vec<u32>) -> Result<SectionTree, ShadowError> {
        if depth > PACK_CAP_BITS {
            return Err(ShadowError::PackingCapExceeded { bits: depth });
        }
        if leaves.is_empty() {
            return Err(ShadowError::EmptySection);
        }
        if depth < 32 {
            if let Some(&l) = leaves.iter().find(|&&l| l >> depth != 0) {
                return Err(ShadowError::PointOutOfRange {
                    point: l as u64,
                    bits: depth,
                });
            }
        }
        leaves.sort_unstable();
        leaves.dedup();
        Ok(SectionTree { depth, leaves })
    }

    pub fn from_words<I: IntoIterator<Item = Word>>(
        depth: usize,
        words: I,
    ) -> Result<SectionTree, ShadowError> {
        SectionTree::new(depth, words.into_iter().map(|w| w.raw()).collect())
    }

    /// All `2^depth` strings.
    pub fn full(depth: usize) -> Result<SectionTree, ShadowError> {
        if depth > CUBE_ENUM_CAP_BITS {
            return Err(ShadowError::EnumerationCapExceeded { bits: depth });
        }
        SectionTree::new(depth, (0..1u64 << depth).map(|l| l as u32).collect())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn leaves(&self) -> &[u32] {
        &self.leaves
    }

    pub fn leaf_words(&self) -> impl Iterator<Item = Word> + '_ {
        self.leaves.iter().map(|&l| Word::new(self.depth, l))
    }

    pub fn contains(&self, leaf: u32) -> bool {
        self.leaves.binary_search(&leaf).is_ok()
    }

    pub fn is_subset_of(&self, other: &SectionTree) -> bool {
        self.depth == other.depth && self.leaves.iter().all(|&l| other.contains(l))
    }

    /// The longest string extended by every leaf. Requires at least two
    /// distinct leaves, so the root is proper and the stem position exists.
    pub fn root(&self) -> Result<Word, ShadowError> {
        if self.len() < 2 {
            return Err(ShadowError::DegenerateSection);
        }
        let mut iter = self.leaf_words();
        let first = iter.next().unwrap();
        Ok(iter.fold(first, |acc, w| acc.common_prefix(&w)))
    }

    /// `(root, stem)` where `stem = |root|`.
    pub fn root_stem(&self) -> Result<(Word, usize), ShadowError> {
        let root = self.root()?;
        Ok((root, root.len()))
    }

    /// `Spl(A,e) = {a ∈ A : a(stem(A)) = e}`. Nonempty for both bits because
    /// the root is the exact common prefix.
    pub fn spl(&self, e: bool) -> Result<SectionTree, ShadowError> {
        let (_, stem) = self.root_stem()?;
        let leaves: Vec<u32> = self
            .leaf_words()
            .filter(|w| w.bit(stem) == e)
            .map(|w| w.raw())
            .collect();
        debug_assert!(!leaves.is_empty());
        SectionTree::new(self.depth, leaves)
    }

    /// Iterated one-dimensional splitting along `addr`, absorbing on
    /// singletons: once a cell is a single leaf, all further splits happen
    /// below the visible depth, so the depth-N shadow stays that leaf. Exact
    /// for clopen denotations.
    pub fn cell(&self, addr: &Word) -> SectionTree {
        let mut cur = self.clone();
        for e in addr.bits_iter() {
            if cur.len() == 1 {
                break;
            }
            cur = cur.spl(e).expect("non-singleton section splits");
        }
        cur
    }

    /// The split address that isolates `leaf`: the shortest `u` with
    /// `cell(u) = {leaf}`.
    pub fn address_of(&self, leaf: u32) -> Option<Word> {
        if !self.contains(leaf) {
            return None;
        }
        let mut cur = self.clone();
        let mut addr = Word::empty();
        while cur.len() > 1 {
            let stem = cur.root().unwrap().len();
            let e = Word::new(self.depth, leaf).bit(stem);
            addr = addr.push(e);
            cur = cur.spl(e).unwrap();
        }
        Some(addr)
    }
}

impl fmt::Debug for SectionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SectionTree[")?;
        for (k, w) in self.leaf_words().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "]")
    }
}
