//! Finite-depth combinatorics of non-wellfounded iterated perfect-set
//! forcing: condition validators, splitting, the initial-segment calculus,
//! splitting systems, fusion, canonical cell homeomorphisms, and the
//! reducibility/capture dichotomy, with every lemma-shaped claim checkable
//! against exhaustive brute-force scans at the stored depth.

pub mod bits;
pub mod clopen;
pub mod fixture;
pub mod homeo;
pub mod poset;
pub mod precond;
pub mod reduce;
pub mod shadow;
pub mod splitsys;

pub use bits::Word;
pub use clopen::Clopen;
pub use homeo::{build_homeo, transfer_1d, CellHomeo, HomeoError, TransferReport};
pub use poset::{
    all_initial_segments, cone_segment, initial_segments_within, ConeKind, ElemId, ElemSet,
    FinitePoset, PosetError, Schedule, Segment,
};
pub use precond::{
    amalgam, decide_all, decide_clopen, iterate_spl, locate_clopen, restrict, shrink_check, spl,
    validate, validate_with_shrink, PrecondError, ShrinkReport, Side, ValidationReport,
};
pub use reduce::{
    capture_all, capture_or_reduce, captures, check_inter, dichotomy, reducible,
    separate_or_reduce, Certificate, ReduceError, ShadowFunction,
};
pub use shadow::{SectionTree, ShadowError, ShadowPoint, TreeSystem};
pub use splitsys::{fuse, FusionResult, SplitSysError, SplittingSystem, SystemReport};
