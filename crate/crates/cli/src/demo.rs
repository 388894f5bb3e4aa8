//! The demonstration scenarios behind `itersacks demo`.

use std::sync::Arc;

use anyhow::Result;

use itersacks::poset::initial_segments_within;
use itersacks::precond::{self, BranchResult};
use itersacks::{build_homeo, fuse, FinitePoset, Schedule, Segment, SplittingSystem, TreeSystem};

use crate::{FAILS, PASS};

fn chain(length: usize) -> Arc<FinitePoset> {
    let names: Vec<String> = (1..=length).map(|k| format!("p{k}")).collect();
    let pairs: Vec<(String, String)> = names
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect();
    FinitePoset::new(names, &pairs).expect("chains are valid posets")
}

/// The two-class set over a chain: every coordinate's first bit equals the
/// class bit; the minimal coordinate carries only the class (zero tail);
/// every other tail is free.
fn two_class_set(support: &Segment, depth: usize) -> TreeSystem {
    let m = support.len();
    let tail_bits = depth - 1;
    let free = (m - 1) * tail_bits;
    let mut points = Vec::with_capacity(2 << free);
    for class in 0..2u64 {
        for combo in 0..1u64 << free {
            let mut packed = 0u64;
            for k in 0..m {
                let tail = if k == 0 {
                    0
                } else {
                    combo >> ((m - 1 - k) * tail_bits) & ((1 << tail_bits) - 1)
                };
                let block = class << tail_bits | tail;
                packed |= block << ((m - 1 - k) * depth);
            }
            points.push(packed);
        }
    }
    TreeSystem::new(support.clone(), depth, points).expect("two-class set is well formed")
}

/// Splits that avoid the minimal element can never decide the class bit:
/// every section's root already carries it. The minimal-omitting schedule
/// pins every free tail and leaves exactly the two class representatives on
/// every branch; one split at the minimal element resolves everything.
pub(crate) fn nonshrinkable(length: usize, depth: usize) -> Result<u8> {
    let poset = chain(length);
    let support = Segment::full(&poset);
    let sys = two_class_set(&support, depth);
    println!("fixture: two-class chain (length {length}, depth {depth})");
    println!("points: {}", sys.len());

    let minimal = 0;
    let rest: Vec<usize> = support.iter().filter(|&i| i != minimal).collect();
    let omit_values: Vec<usize> = std::iter::repeat_with(|| rest.iter().copied())
        .take(depth - 1)
        .flatten()
        .collect();
    let omitting = Schedule::new(support.clone(), omit_values, 0)?;
    println!("schedule: minimal-omitting (horizon {})", omitting.horizon());
    let report = precond::shrink_check(&sys, &omitting)?;
    let mut all_two = true;
    for branch in &report.branches {
        match &branch.result {
            BranchResult::Residual { size, .. } => {
                all_two &= *size == 2;
                if report.branches.len() <= 16 {
                    println!("branch {}: residual {size}", branch.branch);
                }
            }
            BranchResult::Degenerate { step } => {
                all_two = false;
                println!("branch {}: degenerate at step {step}", branch.branch);
            }
        }
    }
    println!("branches: {}", report.branches.len());
    println!(
        "residual_two_everywhere: {}",
        if all_two { "pass" } else { "fail" }
    );

    let mut fair_values = vec![minimal];
    fair_values.extend(
        std::iter::repeat_with(|| rest.iter().copied())
            .take(depth - 1)
            .flatten(),
    );
    fair_values.extend(std::iter::repeat_n(minimal, depth - 2));
    let fair = Schedule::new(support, fair_values, depth - 1)?;
    println!("schedule: fair (horizon {})", fair.horizon());
    let fair_report = precond::shrink_check(&sys, &fair)?;
    println!(
        "resolved_everywhere: {}",
        if fair_report.shrunk { "pass" } else { "fail" }
    );
    Ok(if all_two && fair_report.shrunk {
        PASS
    } else {
        FAILS
    })
}

/// Canonical system over a full cube: expand a level, refine one cell with a
/// fresh split, fuse, and validate the result.
pub(crate) fn fusion(length: usize, depth: usize) -> Result<u8> {
    let poset = chain(length);
    let support = Segment::full(&poset);
    let cube = TreeSystem::full_cube(support.clone(), depth)?;
    let schedule = Schedule::fair_round_robin(support.clone(), depth);
    println!("fixture: full cube over a length-{length} chain, depth {depth}");

    let sys = SplittingSystem::canonical(&cube, &schedule, 2)?;
    let sys = sys.expand()?;
    println!("order: {}", sys.order());
    println!(
        "verify: {}",
        if sys.verify()?.ok() { "pass" } else { "fail" }
    );

    let u0 = itersacks::Word::new(sys.order(), 0);
    let top = support.iter().last().expect("nonempty support");
    let shrunk = precond::spl(sys.member(&u0).expect("cell exists"), top, false)?;
    let refined = sys.refine(&u0, &shrunk)?;
    println!(
        "refined_verify: {}",
        if refined.verify()?.ok() { "pass" } else { "fail" }
    );

    let fusion = fuse(&refined)?;
    println!(
        "pinned_profile: {}",
        fusion
            .pinned_profile()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("fused_points: {}", fusion.fused().len());
    let report = precond::validate(fusion.fused(), depth);
    println!(
        "fused_valid: {}",
        if report.ok() { "pass" } else { "fail" }
    );
    Ok(if report.ok() { PASS } else { FAILS })
}

/// Matched-rate halves of a cube, fully resolved correspondence, h1/h2 laws.
pub(crate) fn homeo(length: usize, depth: usize) -> Result<u8> {
    let poset = chain(length);
    let support = Segment::full(&poset);
    let cube = TreeSystem::full_cube(support.clone(), depth)?;
    let top = support.iter().last().expect("nonempty support");
    let x = precond::spl(&cube, top, false)?;
    let y = precond::spl(&cube, top, true)?;
    let schedule = Schedule::fair_round_robin(support.clone(), depth);
    let order = length * depth - 1;
    crate::enforce_caps(length, depth, order)?;
    println!("fixture: the two {}-halves of the cube", poset.name(top));
    println!("order: {order}");

    let h = build_homeo(&x, &y, &schedule, order)?;
    println!("cells: {}", h.pairs().len());
    println!("resolved: {}", h.point_map().len());
    let h1 = h.check_h1()?;
    println!("h1: {}", if h1 { "pass" } else { "fail" });
    let mut h2_all = true;
    for xi in initial_segments_within(&support) {
        match h.check_h2(&xi) {
            Ok(ok) => {
                h2_all &= ok;
                println!(
                    "h2[{}]: {}",
                    xi.names().join(","),
                    if ok { "pass" } else { "fail" }
                );
            }
            Err(itersacks::HomeoError::ProjectionMismatch) => {
                println!("h2[{}]: not applicable", xi.names().join(","));
            }
            Err(err) => return Err(err.into()),
        }
    }
    let patterns = h.cell_patterns_match()?;
    println!("cell_patterns: {}", if patterns { "pass" } else { "fail" });
    Ok(if h1 && h2_all && patterns { PASS } else { FAILS })
}
