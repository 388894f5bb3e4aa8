//! The `pipeline` subcommand: newline- or semicolon-separated verbs over
//! named condition bindings.
//!
//! ```text
//! load X fixtures/cube.json
//! split X p 0 as Y
//! restrict Y p,q as Z
//! amalgam X Z as W
//! itersplit X fixtures/sched.json 011 as V
//! check V 2
//! save V out/v.json
//! ```
//!
//! Unbound names and unparsable statements are input errors (exit 2); a
//! failing operation or check stops the run with its step index (exit 1).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use itersacks::fixture::{ConditionDoc, ScheduleDoc};
use itersacks::{precond, Segment, TreeSystem, Word};

use crate::{read_json, write_json, FAILS, PASS};

pub(crate) fn run_script(path: &Path) -> Result<u8> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut env: BTreeMap<String, TreeSystem> = BTreeMap::new();
    let statements = text
        .lines()
        .flat_map(|line| line.split(';'))
        .map(str::trim)
        .enumerate()
        .filter(|(_, s)| !s.is_empty() && !s.starts_with('#'));
    for (step, statement) in statements {
        match execute(&mut env, statement)
            .with_context(|| format!("step {step}: {statement:?}"))?
        {
            StepResult::Ok => {}
            StepResult::OpFailed(message) => {
                eprintln!("step {step}: {message}");
                return Ok(FAILS);
            }
        }
    }
    Ok(PASS)
}

enum StepResult {
    Ok,
    OpFailed(String),
}

fn execute(env: &mut BTreeMap<String, TreeSystem>, statement: &str) -> Result<StepResult> {
    let tokens: Vec<&str> = statement.split_whitespace().collect();
    let get = |env: &BTreeMap<String, TreeSystem>, name: &str| -> Result<TreeSystem> {
        env.get(name)
            .cloned()
            .ok_or_else(|| anyhow!("unbound name {name:?}"))
    };
    match tokens.as_slice() {
        ["load", name, path] => {
            let sys = crate::load_condition(Path::new(path))?;
            env.insert(name.to_string(), sys);
            Ok(StepResult::Ok)
        }
        ["split", x, elem, bit, "as", y] => {
            let sys = get(env, x)?;
            let element = sys.support().poset().elem(elem)?;
            let e = match *bit {
                "0" => false,
                "1" => true,
                other => bail!("bit must be 0 or 1, got {other:?}"),
            };
            match precond::spl(&sys, element, e) {
                Ok(out) => {
                    env.insert(y.to_string(), out);
                    Ok(StepResult::Ok)
                }
                Err(err) => Ok(StepResult::OpFailed(format!("split failed: {err}"))),
            }
        }
        ["restrict", x, members, "as", y] => {
            let sys = get(env, x)?;
            let names: Vec<&str> = members
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != "-")
                .collect();
            let xi = Segment::from_names(sys.support().poset(), &names)?;
            match precond::restrict(&sys, &xi) {
                Ok(out) => {
                    env.insert(y.to_string(), out);
                    Ok(StepResult::Ok)
                }
                Err(err) => Ok(StepResult::OpFailed(format!("restrict failed: {err}"))),
            }
        }
        ["amalgam", x, y, "as", z] => {
            let big = get(env, x)?;
            let small = get(env, y)?;
            match precond::amalgam(&big, &small) {
                Ok(out) => {
                    env.insert(z.to_string(), out);
                    Ok(StepResult::Ok)
                }
                Err(err) => Ok(StepResult::OpFailed(format!("amalgam failed: {err}"))),
            }
        }
        ["itersplit", x, sched_path, bits, "as", y] => {
            let sys = get(env, x)?;
            let sched = read_json::<ScheduleDoc>(Path::new(sched_path))?
                .build(sys.support().poset())?;
            let u: Word = bits.parse().map_err(|e| anyhow!("{e}"))?;
            match precond::iterate_spl(&sys, &sched, &u) {
                Ok(out) => {
                    env.insert(y.to_string(), out);
                    Ok(StepResult::Ok)
                }
                Err(err) => Ok(StepResult::OpFailed(format!("itersplit failed: {err}"))),
            }
        }
        ["check", x] | ["check", x, _] => {
            let sys = get(env, x)?;
            let modulus = match tokens.as_slice() {
                [_, _, m] => m.parse::<usize>().context("modulus must be an integer")?,
                _ => sys.depth(),
            };
            let report = precond::validate(&sys, modulus);
            for line in report.lines() {
                println!("{x}: {line}");
            }
            if report.ok() {
                Ok(StepResult::Ok)
            } else {
                Ok(StepResult::OpFailed(format!("check failed on {x}")))
            }
        }
        ["save", x, path] => {
            let sys = get(env, x)?;
            write_json(Path::new(path), &ConditionDoc::of(&sys))?;
            Ok(StepResult::Ok)
        }
        _ => bail!("unrecognized statement"),
    }
}
