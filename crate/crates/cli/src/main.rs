//! Command-line front end: fixture I/O, validation runs, construction
//! pipelines, dichotomy analysis, and the demonstration scenarios.
//!
//! Exit codes: 0 success/property holds, 1 property fails or an operation
//! fails, 2 malformed input, 3 budget exhausted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use itersacks::fixture::{
    CertificateDoc, ConditionDoc, FunctionDoc, PosetDoc, ScheduleDoc, SystemDoc,
};
use itersacks::poset::initial_segments_within;
use itersacks::{
    build_homeo, fuse, precond, reduce, Certificate, Schedule, Segment, ShadowFunction,
    SplittingSystem, TreeSystem, Word,
};

mod demo;
mod pipeline;

const CAP_MESSAGE: &str =
    "cap exceeded: |support| * depth must stay within 30 bits and order/budget within 12";

const PACK_CAP: usize = 30;
const ORDER_CAP: usize = 12;

#[derive(Parser)]
#[command(
    name = "itersacks",
    version,
    about = "Finite-depth iterated perfect-set forcing: validators, splitting systems, fusion, cell homeomorphisms, and dichotomy analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalyzeMode {
    Reduce,
    Capture,
    Dichotomy,
    CaptureAll,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DemoName {
    Nonshrinkable,
    Fusion,
    Homeo,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a condition fixture against P-1..P-4.
    Check {
        cond: PathBuf,
        /// Splitting budget for P-2.
        #[arg(long, default_value_t = 1)]
        modulus: usize,
        /// Write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a script of newline- or semicolon-separated verbs.
    Pipeline { script: PathBuf },
    /// Evaluate the initial-segment calculus ξ_Φ[u,v].
    Xi {
        poset: PathBuf,
        schedule: PathBuf,
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
    },
    /// Verify S-1..S-3 on a splitting-system fixture.
    SysVerify {
        system: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Expand a splitting system to the next level.
    SysExpand {
        system: PathBuf,
        /// Output path for the expanded system (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Refine a splitting system at a top-level cell.
    SysRefine {
        system: PathBuf,
        /// Bit-string index of the cell to refine.
        #[arg(long)]
        at: String,
        /// Condition fixture with the replacement subset.
        #[arg(long)]
        with: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fuse a verified system: level union, cell map, pinned profile.
    Fuse {
        system: PathBuf,
        /// Output path for the fused condition.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Build the canonical cell correspondence between two conditions and
    /// check the projection laws.
    Homeo {
        x: PathBuf,
        y: PathBuf,
        /// Schedule fixture (fair round-robin over the support if omitted).
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Correspondence order (defaults to |support|*depth - 1).
        #[arg(long)]
        order: Option<usize>,
    },
    /// Reducibility/capture analysis; emits a replayable certificate.
    Analyze {
        /// Function fixture path, or a generator spec such as `coord:q`,
        /// `const`, `xor:a,b`, `tuple:p,q`.
        function: String,
        cond: PathBuf,
        /// Comma-separated segment (the ξ; for --mode capture, the single
        /// target element). Empty string = the empty segment.
        #[arg(long, default_value = "")]
        segment: String,
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
        /// Fusion order budget; also the fairness of the generated schedule.
        #[arg(long, default_value_t = 3)]
        budget: usize,
        /// Schedule fixture overriding the generated round-robin.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Certificate output path (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Scripted demonstration scenarios.
    Demo {
        name: DemoName,
        #[arg(long, default_value_t = 3)]
        chain_length: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

pub(crate) const PASS: u8 = 0;
pub(crate) const FAILS: u8 = 1;
pub(crate) const EXHAUSTED: u8 = 3;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit_json<T: serde::Serialize>(target: &Option<PathBuf>, value: &T) -> Result<()> {
    match target {
        Some(path) => write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn enforce_caps(support: usize, depth: usize, order: usize) -> Result<()> {
    if support * depth > PACK_CAP || order > ORDER_CAP {
        bail!("{CAP_MESSAGE}");
    }
    Ok(())
}

fn load_condition(path: &Path) -> Result<TreeSystem> {
    let doc: ConditionDoc = read_json(path)?;
    enforce_caps(doc.support.len(), doc.depth, 0)?;
    doc.build().map_err(Into::into)
}

fn load_system(path: &Path) -> Result<SplittingSystem> {
    let doc: SystemDoc = read_json(path)?;
    let sys = doc.build()?;
    enforce_caps(sys.support().len(), sys.depth(), sys.order())?;
    Ok(sys)
}

fn parse_segment(x: &TreeSystem, names: &str) -> Result<Segment> {
    let names: Vec<&str> = names
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    Segment::from_names(x.support().poset(), &names).map_err(Into::into)
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Check {
            cond,
            modulus,
            json,
        } => {
            let x = load_condition(&cond)?;
            let report = precond::validate(&x, modulus);
            for line in report.lines() {
                println!("{line}");
            }
            println!("verdict: {}", if report.ok() { "pass" } else { "fail" });
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            Ok(if report.ok() { PASS } else { FAILS })
        }
        Command::Pipeline { script } => pipeline::run_script(&script),
        Command::Xi {
            poset,
            schedule,
            u,
            v,
        } => {
            let poset = read_json::<PosetDoc>(&poset)?.build()?;
            let schedule = read_json::<ScheduleDoc>(&schedule)?.build(&poset)?;
            let u: Word = u.parse().map_err(|e| anyhow!("{e}"))?;
            let v: Word = v.parse().map_err(|e| anyhow!("{e}"))?;
            let xi = schedule.xi_pair(&u, &v)?;
            println!("xi: {}", xi.names().join(","));
            Ok(PASS)
        }
        Command::SysVerify { system, json } => {
            let sys = load_system(&system)?;
            let report = sys.verify()?;
            for line in report.lines() {
                println!("{line}");
            }
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            Ok(if report.ok() { PASS } else { FAILS })
        }
        Command::SysExpand { system, output } => {
            let sys = load_system(&system)?;
            enforce_caps(sys.support().len(), sys.depth(), sys.order() + 1)?;
            match sys.expand() {
                Ok(expanded) => {
                    emit_json(&output, &SystemDoc::of(&expanded))?;
                    Ok(PASS)
                }
                Err(itersacks::SplitSysError::Poset(
                    itersacks::PosetError::HorizonExceeded { .. },
                )) => {
                    eprintln!("schedule horizon exhausted");
                    Ok(EXHAUSTED)
                }
                Err(err) => {
                    eprintln!("expand failed: {err}");
                    Ok(FAILS)
                }
            }
        }
        Command::SysRefine {
            system,
            at,
            with,
            output,
        } => {
            let sys = load_system(&system)?;
            let at: Word = at.parse().map_err(|e| anyhow!("{e}"))?;
            let doc: ConditionDoc = read_json(&with)?;
            let replacement = doc.build_in(sys.support().poset())?;
            match sys.refine(&at, &replacement) {
                Ok(refined) => {
                    emit_json(&output, &SystemDoc::of(&refined))?;
                    Ok(PASS)
                }
                Err(err) => {
                    eprintln!("refine failed: {err}");
                    Ok(FAILS)
                }
            }
        }
        Command::Fuse {
            system,
            output,
            json,
        } => {
            let sys = load_system(&system)?;
            match fuse(&sys) {
                Ok(fusion) => {
                    let report = precond::validate(fusion.fused(), sys.depth());
                    println!("order: {}", sys.order());
                    println!("cells: {}", fusion.cells().len());
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
                    println!(
                        "fused_valid: {}",
                        if report.ok() { "pass" } else { "fail" }
                    );
                    if let Some(path) = &output {
                        write_json(path, &ConditionDoc::of(fusion.fused()))?;
                    }
                    if let Some(path) = &json {
                        write_json(path, &report)?;
                    }
                    Ok(if report.ok() { PASS } else { FAILS })
                }
                Err(err) => {
                    eprintln!("fusion failed: {err}");
                    Ok(FAILS)
                }
            }
        }
        Command::Homeo {
            x,
            y,
            schedule,
            order,
        } => {
            let x = load_condition(&x)?;
            let y = load_condition(&y)?;
            let sched = match schedule {
                Some(path) => read_json::<ScheduleDoc>(&path)?.build(x.support().poset())?,
                None => Schedule::fair_round_robin(x.support().clone(), x.depth()),
            };
            let order = order.unwrap_or((x.support().len() * x.depth()).saturating_sub(1));
            enforce_caps(x.support().len(), x.depth(), order)?;
            let h = build_homeo(&x, &y, &sched, order)?;
            println!("order: {order}");
            println!("cells: {}", h.pairs().len());
            println!("resolved: {}", h.point_map().len());
            let h1 = h.check_h1()?;
            println!("h1: {}", if h1 { "pass" } else { "fail" });
            let mut h2_all = true;
            for xi in initial_segments_within(x.support()) {
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
            Ok(if h1 && h2_all { PASS } else { FAILS })
        }
        Command::Analyze {
            function,
            cond,
            segment,
            mode,
            budget,
            schedule,
            output,
        } => {
            let x = load_condition(&cond)?;
            enforce_caps(x.support().len(), x.depth(), budget)?;
            let f = load_function(&function, &x)?;
            let sched = match schedule {
                Some(path) => read_json::<ScheduleDoc>(&path)?.build(x.support().poset())?,
                None => Schedule::fair_round_robin(x.support().clone(), budget.max(1)),
            };
            let cert = match mode {
                AnalyzeMode::Reduce => {
                    let xi = parse_segment(&x, &segment)?;
                    match reduce::reducible(&f, &xi, &x)? {
                        reduce::ReductionCheck::Reducible(table) => Certificate::Reduced {
                            segment: xi,
                            carrier: x.clone(),
                            table,
                        },
                        reduce::ReductionCheck::Irreducible { x: a, y: b } => {
                            println!("reducible: no");
                            println!("witness_x: {a:#x}");
                            println!("witness_y: {b:#x}");
                            return Ok(FAILS);
                        }
                    }
                }
                AnalyzeMode::Capture => {
                    let target = parse_segment(&x, &segment)?;
                    let mut iter = target.iter();
                    let (Some(element), None) = (iter.next(), iter.next()) else {
                        bail!("--mode capture expects --segment to name exactly one element");
                    };
                    reduce::capture_or_reduce(&f, element, &x, &sched, budget)?
                }
                AnalyzeMode::Dichotomy => {
                    let xi = parse_segment(&x, &segment)?;
                    reduce::dichotomy(&f, &xi, &x, &sched, budget)?
                }
                AnalyzeMode::CaptureAll => {
                    let xi = parse_segment(&x, &segment)?;
                    reduce::capture_all(&f, &xi, &x, &sched, budget)?
                }
            };
            println!("certificate: {}", cert.kind());
            if !cert.is_exhausted() {
                println!(
                    "replay: {}",
                    if cert.replay(&f)? { "pass" } else { "fail" }
                );
            }
            emit_json(&output, &CertificateDoc::of(&cert))?;
            Ok(if cert.is_exhausted() { EXHAUSTED } else { PASS })
        }
        Command::Demo {
            name,
            chain_length,
            depth,
        } => {
            if chain_length < 2 || depth < 2 {
                bail!("demo needs chain length >= 2 and depth >= 2");
            }
            enforce_caps(chain_length, depth, 0)?;
            match name {
                DemoName::Nonshrinkable => demo::nonshrinkable(chain_length, depth),
                DemoName::Fusion => demo::fusion(chain_length, depth),
                DemoName::Homeo => demo::homeo(chain_length, depth),
            }
        }
    }
}

fn load_function(spec: &str, x: &TreeSystem) -> Result<ShadowFunction> {
    let path = Path::new(spec);
    if path.exists() {
        let doc: FunctionDoc = read_json(path)?;
        let f = doc.build()?;
        if !f.domain().support().names().eq(&x.support().names())
            || f.domain().depth() != x.depth()
        {
            bail!("function domain does not match the condition's support and depth");
        }
        return Ok(f);
    }
    let domain = TreeSystem::full_cube(x.support().clone(), x.depth())?;
    ShadowFunction::from_generator(spec, domain)
        .map_err(|err| anyhow!("{spec:?} is neither a readable fixture nor a generator: {err}"))
}

