//! JSON fixture documents for posets, schedules, conditions, splitting
//! systems, shadow functions, and certificates, with conversions to and from
//! the domain types. Points render as `elem:bits;elem:bits` in canonical
//! element order, bits most-significant-first (coordinate 0 first).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Word;
use crate::poset::{ElemId, FinitePoset, PosetError, Schedule, Segment};
use crate::reduce::{Certificate, ETable, HTable, ReduceError, ShadowFunction};
use crate::shadow::{ShadowError, ShadowPoint, TreeSystem};
use crate::splitsys::{SplitSysError, SplittingSystem};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    SplitSys(#[from] SplitSysError),
    #[error("malformed fixture: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> FixtureError {
    FixtureError::Invalid(msg.into())
}

/// `{"elements": ["p","q"], "lt": [["p","q"]]}`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosetDoc {
    pub elements: Vec<String>,
    #[serde(default)]
    pub lt: Vec<(String, String)>,
}

impl PosetDoc {
    pub fn build(&self) -> Result<Arc<FinitePoset>, FixtureError> {
        Ok(FinitePoset::new(self.elements.clone(), &self.lt)?)
    }

    pub fn of(poset: &FinitePoset) -> PosetDoc {
        PosetDoc {
            elements: poset.names().to_vec(),
            lt: lt_pairs(poset, &poset.elements().iter().collect::<Vec<_>>()),
        }
    }
}

fn lt_pairs(poset: &FinitePoset, members: &[ElemId]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for &a in members {
        for &b in members {
            if poset.lt(a, b) {
                out.push((poset.name(a).to_owned(), poset.name(b).to_owned()));
            }
        }
    }
    out
}

/// `{"support": ["p","q"], "values": ["p","q","p","q"], "fairness": 2}`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub support: Vec<String>,
    pub values: Vec<String>,
    #[serde(default)]
    pub fairness: usize,
}

impl ScheduleDoc {
    pub fn build(&self, poset: &Arc<FinitePoset>) -> Result<Schedule, FixtureError> {
        let names: Vec<&str> = self.support.iter().map(|s| s.as_str()).collect();
        let support = Segment::from_names(poset, &names)?;
        let values = self
            .values
            .iter()
            .map(|name| poset.elem(name))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Schedule::new(support, values, self.fairness)?)
    }

    pub fn of(schedule: &Schedule) -> ScheduleDoc {
        let poset = schedule.poset();
        ScheduleDoc {
            support: schedule.support().names(),
            values: schedule
                .values()
                .iter()
                .map(|&i| poset.name(i).to_owned())
                .collect(),
            fairness: schedule.fairness(),
        }
    }
}

/// `{"support": ["p","q"], "lt": [["p","q"]], "depth": 3, "points": ["p:010;q:110", ...]}`
///
/// The order relation defaults to an antichain when `lt` is absent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionDoc {
    pub support: Vec<String>,
    #[serde(default)]
    pub lt: Vec<(String, String)>,
    pub depth: usize,
    pub points: Vec<String>,
}

impl ConditionDoc {
    /// Builds self-contained: the poset is exactly the support.
    pub fn build(&self) -> Result<TreeSystem, FixtureError> {
        let poset = FinitePoset::new(self.support.clone(), &self.lt)?;
        self.build_in(&poset)
    }

    /// Builds against a given poset; the support names resolve within it.
    pub fn build_in(&self, poset: &Arc<FinitePoset>) -> Result<TreeSystem, FixtureError> {
        let names: Vec<&str> = self.support.iter().map(|s| s.as_str()).collect();
        let support = Segment::from_names(poset, &names)?;
        let points = self
            .points
            .iter()
            .map(|s| ShadowPoint::parse(&support, self.depth, s).map(|p| p.packed()))
            .collect::<Result<Vec<u64>, _>>()?;
        Ok(TreeSystem::new(support, self.depth, points)?)
    }

    pub fn of(sys: &TreeSystem) -> ConditionDoc {
        let poset = sys.support().poset();
        ConditionDoc {
            support: sys.support().names(),
            lt: lt_pairs(poset, &sys.support().iter().collect::<Vec<_>>()),
            depth: sys.depth(),
            points: sys.iter_points().map(|p| p.render()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleValuesDoc {
    pub values: Vec<String>,
    #[serde(default)]
    pub fairness: usize,
}

/// `{"support": [...], "lt": [...], "schedule": {"values": [...], "fairness": k},
///   "family": {"": cond, "0": cond, "1": cond, ...}}` with keys = bit strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemDoc {
    pub support: Vec<String>,
    #[serde(default)]
    pub lt: Vec<(String, String)>,
    pub schedule: ScheduleValuesDoc,
    pub family: BTreeMap<String, ConditionDoc>,
}

impl SystemDoc {
    pub fn build(&self) -> Result<SplittingSystem, FixtureError> {
        let poset = FinitePoset::new(self.support.clone(), &self.lt)?;
        let support = Segment::full(&poset);
        let values = self
            .schedule
            .values
            .iter()
            .map(|name| poset.elem(name))
            .collect::<Result<Vec<_>, _>>()?;
        let schedule = Schedule::new(support, values, self.schedule.fairness)?;
        let order = self
            .family
            .keys()
            .map(|k| k.len())
            .max()
            .ok_or_else(|| invalid("family is empty"))?;
        let mut family = BTreeMap::new();
        for (key, doc) in &self.family {
            let word: Word = key
                .parse()
                .map_err(|_| invalid(format!("family key {key:?} is not a bit string")))?;
            family.insert(word, doc.build_in(&poset)?);
        }
        Ok(SplittingSystem::from_family(schedule, order, family)?)
    }

    pub fn of(sys: &SplittingSystem) -> SystemDoc {
        let poset = sys.support().poset();
        SystemDoc {
            support: sys.support().names(),
            lt: lt_pairs(poset, &sys.support().iter().collect::<Vec<_>>()),
            schedule: ScheduleValuesDoc {
                values: sys
                    .schedule()
                    .values()
                    .iter()
                    .map(|&i| poset.name(i).to_owned())
                    .collect(),
                fairness: sys.schedule().fairness(),
            },
            family: sys
                .family()
                .iter()
                .map(|(u, member)| (u.to_string(), ConditionDoc::of(member)))
                .collect(),
        }
    }
}

/// `{"in_support": [...], "lt": [...], "in_depth": N, "out_depth": K,
///   "table": [["p:010;q:110","01"], ...]}`, or `"generator": "coord:q"`
/// instead of the table. An optional `"domain"` lists the domain's points;
/// it defaults to the full cube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub in_support: Vec<String>,
    #[serde(default)]
    pub lt: Vec<(String, String)>,
    pub in_depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

impl FunctionDoc {
    pub fn build(&self) -> Result<ShadowFunction, FixtureError> {
        let poset = FinitePoset::new(self.in_support.clone(), &self.lt)?;
        let support = Segment::full(&poset);
        let domain = match &self.domain {
            Some(points) => {
                let packed = points
                    .iter()
                    .map(|s| ShadowPoint::parse(&support, self.in_depth, s).map(|p| p.packed()))
                    .collect::<Result<Vec<u64>, _>>()?;
                TreeSystem::new(support.clone(), self.in_depth, packed)?
            }
            None => TreeSystem::full_cube(support.clone(), self.in_depth)?,
        };
        match (&self.table, &self.generator) {
            (Some(table), None) => {
                let out_depth = self
                    .out_depth
                    .ok_or_else(|| invalid("table form requires out_depth"))?;
                let mut values: Vec<Option<Word>> = vec![None; domain.len()];
                for (point, out) in table {
                    let p = ShadowPoint::parse(&support, self.in_depth, point)?;
                    let idx = domain
                        .points()
                        .binary_search(&p.packed())
                        .map_err(|_| invalid(format!("table point {point:?} not in domain")))?;
                    let word: Word = out
                        .parse()
                        .map_err(|_| invalid(format!("bad output value {out:?}")))?;
                    if values[idx].replace(word).is_some() {
                        return Err(invalid(format!("duplicate table point {point:?}")));
                    }
                }
                let values = values
                    .into_iter()
                    .collect::<Option<Vec<Word>>>()
                    .ok_or_else(|| invalid("table does not cover the domain"))?;
                Ok(ShadowFunction::new(domain, out_depth, values)?)
            }
            (None, Some(spec)) => Ok(ShadowFunction::from_generator(spec, domain)?),
            _ => Err(invalid("exactly one of table/generator is required")),
        }
    }

    pub fn of(f: &ShadowFunction) -> FunctionDoc {
        let domain = f.domain();
        let poset = domain.support().poset();
        FunctionDoc {
            in_support: domain.support().names(),
            lt: lt_pairs(poset, &domain.support().iter().collect::<Vec<_>>()),
            in_depth: domain.depth(),
            out_depth: Some(f.out_depth()),
            domain: Some(domain.iter_points().map(|p| p.render()).collect()),
            table: Some(
                domain
                    .iter_points()
                    .zip(f.values())
                    .map(|(p, w)| (p.render(), w.to_string()))
                    .collect(),
            ),
            generator: None,
        }
    }
}

fn segment_names(segment: &Segment) -> Vec<String> {
    segment.names()
}

fn segment_from_names(
    poset: &Arc<FinitePoset>,
    names: &[String],
) -> Result<Segment, FixtureError> {
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Ok(Segment::from_names(poset, &refs)?)
}

fn h_table_doc(table: &HTable, depth: usize) -> Vec<(String, String)> {
    table
        .entries
        .iter()
        .map(|(&packed, word)| {
            let point = ShadowPoint::new(table.segment.clone(), depth, packed)
                .expect("table key fits its segment");
            (point.render(), word.to_string())
        })
        .collect()
}

fn h_table_build(
    poset: &Arc<FinitePoset>,
    segment_names: &[String],
    depth: usize,
    entries: &[(String, String)],
) -> Result<HTable, FixtureError> {
    let segment = segment_from_names(poset, segment_names)?;
    let mut map = BTreeMap::new();
    for (point, word) in entries {
        let p = ShadowPoint::parse(&segment, depth, point)?;
        let w: Word = word
            .parse()
            .map_err(|_| invalid(format!("bad table value {word:?}")))?;
        map.insert(p.packed(), w);
    }
    Ok(HTable {
        segment,
        entries: map,
    })
}

fn e_table_doc(table: &ETable) -> Vec<(String, String)> {
    table
        .entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn e_table_build(
    poset: &Arc<FinitePoset>,
    element: &str,
    entries: &[(String, String)],
) -> Result<ETable, FixtureError> {
    let element = poset.elem(element)?;
    let mut map = BTreeMap::new();
    for (k, v) in entries {
        let key: Word = k
            .parse()
            .map_err(|_| invalid(format!("bad function value {k:?}")))?;
        let value: Word = v
            .parse()
            .map_err(|_| invalid(format!("bad coordinate value {v:?}")))?;
        map.insert(key, value);
    }
    Ok(ETable {
        element,
        entries: map,
    })
}

/// Serialized dichotomy certificate, tagged by kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateDoc {
    Reduced {
        segment: Vec<String>,
        carrier: ConditionDoc,
        h_table: Vec<(String, String)>,
    },
    Captured {
        element: String,
        carrier: ConditionDoc,
        e_table: Vec<(String, String)>,
    },
    Separated {
        segment: Vec<String>,
        left: ConditionDoc,
        right: ConditionDoc,
    },
    CapturedAll {
        segment: Vec<String>,
        carrier: ConditionDoc,
        e_tables: Vec<(String, Vec<(String, String)>)>,
    },
    Exhausted {
        budget: usize,
    },
}

impl CertificateDoc {
    pub fn of(cert: &Certificate) -> CertificateDoc {
        match cert {
            Certificate::Reduced {
                segment,
                carrier,
                table,
            } => CertificateDoc::Reduced {
                segment: segment_names(segment),
                carrier: ConditionDoc::of(carrier),
                h_table: h_table_doc(table, carrier.depth()),
            },
            Certificate::Captured {
                element,
                carrier,
                table,
            } => CertificateDoc::Captured {
                element: carrier.support().poset().name(*element).to_owned(),
                carrier: ConditionDoc::of(carrier),
                e_table: e_table_doc(table),
            },
            Certificate::Separated {
                segment,
                left,
                right,
            } => CertificateDoc::Separated {
                segment: segment_names(segment),
                left: ConditionDoc::of(left),
                right: ConditionDoc::of(right),
            },
            Certificate::CapturedAll {
                segment,
                carrier,
                tables,
            } => CertificateDoc::CapturedAll {
                segment: segment_names(segment),
                carrier: ConditionDoc::of(carrier),
                e_tables: tables
                    .iter()
                    .map(|t| {
                        (
                            carrier.support().poset().name(t.element).to_owned(),
                            e_table_doc(t),
                        )
                    })
                    .collect(),
            },
            Certificate::Exhausted { budget } => CertificateDoc::Exhausted { budget: *budget },
        }
    }

    /// Rebuilds against a poset (the carrier docs must resolve within it).
    pub fn build(&self, poset: &Arc<FinitePoset>) -> Result<Certificate, FixtureError> {
        Ok(match self {
            CertificateDoc::Reduced {
                segment,
                carrier,
                h_table,
            } => {
                let carrier = carrier.build_in(poset)?;
                Certificate::Reduced {
                    segment: segment_from_names(poset, segment)?,
                    table: h_table_build(poset, segment, carrier.depth(), h_table)?,
                    carrier,
                }
            }
            CertificateDoc::Captured {
                element,
                carrier,
                e_table,
            } => Certificate::Captured {
                element: poset.elem(element)?,
                carrier: carrier.build_in(poset)?,
                table: e_table_build(poset, element, e_table)?,
            },
            CertificateDoc::Separated {
                segment,
                left,
                right,
            } => Certificate::Separated {
                segment: segment_from_names(poset, segment)?,
                left: left.build_in(poset)?,
                right: right.build_in(poset)?,
            },
            CertificateDoc::CapturedAll {
                segment,
                carrier,
                e_tables,
            } => Certificate::CapturedAll {
                segment: segment_from_names(poset, segment)?,
                carrier: carrier.build_in(poset)?,
                tables: e_tables
                    .iter()
                    .map(|(element, entries)| e_table_build(poset, element, entries))
                    .collect::<Result<_, _>>()?,
            },
            CertificateDoc::Exhausted { budget } => Certificate::Exhausted { budget: *budget },
        })
    }
}
