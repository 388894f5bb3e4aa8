//! Clopen predicates over depth-N points: coordinate-prefix atoms combined
//! with `all_of` / `any_of` / `not`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Word;
use crate::poset::Segment;
use crate::shadow::{ShadowError, TreeSystem};

#[derive(Debug, Error)]
pub enum ClopenError {
    #[error("clopen atom names unknown or out-of-support coordinate {0:?}")]
    UnknownCoordinate(String),
    #[error("clopen prefix {prefix:?} is longer than the depth {depth}")]
    PrefixTooDeep { prefix: String, depth: usize },
    #[error("clopen prefix {0:?} is not a binary string")]
    BadPrefix(String),
}

/// A clopen subset of the cube, determined at depth ≤ N by prefix tests.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Clopen {
    Atom { coord: String, prefix: String },
    AllOf { all_of: Vec<Clopen> },
    AnyOf { any_of: Vec<Clopen> },
    Not { not: Box<Clopen> },
}

impl Clopen {
    /// The whole space.
    pub fn everything() -> Clopen {
        Clopen::AllOf { all_of: vec![] }
    }

    pub fn atom(coord: &str, prefix: &str) -> Clopen {
        Clopen::Atom {
            coord: coord.to_owned(),
            prefix: prefix.to_owned(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Clopen {
        Clopen::Not { not: Box::new(self) }
    }

    /// Resolves coordinate names against a support and pins the depth.
    pub fn compile(&self, support: &Segment, depth: usize) -> Result<CompiledClopen, ClopenError> {
        let node = self.compile_node(support, depth)?;
        Ok(CompiledClopen { node })
    }

    fn compile_node(&self, support: &Segment, depth: usize) -> Result<Node, ClopenError> {
        match self {
            Clopen::Atom { coord, prefix } => {
                let element = support
                    .poset()
                    .elem(coord)
                    .ok()
                    .filter(|e| support.contains(*e))
                    .ok_or_else(|| ClopenError::UnknownCoordinate(coord.clone()))?;
                let word: Word = prefix
                    .parse()
                    .map_err(|_| ClopenError::BadPrefix(prefix.clone()))?;
                if word.len() > depth {
                    return Err(ClopenError::PrefixTooDeep {
                        prefix: prefix.clone(),
                        depth,
                    });
                }
                let member = crate::shadow::member_index(support, element).unwrap();
                let m = support.len();
                // Shift so the prefix bits of the coordinate block line up.
                let shift = ((m - 1 - member) * depth + depth - word.len()) as u32;
                let mask = if word.is_empty() {
                    0
                } else {
                    (1u64 << word.len()) - 1
                };
                Ok(Node::Atom {
                    shift,
                    mask,
                    want: word.raw() as u64,
                })
            }
            Clopen::AllOf { all_of } => Ok(Node::All(
                all_of
                    .iter()
                    .map(|c| c.compile_node(support, depth))
                    .collect::<Result<_, _>>()?,
            )),
            Clopen::AnyOf { any_of } => Ok(Node::Any(
                any_of
                    .iter()
                    .map(|c| c.compile_node(support, depth))
                    .collect::<Result<_, _>>()?,
            )),
            Clopen::Not { not } => Ok(Node::Not(Box::new(not.compile_node(support, depth)?))),
        }
    }
}

#[derive(Debug)]
enum Node {
    Atom { shift: u32, mask: u64, want: u64 },
    All(Vec<Node>),
    Any(Vec<Node>),
    Not(Box<Node>),
}

impl Node {
    fn eval(&self, packed: u64) -> bool {
        match self {
            Node::Atom { shift, mask, want } => packed >> shift & mask == *want,
            Node::All(nodes) => nodes.iter().all(|n| n.eval(packed)),
            Node::Any(nodes) => nodes.iter().any(|n| n.eval(packed)),
            Node::Not(node) => !node.eval(packed),
        }
    }
}

/// A clopen predicate resolved against one support and depth.
#[derive(Debug)]
pub struct CompiledClopen {
    node: Node,
}

impl CompiledClopen {
    pub fn eval(&self, packed: u64) -> bool {
        self.node.eval(packed)
    }

    pub fn holds_on_all(&self, sys: &TreeSystem) -> bool {
        sys.points().iter().all(|&p| self.eval(p))
    }

    pub fn misses_all(&self, sys: &TreeSystem) -> bool {
        sys.points().iter().all(|&p| !self.eval(p))
    }
}

/// Restricts a shadow to the points satisfying the predicate, if any.
pub fn filter_points(sys: &TreeSystem, pred: &CompiledClopen) -> Result<TreeSystem, ShadowError> {
    let points: Vec<u64> = sys.points().iter().copied().filter(|&p| pred.eval(p)).collect();
    TreeSystem::new(sys.support().clone(), sys.depth(), points)
}
