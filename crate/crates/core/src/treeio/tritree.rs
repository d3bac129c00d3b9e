//! Three-leaf trees and their place on the 3-spider.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::newick::{parse_newick, NewickError, NewickTree};
use crate::geometry::BookPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error(transparent)]
    Newick(#[from] NewickError),
    #[error("tree taxa {tree:?} do not match the assignment taxa {assignment:?}")]
    TaxaMismatch { tree: [String; 3], assignment: [String; 3] },
    #[error("invalid leg assignment: {0}")]
    InvalidAssignment(String),
}

/// A rooted tree on three taxa with at most one internal edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriTree {
    /// Sorted taxon names.
    pub taxa: [String; 3],
    /// Sorted pair joined by the internal edge; `None` for the star tree.
    pub cherry: Option<[String; 2]>,
    pub internal_length: f64,
    pub leaf_lengths: BTreeMap<String, f64>,
}

fn sorted3(mut t: [String; 3]) -> [String; 3] {
    t.sort();
    t
}

fn sorted2(mut t: [String; 2]) -> [String; 2] {
    t.sort();
    t
}

/// Induced three-leaf tree of `taxa` in a larger tree, plus warnings for
/// missing branch lengths on the edges that were used.
///
/// The cherry is the pair whose most recent common ancestor is deepest. Its
/// internal length is the summed branch length from that ancestor up to the
/// ancestor of all three taxa. When all three pairs share one ancestor, or
/// the internal length is zero, the result is the star tree.
pub fn induce_tritree(tree: &NewickTree, taxa: [&str; 3]) -> Result<(TriTree, Vec<String>), TreeError> {
    let nodes = tree.nodes();
    let mut leaf = [0usize; 3];
    for (slot, name) in leaf.iter_mut().zip(taxa) {
        *slot = tree.find_leaf(name).ok_or_else(|| NewickError::MissingTaxon { name: name.to_string() })?;
    }
    let ancestors = |mut v: usize| {
        let mut out = vec![v];
        while let Some(p) = nodes[v].parent {
            out.push(p);
            v = p;
        }
        out.reverse();
        out
    };
    let paths: Vec<Vec<usize>> = leaf.iter().map(|&v| ancestors(v)).collect();
    // Depth of the common ancestor of two leaves, counted in edges from the root.
    let lca_depth = |a: usize, b: usize| {
        paths[a]
            .iter()
            .zip(&paths[b])
            .take_while(|(x, y)| x == y)
            .count()
            - 1
    };
    let pairs = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
    let depths: Vec<usize> = pairs.iter().map(|&(a, b, _)| lca_depth(a, b)).collect();
    let top = *depths.iter().min().unwrap();
    let deepest = (0..3).max_by_key(|&i| (depths[i], std::cmp::Reverse(i))).unwrap();

    let mut warnings = Vec::new();
    let mut sum_path = |path: &[usize], from: usize, to: usize| -> f64 {
        path[from + 1..=to]
            .iter()
            .map(|&v| match nodes[v].length {
                Some(l) => l,
                None => {
                    warnings.push(format!(
                        "missing branch length at byte {} treated as 0",
                        nodes[v].position
                    ));
                    0.0
                }
            })
            .sum()
    };

    let (a, b, c) = pairs[deepest];
    let names: Vec<String> = taxa.iter().map(|s| s.to_string()).collect();
    let mut leaf_lengths = BTreeMap::new();
    let (cherry, internal_length) = if depths[deepest] > top {
        let join = depths[deepest];
        let internal = sum_path(&paths[a], top, join);
        leaf_lengths.insert(names[a].clone(), sum_path(&paths[a], join, paths[a].len() - 1));
        leaf_lengths.insert(names[b].clone(), sum_path(&paths[b], join, paths[b].len() - 1));
        leaf_lengths.insert(names[c].clone(), sum_path(&paths[c], top, paths[c].len() - 1));
        (Some(sorted2([names[a].clone(), names[b].clone()])), internal)
    } else {
        for i in 0..3 {
            leaf_lengths.insert(names[i].clone(), sum_path(&paths[i], top, paths[i].len() - 1));
        }
        (None, 0.0)
    };
    let tri = if internal_length > 0.0 {
        TriTree {
            taxa: sorted3([names[0].clone(), names[1].clone(), names[2].clone()]),
            cherry,
            internal_length,
            leaf_lengths,
        }
    } else {
        TriTree {
            taxa: sorted3([names[0].clone(), names[1].clone(), names[2].clone()]),
            cherry: None,
            internal_length: 0.0,
            leaf_lengths,
        }
    };
    Ok((tri, warnings))
}

/// Parses a Newick tree with exactly three leaves.
pub fn parse_newick_tritree(text: &str) -> Result<TriTree, TreeError> {
    let tree = parse_newick(text.as_bytes())?;
    let names = tree.leaf_names();
    if names.len() != 3 {
        return Err(NewickError::LeafCount { found: names.len() }.into());
    }
    Ok(induce_tritree(&tree, [names[0], names[1], names[2]])?.0)
}

fn format_length(v: f64) -> String {
    format!("{v}")
}

fn quote(name: &str) -> String {
    if name.bytes().any(|b| b.is_ascii_whitespace() || b"()[]':;,".contains(&b)) {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

/// Writes the tree as Newick with every branch length present.
pub fn emit_newick(t: &TriTree) -> String {
    let leaf = |name: &str| format!("{}:{}", quote(name), format_length(t.leaf_lengths.get(name).copied().unwrap_or(0.0)));
    match &t.cherry {
        Some([a, b]) => {
            let c = t.taxa.iter().find(|x| *x != a && *x != b).expect("cherry is a subset of the taxa");
            format!("(({},{}):{},{});", leaf(a), leaf(b), format_length(t.internal_length), leaf(c))
        }
        None => format!("({},{},{});", leaf(&t.taxa[0]), leaf(&t.taxa[1]), leaf(&t.taxa[2])),
    }
}

/// Ordered taxa and the cherry-to-leg map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAssignment", into = "RawAssignment")]
pub struct LegAssignment {
    taxa: [String; 3],
    /// `legs[k]` is the cherry on leg `k + 1`.
    legs: [[String; 2]; 3],
}

#[derive(Serialize, Deserialize)]
struct RawAssignment {
    taxa: [String; 3],
    legs: [[String; 2]; 3],
}

impl TryFrom<RawAssignment> for LegAssignment {
    type Error = TreeError;
    fn try_from(raw: RawAssignment) -> Result<Self, TreeError> {
        LegAssignment::new(raw.taxa, raw.legs)
    }
}

impl From<LegAssignment> for RawAssignment {
    fn from(a: LegAssignment) -> Self {
        RawAssignment {
            taxa: a.taxa,
            legs: a.legs,
        }
    }
}

impl LegAssignment {
    /// Explicit map: `legs[k]` is the cherry placed on leg `k + 1`.
    pub fn new(taxa: [String; 3], legs: [[String; 2]; 3]) -> Result<Self, TreeError> {
        let set = sorted3(taxa.clone());
        if set[0] == set[1] || set[1] == set[2] {
            return Err(TreeError::InvalidAssignment("taxa must be distinct".into()));
        }
        let legs = legs.map(sorted2);
        for pair in &legs {
            if pair[0] == pair[1] || !pair.iter().all(|x| taxa.contains(x)) {
                return Err(TreeError::InvalidAssignment(format!("{pair:?} is not a pair of the taxa")));
            }
        }
        if legs[0] == legs[1] || legs[0] == legs[2] || legs[1] == legs[2] {
            return Err(TreeError::InvalidAssignment("each cherry must go to exactly one leg".into()));
        }
        Ok(LegAssignment { taxa, legs })
    }

    /// Lexicographic order `t1 < t2 < t3` with `{t1,t2}`, `{t1,t3}`, `{t2,t3}`
    /// on legs 1, 2, 3.
    pub fn lexicographic(taxa: [String; 3]) -> Result<Self, TreeError> {
        let [t1, t2, t3] = sorted3(taxa);
        LegAssignment::new(
            [t1.clone(), t2.clone(), t3.clone()],
            [[t1.clone(), t2.clone()], [t1, t3.clone()], [t2, t3]],
        )
    }

    pub fn taxa(&self) -> &[String; 3] {
        &self.taxa
    }

    pub fn leg_of(&self, cherry: &[String; 2]) -> Option<usize> {
        let c = sorted2(cherry.clone());
        self.legs.iter().position(|p| *p == c).map(|k| k + 1)
    }
}

/// The spider point of a tree: its internal length on the cherry's leg, or
/// the centre for the star tree.
pub fn tritree_to_spider(t: &TriTree, a: &LegAssignment) -> Result<BookPoint, TreeError> {
    if t.taxa != sorted3(a.taxa.clone()) {
        return Err(TreeError::TaxaMismatch {
            tree: t.taxa.clone(),
            assignment: a.taxa.clone(),
        });
    }
    match &t.cherry {
        None => Ok(BookPoint::centre()),
        Some(c) => {
            let leg = a.leg_of(c).expect("a valid assignment covers every cherry");
            Ok(BookPoint::leg(leg, t.internal_length))
        }
    }
}
