//! Random ground-truth trees and the streams they generate.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tree::snapshot::Reader;
use crate::tree::{Example, NodeId, Region, SplitNode};

const MAGIC: &str = "ctree-ground-truth";
const VERSION: u32 = 1;

/// Leaf class-1 probability used by the synthetic protocol.
pub const DEFAULT_Q: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthNode {
    Internal(SplitNode),
    Leaf { positive_rate: f64 },
}

/// A labeled partition of the unit cube. Each leaf owns the hyper-rectangle
/// its path carves out and emits label 1 with its own probability.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTree {
    num_attributes: usize,
    nodes: Vec<TruthNode>,
    regions: Vec<Region>,
    leaves: Vec<NodeId>,
}

/// Leaf budgets of the two subtrees when `num_leaves` are split at `x`.
pub fn split_budget(num_leaves: usize, x: f64) -> (usize, usize) {
    let left = ((num_leaves as f64 * x).floor() as usize).clamp(1, num_leaves - 1);
    (left, num_leaves - left)
}

/// Grows a random binary tree with exactly `num_leaves` leaves over `[0,1]^d`.
/// Left leaves emit label 1 with probability `q`, right leaves with `1 - q`;
/// a lone root leaf counts as a left leaf.
pub fn rand_cbt<R: Rng + ?Sized>(num_leaves: usize, d: usize, q: f64, rng: &mut R) -> Result<GroundTruthTree> {
    if num_leaves == 0 || d == 0 {
        return Err(Error::domain("rand_cbt needs at least one leaf and one attribute"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
    }
    let mut nodes = Vec::with_capacity(2 * num_leaves - 1);
    grow(&mut nodes, num_leaves, Region::unit(d), true, q, rng);
    Ok(GroundTruthTree::from_nodes(d, nodes))
}

fn grow<R: Rng + ?Sized>(
    nodes: &mut Vec<TruthNode>,
    num_leaves: usize,
    region: Region,
    is_left: bool,
    q: f64,
    rng: &mut R,
) -> NodeId {
    let id = NodeId(nodes.len());
    if num_leaves == 1 {
        let positive_rate = if is_left { q } else { 1.0 - q };
        nodes.push(TruthNode::Leaf { positive_rate });
        return id;
    }
    let (left_budget, right_budget) = split_budget(num_leaves, rng.random::<f64>());
    let attribute = rng.random_range(0..region.dim());
    let (lo, hi) = (region.lower[attribute], region.upper[attribute]);
    let threshold = lo + (hi - lo) * rng.random::<f64>();
    nodes.push(TruthNode::Leaf { positive_rate: 0.0 });
    let (left_region, right_region) = region.cut(attribute, threshold);
    let left = grow(nodes, left_budget, left_region, true, q, rng);
    let right = grow(nodes, right_budget, right_region, false, q, rng);
    nodes[id.0] = TruthNode::Internal(SplitNode {
        attribute,
        threshold,
        left,
        right,
    });
    id
}

impl GroundTruthTree {
    fn from_nodes(num_attributes: usize, nodes: Vec<TruthNode>) -> Self {
        let mut regions = vec![Region::unit(num_attributes); nodes.len()];
        let mut leaves = Vec::new();
        let mut stack = vec![NodeId(0)];
        while let Some(id) = stack.pop() {
            match nodes[id.0] {
                TruthNode::Internal(split) => {
                    let (l, r) = regions[id.0].cut(split.attribute, split.threshold);
                    regions[split.left.0] = l;
                    regions[split.right.0] = r;
                    stack.push(split.right);
                    stack.push(split.left);
                }
                TruthNode::Leaf { .. } => leaves.push(id),
            }
        }
        leaves.sort();
        GroundTruthTree {
            num_attributes,
            nodes,
            regions,
            leaves,
        }
    }

    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    pub fn nodes(&self) -> &[TruthNode] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn region(&self, id: NodeId) -> &Region {
        &self.regions[id.0]
    }

    pub fn positive_rate(&self, leaf: NodeId) -> f64 {
        match self.nodes[leaf.0] {
            TruthNode::Leaf { positive_rate } => positive_rate,
            TruthNode::Internal(_) => panic!("node {} is not a leaf", leaf.0),
        }
    }

    pub fn leaf_of(&self, x: &[f64]) -> NodeId {
        let mut id = NodeId(0);
        while let TruthNode::Internal(split) = &self.nodes[id.0] {
            id = if split.goes_right(x) { split.right } else { split.left };
        }
        id
    }

    /// Thresholds of every internal node that tests `attribute`.
    pub fn thresholds_on(&self, attribute: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TruthNode::Internal(s) if s.attribute == attribute => Some(s.threshold),
                _ => None,
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Probability mass of `region` and of `region ∩ {Y = 1}` under the
    /// stream distribution, where every leaf carries the same weight.
    pub fn region_mass(&self, region: &Region) -> (f64, f64) {
        let weight = 1.0 / self.leaves.len() as f64;
        let mut mass = 0.0;
        let mut positive = 0.0;
        for &leaf in &self.leaves {
            let own = &self.regions[leaf.0];
            let volume = own.volume();
            if volume == 0.0 {
                continue;
            }
            let share = weight * own.intersect(region).volume() / volume;
            mass += share;
            positive += share * self.positive_rate(leaf);
        }
        (mass, positive)
    }

    /// `Pr(Y = 1 | X ∈ region)`, `None` for a region of zero mass.
    pub fn region_positive_rate(&self, region: &Region) -> Option<f64> {
        let (mass, positive) = self.region_mass(region);
        (mass > 0.0).then(|| positive / mass)
    }

    /// Accuracy of predicting every leaf's majority label.
    pub fn bayes_accuracy(&self) -> f64 {
        let sum: f64 = self
            .leaves
            .iter()
            .map(|&l| {
                let p = self.positive_rate(l);
                p.max(1.0 - p)
            })
            .sum();
        sum / self.leaves.len() as f64
    }

    /// One labeled point drawn uniformly from `leaf`'s region.
    pub fn sample_in<R: Rng + ?Sized>(&self, leaf: NodeId, rng: &mut R) -> Example {
        let region = &self.regions[leaf.0];
        let features = region
            .lower
            .iter()
            .zip(&region.upper)
            .map(|(&lo, &hi)| loop {
                // (lo, hi], matching the routing rule x > threshold
                let x = hi - (hi - lo) * rng.random::<f64>();
                if x > lo || hi <= lo {
                    break x;
                }
            })
            .collect();
        let label = rng.random_bool(self.positive_rate(leaf));
        Example::labeled(features, label)
    }

    /// One draw from the stream distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Example {
        let leaf = self.leaves[rng.random_range(0..self.leaves.len())];
        self.sample_in(leaf, rng)
    }

    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC} {VERSION}").unwrap();
        writeln!(out, "attributes {}", self.num_attributes).unwrap();
        writeln!(out, "nodes {}", self.nodes.len()).unwrap();
        for node in &self.nodes {
            match node {
                TruthNode::Internal(s) => writeln!(
                    out,
                    "split {} {} {} {}",
                    s.attribute, s.threshold, s.left.0, s.right.0
                ),
                TruthNode::Leaf { positive_rate } => writeln!(out, "leaf {positive_rate}"),
            }
            .unwrap();
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut reader = Reader::new(text);
        reader.header(MAGIC, VERSION)?;
        let d: usize = reader.field("attributes")?;
        let count: usize = reader.field("nodes")?;
        if d == 0 || count.is_multiple_of(2) {
            return Err(reader.error("malformed tree shape"));
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let tokens = reader.next_tokens()?;
            let node = match tokens.as_slice() {
                ["split", a, thr, l, r] => {
                    let split = SplitNode {
                        attribute: reader.parse(a)?,
                        threshold: reader.parse(thr)?,
                        left: NodeId(reader.parse(l)?),
                        right: NodeId(reader.parse(r)?),
                    };
                    if split.attribute >= d || split.left.0 >= count || split.right.0 >= count {
                        return Err(reader.error("split refers outside the tree"));
                    }
                    TruthNode::Internal(split)
                }
                ["leaf", p] => {
                    let positive_rate: f64 = reader.parse(p)?;
                    if !(0.0..=1.0).contains(&positive_rate) {
                        return Err(reader.error("leaf probability outside [0, 1]"));
                    }
                    TruthNode::Leaf { positive_rate }
                }
                _ => return Err(reader.error(format!("expected a node, found {:?}", tokens[0]))),
            };
            nodes.push(node);
        }
        reader.finish()?;
        let tree = GroundTruthTree::from_nodes(d, nodes);
        if tree.leaves.len() * 2 - 1 != count {
            return Err(Error::Snapshot {
                line: 0,
                message: "nodes are not all reachable from the root".into(),
            });
        }
        Ok(tree)
    }
}

/// `examples_per_leaf` points from every leaf, pooled and shuffled.
pub fn sample_stream<R: Rng + ?Sized>(
    tree: &GroundTruthTree,
    examples_per_leaf: usize,
    rng: &mut R,
) -> Vec<Example> {
    let mut out = Vec::with_capacity(examples_per_leaf * tree.num_leaves());
    for &leaf in tree.leaves() {
        for _ in 0..examples_per_leaf {
            out.push(tree.sample_in(leaf, rng));
        }
    }
    out.shuffle(rng);
    out
}
