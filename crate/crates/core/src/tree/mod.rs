//! The incremental learner.
//!
//! A [`Tree`] starts as a single leaf. Each labeled example is routed to a
//! leaf and folded into that leaf's statistics; every `grace_period` labeled
//! examples an impure leaf re-evaluates its candidate splits and expands when
//! the best one is separated from the runner-up by more than twice the
//! configured interval. H-Tree, CorrH-Tree and C-Tree differ only in their
//! [`LearnerConfig`].

mod config;
mod leaf;
pub(crate) mod snapshot;
mod split;
mod suboptimal;

pub use config::{DeltaMode, LearnerConfig, SplitBound, DEFAULT_GRACE_PERIOD, DEFAULT_MAX_VALUES};
pub use leaf::{AttributeObserver, LeafState};
pub use split::{
    attempt_split, decide_split, enumerate_candidates, split_epsilon, Candidate, SplitAttempt,
    SplitDecision,
};
pub use suboptimal::{suboptimal_split_rate, suboptimal_splits, SplitAudit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stream item. `label` is `None` when it has not been revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: Option<bool>,
}

impl Example {
    pub fn labeled(features: Vec<f64>, label: bool) -> Self {
        Example {
            features,
            label: Some(label),
        }
    }

    pub fn unlabeled(features: Vec<f64>) -> Self {
        Example {
            features,
            label: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// Axis-aligned test: examples with `x[attribute] > threshold` go right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitNode {
    pub attribute: usize,
    pub threshold: f64,
    pub left: NodeId,
    pub right: NodeId,
}

impl SplitNode {
    pub fn goes_right(&self, features: &[f64]) -> bool {
        features[self.attribute] > self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal(SplitNode),
    Leaf(LeafState),
}

/// Hyper-rectangle `lower < x <= upper`, the set of points a node receives.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn unbounded(d: usize) -> Self {
        Region {
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    pub fn unit(d: usize) -> Self {
        Region {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// The two halves produced by cutting at `threshold` on `attribute`.
    pub fn cut(&self, attribute: usize, threshold: f64) -> (Region, Region) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[attribute] = left.upper[attribute].min(threshold);
        right.lower[attribute] = right.lower[attribute].max(threshold);
        (left, right)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.max(*b))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a.min(*b))
                .collect(),
        }
    }

    /// Lebesgue volume; zero for empty regions.
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo).max(0.0))
            .product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| v > lo && v <= hi)
    }
}

/// Reported by [`Tree::observe`] when a leaf is expanded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEvent {
    pub node: NodeId,
    pub attribute: usize,
    pub threshold: f64,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    config: LearnerConfig,
    num_attributes: usize,
    nodes: Vec<Node>,
    split_evaluations: u64,
}

impl Tree {
    pub fn new(num_attributes: usize, config: LearnerConfig) -> Result<Self> {
        if num_attributes == 0 {
            return Err(Error::domain("a tree needs at least one attribute"));
        }
        config.validate()?;
        let root = LeafState::new(num_attributes, 0, false, config.max_values);
        Ok(Tree {
            config,
            num_attributes,
            nodes: vec![Node::Leaf(root)],
            split_evaluations: 0,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Every split adds one internal node and two leaves.
    pub fn num_leaves(&self) -> usize {
        self.nodes.len().div_ceil(2)
    }

    /// Split evaluations run so far, across all leaves.
    pub fn split_evaluations(&self) -> u64 {
        self.split_evaluations
    }

    /// Back to a single empty leaf with the same configuration.
    pub fn reset(&mut self) {
        let root = LeafState::new(self.num_attributes, 0, false, self.config.max_values);
        self.nodes = vec![Node::Leaf(root)];
        self.split_evaluations = 0;
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.num_attributes {
            return Err(Error::DimensionMismatch {
                expected: self.num_attributes,
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Leaf reached by `features`. Panics if `features` is shorter than the
    /// tree's dimension; use [`Tree::observe`] for checked input.
    pub fn route(&self, features: &[f64]) -> NodeId {
        let mut id = NodeId(0);
        loop {
            match &self.nodes[id.0] {
                Node::Leaf(_) => return id,
                Node::Internal(split) => {
                    id = if split.goes_right(features) {
                        split.right
                    } else {
                        split.left
                    };
                }
            }
        }
    }

    /// Nodes visited from the root down to the leaf, inclusive.
    pub fn route_path(&self, features: &[f64]) -> Vec<NodeId> {
        let mut path = vec![NodeId(0)];
        let mut id = NodeId(0);
        while let Node::Internal(split) = &self.nodes[id.0] {
            id = if split.goes_right(features) {
                split.right
            } else {
                split.left
            };
            path.push(id);
        }
        path
    }

    pub fn leaf(&self, id: NodeId) -> Option<&LeafState> {
        match &self.nodes[id.0] {
            Node::Leaf(leaf) => Some(leaf),
            Node::Internal(_) => None,
        }
    }

    /// State of the leaf that `features` routes to.
    pub fn leaf_for(&self, features: &[f64]) -> &LeafState {
        match &self.nodes[self.route(features).0] {
            Node::Leaf(leaf) => leaf,
            Node::Internal(_) => unreachable!("route always ends at a leaf"),
        }
    }

    pub fn predict(&self, features: &[f64]) -> bool {
        self.leaf_for(features).predict()
    }

    /// Region of `base` that ends up at the leaf reached by `features`.
    pub fn region_of(&self, features: &[f64], base: &Region) -> Region {
        let mut region = base.clone();
        let mut id = NodeId(0);
        while let Node::Internal(split) = &self.nodes[id.0] {
            let (left, right) = region.cut(split.attribute, split.threshold);
            if split.goes_right(features) {
                region = right;
                id = split.right;
            } else {
                region = left;
                id = split.left;
            }
        }
        region
    }

    /// Every node with the part of `base` it receives, in depth-first order.
    pub fn regions(&self, base: &Region) -> Vec<(NodeId, Region)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(NodeId(0), base.clone())];
        while let Some((id, region)) = stack.pop() {
            if let Node::Internal(split) = &self.nodes[id.0] {
                let (left, right) = region.cut(split.attribute, split.threshold);
                stack.push((split.right, right));
                stack.push((split.left, left));
            }
            out.push((id, region));
        }
        out
    }

    /// Folds one labeled example into its leaf at stream time `t` and runs
    /// a split evaluation when the leaf's grace period has elapsed.
    pub fn observe(&mut self, features: &[f64], label: bool, t: u64) -> Result<Option<SplitEvent>> {
        self.check_dim(features)?;
        if let Some(i) = features.iter().position(|x| x.is_nan()) {
            return Err(Error::domain(format!("feature {i} is NaN")));
        }
        let id = self.route(features);
        let Node::Leaf(leaf) = &mut self.nodes[id.0] else {
            unreachable!("route always ends at a leaf");
        };
        leaf.record(features, label);
        if leaf.is_pure() || leaf.since_last_eval < self.config.grace_period {
            return Ok(None);
        }
        leaf.since_last_eval = 0;
        self.split_evaluations += 1;
        match attempt_split(leaf, t.max(1), &self.config).decision {
            SplitDecision::NoSplit => Ok(None),
            SplitDecision::Split {
                attribute,
                threshold,
            } => Ok(Some(self.expand(id, attribute, threshold))),
        }
    }

    fn expand(&mut self, id: NodeId, attribute: usize, threshold: f64) -> SplitEvent {
        let (depth, majority) = match &self.nodes[id.0] {
            Node::Leaf(leaf) => (leaf.depth, leaf.predict()),
            Node::Internal(_) => unreachable!("only leaves are expanded"),
        };
        let left = NodeId(self.nodes.len());
        let right = NodeId(self.nodes.len() + 1);
        for _ in 0..2 {
            self.nodes.push(Node::Leaf(LeafState::new(
                self.num_attributes,
                depth + 1,
                majority,
                self.config.max_values,
            )));
        }
        self.nodes[id.0] = Node::Internal(SplitNode {
            attribute,
            threshold,
            left,
            right,
        });
        SplitEvent {
            node: id,
            attribute,
            threshold,
            depth,
        }
    }

    /// Maximum leaf depth.
    pub fn depth(&self) -> u32 {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(leaf) => Some(leaf.depth),
                Node::Internal(_) => None,
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        let mut tree = Tree::new(2, LearnerConfig::c_tree(1.0)).unwrap();
        tree.expand(NodeId(0), 0, 0.5);
        tree
    }

    #[test]
    fn single_node_routes_everything_to_root() {
        let tree = Tree::new(3, LearnerConfig::default()).unwrap();
        for x in [[0.0, 0.0, 0.0], [1e9, -1e9, 0.5]] {
            assert_eq!(tree.route(&x), NodeId(0));
        }
        assert_eq!(tree.num_leaves(), 1);
        assert!(!tree.predict(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn routing_rule() {
        let tree = stump();
        let Node::Internal(split) = tree.node(NodeId(0)) else { panic!() };
        assert_eq!(tree.route(&[0.7, 0.0]), split.right);
        assert_eq!(tree.route(&[0.5, 0.0]), split.left);
        assert_eq!(tree.route(&[0.2, 9.0]), split.left);
    }

    #[test]
    fn depth_two_quadrants() {
        // root on x0 at 0.5, then x1 at 0.5 on both sides
        let mut tree = stump();
        tree.expand(NodeId(1), 1, 0.5);
        tree.expand(NodeId(2), 1, 0.5);
        // hand-routed: node ids 3/4 under left (x0 <= .5), 5/6 under right
        let table = [
            ([0.25, 0.25], NodeId(3)),
            ([0.25, 0.75], NodeId(4)),
            ([0.75, 0.25], NodeId(5)),
            ([0.75, 0.75], NodeId(6)),
        ];
        for (x, expected) in table {
            assert_eq!(tree.route(&x), expected, "{x:?}");
            assert_eq!(tree.route_path(&x).len(), 3);
        }
        assert_eq!(tree.num_leaves(), 4);
        assert_eq!(tree.depth(), 2);
        let region = tree.region_of(&[0.75, 0.25], &Region::unit(2));
        assert_eq!(region, Region { lower: vec![0.5, 0.0], upper: vec![1.0, 0.5] });
        let total: f64 = tree
            .regions(&Region::unit(2))
            .iter()
            .filter(|(id, _)| tree.leaf(*id).is_some())
            .map(|(_, r)| r.volume())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fresh_leaves_inherit_parent_majority() {
        let mut tree = Tree::new(1, LearnerConfig::c_tree(1.0)).unwrap();
        for _ in 0..3 {
            tree.observe(&[0.1], true, 1).unwrap();
        }
        tree.observe(&[0.9], false, 4).unwrap();
        tree.expand(NodeId(0), 0, 0.5);
        assert!(tree.predict(&[0.9]));
        let leaf = tree.leaf_for(&[0.9]);
        assert_eq!(leaf.m(), 0);
        assert_eq!(leaf.depth, 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut tree = Tree::new(2, LearnerConfig::default()).unwrap();
        assert!(matches!(
            tree.observe(&[1.0], true, 1),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(tree.observe(&[f64::NAN, 1.0], true, 1).is_err());
    }

    #[test]
    fn pure_leaf_never_splits() {
        let config = LearnerConfig::c_tree(1e-6).with_grace_period(1).with_tau(1.0);
        let mut tree = Tree::new(1, config).unwrap();
        for t in 1..=5000u64 {
            tree.observe(&[t as f64], true, t).unwrap();
        }
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.split_evaluations(), 0);
    }

    #[test]
    fn grace_period_counts_labeled_examples() {
        // bound so wide it never splits
        let config = LearnerConfig::c_tree(1e6).with_grace_period(100);
        let mut tree = Tree::new(1, config).unwrap();
        for t in 1..=150u64 {
            tree.observe(&[(t % 7) as f64], t % 2 == 0, t).unwrap();
        }
        assert_eq!(tree.split_evaluations(), 1);
        assert_eq!(tree.num_leaves(), 1);
    }

    #[test]
    fn reset_restores_single_leaf() {
        let mut tree = stump();
        tree.reset();
        assert_eq!(tree.num_nodes(), 1);
        assert_eq!(tree.leaf_for(&[0.0, 0.0]).m(), 0);
    }
}
