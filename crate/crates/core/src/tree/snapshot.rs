//! Plain-text tree snapshots.
//!
//! ```text
//! ctree-tree 1
//! attributes 2
//! criterion gini
//! bound heuristic 0.5
//! delta 1/t
//! grace 100
//! tau 0
//! max-values 1000
//! evaluations 1
//! nodes 3
//! split 0 0.5 1 2
//! leaf 1 1 0 2 5
//! values 0 1000 2 0.6:1,2 0.9:1,3
//! values 1 1000 0
//! leaf 1 1 0 0 0
//! ...
//! ```
//!
//! A `leaf` line carries `depth fallback since_last_eval negatives positives`
//! and is followed by one `values` line per attribute. Floats are written in
//! shortest round-trip form, so reading a snapshot back gives an identical tree.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::criteria::CriterionKind;
use crate::error::{Error, Result};

use super::config::{DeltaMode, LearnerConfig, SplitBound};
use super::leaf::{AttributeObserver, LeafState};
use super::{Node, NodeId, SplitNode, Tree};

const TREE_MAGIC: &str = "ctree-tree";
const TREE_VERSION: u32 = 1;

/// Line-oriented reader shared by the snapshot formats. Blank lines and
/// lines starting with `#` are skipped.
pub(crate) struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Reader {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Snapshot {
            line: self.line,
            message: message.into(),
        }
    }

    pub(crate) fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, raw) in self.lines.by_ref() {
            self.line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(trimmed.split_whitespace().collect());
        }
        Err(self.error("unexpected end of snapshot"))
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    pub(crate) fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let tokens = self.next_tokens()?;
        if tokens[0] != key {
            return Err(self.error(format!("expected {key:?}, found {:?}", tokens[0])));
        }
        Ok(tokens[1..].to_vec())
    }

    /// `key value` with exactly one value.
    pub(crate) fn field<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let rest = self.expect(key)?;
        if rest.len() != 1 {
            return Err(self.error(format!("{key} takes one value")));
        }
        self.parse(rest[0])
    }

    pub(crate) fn parse<T: FromStr>(&self, token: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.error(format!("cannot parse {token:?}")))
    }

    pub(crate) fn header(&mut self, magic: &str, version: u32) -> Result<()> {
        let found: u32 = self.field(magic)?;
        if found != version {
            return Err(self.error(format!("unsupported {magic} version {found}")));
        }
        Ok(())
    }

    pub(crate) fn finish(&mut self) -> Result<()> {
        match self.next_tokens() {
            Ok(tokens) => Err(self.error(format!("trailing content {:?}", tokens[0]))),
            Err(_) => Ok(()),
        }
    }
}

fn write_bound(out: &mut String, bound: &SplitBound) {
    match bound {
        SplitBound::CTreeHeuristic { c } => writeln!(out, "bound heuristic {c}"),
        SplitBound::CTreeExact => writeln!(out, "bound exact"),
        SplitBound::Hoeffding { range: Some(r) } => writeln!(out, "bound hoeffding {r}"),
        SplitBound::Hoeffding { range: None } => writeln!(out, "bound hoeffding -"),
        SplitBound::McDiarmid => writeln!(out, "bound mcdiarmid"),
    }
    .unwrap();
}

fn read_bound(reader: &mut Reader<'_>) -> Result<SplitBound> {
    let rest = reader.expect("bound")?;
    match rest.as_slice() {
        ["heuristic", c] => Ok(SplitBound::CTreeHeuristic { c: reader.parse(c)? }),
        ["exact"] => Ok(SplitBound::CTreeExact),
        ["hoeffding", "-"] => Ok(SplitBound::Hoeffding { range: None }),
        ["hoeffding", r] => Ok(SplitBound::Hoeffding {
            range: Some(reader.parse(r)?),
        }),
        ["mcdiarmid"] => Ok(SplitBound::McDiarmid),
        _ => Err(reader.error(format!("unknown bound {rest:?}"))),
    }
}

fn write_leaf(out: &mut String, leaf: &LeafState) {
    writeln!(
        out,
        "leaf {} {} {} {} {}",
        leaf.depth,
        u8::from(leaf.fallback),
        leaf.since_last_eval,
        leaf.counts[0],
        leaf.counts[1]
    )
    .unwrap();
    for (a, observer) in leaf.observers.iter().enumerate() {
        write!(out, "values {a} {} {}", observer.capacity(), observer.len()).unwrap();
        for (value, [neg, pos]) in observer.iter() {
            write!(out, " {value}:{neg},{pos}").unwrap();
        }
        out.push('\n');
    }
}

fn read_flag(reader: &Reader<'_>, token: &str) -> Result<bool> {
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(reader.error(format!("expected 0 or 1, found {token:?}"))),
    }
}

fn read_leaf(reader: &mut Reader<'_>, rest: &[&str], d: usize) -> Result<LeafState> {
    let [depth, fallback, since, neg, pos] = rest else {
        return Err(reader.error("leaf takes 5 values"));
    };
    let mut leaf = LeafState::new(0, reader.parse(depth)?, read_flag(reader, fallback)?, 0);
    leaf.since_last_eval = reader.parse(since)?;
    leaf.counts = [reader.parse(neg)?, reader.parse(pos)?];
    for a in 0..d {
        let rest = reader.expect("values")?;
        if rest.len() < 3 {
            return Err(reader.error("values needs attribute, capacity and length"));
        }
        let index: usize = reader.parse(rest[0])?;
        if index != a {
            return Err(reader.error(format!("expected values for attribute {a}, found {index}")));
        }
        let mut observer = AttributeObserver::new(reader.parse(rest[1])?);
        let len: usize = reader.parse(rest[2])?;
        if rest.len() != 3 + len {
            return Err(reader.error(format!("expected {len} values, found {}", rest.len() - 3)));
        }
        for entry in &rest[3..] {
            let parsed = entry.split_once(':').and_then(|(v, c)| {
                let (neg, pos) = c.split_once(',')?;
                Some((v.parse::<f64>().ok()?, neg.parse().ok()?, pos.parse().ok()?))
            });
            let Some((value, neg, pos)) = parsed else {
                return Err(reader.error(format!("malformed value entry {entry:?}")));
            };
            observer.insert_counts(value, [neg, pos]);
        }
        if observer.len() != len {
            return Err(reader.error("duplicate stored value"));
        }
        leaf.observers.push(observer);
    }
    Ok(leaf)
}

impl Tree {
    pub fn to_snapshot(&self) -> String {
        let config = &self.config;
        let mut out = String::new();
        writeln!(out, "{TREE_MAGIC} {TREE_VERSION}").unwrap();
        writeln!(out, "attributes {}", self.num_attributes).unwrap();
        writeln!(out, "criterion {}", config.criterion.name()).unwrap();
        write_bound(&mut out, &config.bound);
        writeln!(out, "delta {}", config.delta).unwrap();
        writeln!(out, "grace {}", config.grace_period).unwrap();
        writeln!(out, "tau {}", config.tau).unwrap();
        writeln!(out, "max-values {}", config.max_values).unwrap();
        writeln!(out, "evaluations {}", self.split_evaluations).unwrap();
        writeln!(out, "nodes {}", self.nodes.len()).unwrap();
        for node in &self.nodes {
            match node {
                Node::Internal(s) => writeln!(
                    out,
                    "split {} {} {} {}",
                    s.attribute, s.threshold, s.left.0, s.right.0
                )
                .unwrap(),
                Node::Leaf(leaf) => write_leaf(&mut out, leaf),
            }
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Tree> {
        let mut reader = Reader::new(text);
        reader.header(TREE_MAGIC, TREE_VERSION)?;
        let d: usize = reader.field("attributes")?;
        let name: String = reader.field("criterion")?;
        let criterion = CriterionKind::from_name(&name)
            .ok_or_else(|| reader.error(format!("unknown criterion {name:?}")))?;
        let bound = read_bound(&mut reader)?;
        let delta: String = reader.field("delta")?;
        let delta: DeltaMode = delta.parse().map_err(|e: Error| reader.error(e.to_string()))?;
        let config = LearnerConfig {
            criterion,
            bound,
            delta,
            grace_period: reader.field("grace")?,
            tau: reader.field("tau")?,
            max_values: reader.field("max-values")?,
        };
        let mut tree = Tree::new(d, config).map_err(|e| reader.error(e.to_string()))?;
        tree.split_evaluations = reader.field("evaluations")?;
        let count: usize = reader.field("nodes")?;
        if count == 0 || count.is_multiple_of(2) {
            return Err(reader.error(format!("a binary tree cannot have {count} nodes")));
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let tokens = reader.next_tokens()?;
            match tokens.as_slice() {
                ["split", attribute, threshold, left, right] => {
                    let split = SplitNode {
                        attribute: reader.parse(attribute)?,
                        threshold: reader.parse(threshold)?,
                        left: NodeId(reader.parse(left)?),
                        right: NodeId(reader.parse(right)?),
                    };
                    if split.attribute >= d || split.left.0 >= count || split.right.0 >= count {
                        return Err(reader.error("split refers outside the tree"));
                    }
                    nodes.push(Node::Internal(split));
                }
                ["leaf", rest @ ..] => nodes.push(Node::Leaf(read_leaf(&mut reader, rest, d)?)),
                _ => return Err(reader.error(format!("expected a node, found {:?}", tokens[0]))),
            }
        }
        reader.finish()?;
        tree.nodes = nodes;
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grown_tree() -> Tree {
        let config = LearnerConfig::c_tree(0.05).with_grace_period(20);
        let mut tree = Tree::new(2, config).unwrap();
        for t in 1..=2000u64 {
            let x0 = ((t * 7919) % 1000) as f64 / 1000.0;
            let x1 = ((t * 104729) % 997) as f64 / 997.0 + 0.1;
            let y = (x0 > 0.3) ^ (x1 > 0.8);
            tree.observe(&[x0, x1], y, t).unwrap();
        }
        tree
    }

    #[test]
    fn round_trip_is_lossless() {
        let tree = grown_tree();
        assert!(tree.num_leaves() > 1);
        let text = tree.to_snapshot();
        let back = Tree::from_snapshot(&text).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_snapshot(), text);
    }

    #[test]
    fn every_bound_round_trips() {
        for config in [
            LearnerConfig::c_tree(1.0 / 3.0),
            LearnerConfig::c_tree_exact(CriterionKind::KearnsMansour, 0.05),
            LearnerConfig::h_tree(1e-7),
            LearnerConfig {
                bound: SplitBound::Hoeffding { range: None },
                ..LearnerConfig::corr_h_tree(0.1)
            },
            LearnerConfig::mcdiarmid(0.05).with_tau(0.01),
        ] {
            let tree = Tree::new(3, config).unwrap();
            assert_eq!(Tree::from_snapshot(&tree.to_snapshot()).unwrap(), tree);
        }
    }

    #[test]
    fn malformed_snapshots_name_the_line() {
        let text = grown_tree().to_snapshot();
        let broken = text.replacen("criterion gini", "criterion purple", 1);
        match Tree::from_snapshot(&broken) {
            Err(Error::Snapshot { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(Tree::from_snapshot("ctree-tree 2\n").is_err());
        let truncated: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(Tree::from_snapshot(&truncated).is_err());
    }
}
