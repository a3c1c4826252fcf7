//! Interleaved test-then-train evaluation, with and without a label budget.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::active::{BudgetState, DdmStatus, StrategyConfig, StrategyState};
use crate::data::Metric;
use crate::error::{Error, Result};
use crate::tree::{Example, LearnerConfig, Tree};

/// One line of a run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceLog {
    pub t: u64,
    pub predicted: bool,
    pub label: bool,
    pub queried: bool,
    pub leaves: usize,
    /// Running accuracy after this instance.
    pub metric: f64,
}

/// Cumulative confusion counts of online predictions, label 1 as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, label: bool) {
        match (predicted, label) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// Counts with the roles of the two labels exchanged.
    pub fn flipped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    /// `2PR / (P + R)` for label 1, with `0/0` read as 0.
    pub fn f1(&self) -> f64 {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub learner: LearnerConfig,
    pub strategy: Option<StrategyConfig>,
    pub budget: Option<f64>,
    pub seed: u64,
    pub rows: Vec<InstanceLog>,
    pub confusion: Confusion,
    pub queried: u64,
    pub drifts: u64,
}

impl RunRecord {
    fn new(learner: LearnerConfig, strategy: Option<StrategyConfig>, budget: Option<f64>, seed: u64, n: usize) -> Self {
        RunRecord {
            learner,
            strategy,
            budget,
            seed,
            rows: Vec::with_capacity(n),
            confusion: Confusion::default(),
            queried: 0,
            drifts: 0,
        }
    }

    pub fn seen(&self) -> u64 {
        self.rows.len() as u64
    }

    pub fn accuracy(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.metric)
    }

    pub fn final_leaves(&self) -> usize {
        self.rows.last().map_or(1, |r| r.leaves)
    }

    pub fn query_rate(&self) -> f64 {
        match self.seen() {
            0 => 0.0,
            n => self.queried as f64 / n as f64,
        }
    }

    /// Accuracy, or F-measure on `smallest_class`.
    pub fn final_metric(&self, metric: Metric, smallest_class: bool) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy(),
            Metric::FMeasure => fmeasure(self, smallest_class),
        }
    }

    /// One tab-separated line per instance, with a header.
    pub fn write_rows<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t\tpredicted\tlabel\tqueried\tleaves\tmetric")?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.t,
                u8::from(r.predicted),
                u8::from(r.label),
                u8::from(r.queried),
                r.leaves,
                r.metric
            )?;
        }
        Ok(())
    }

    fn log(&mut self, t: u64, predicted: bool, label: bool, queried: bool, leaves: usize) {
        let previous = self.rows.last().map_or(0.0, |r| r.metric);
        let correct = if predicted == label { 1.0 } else { 0.0 };
        let weight = 1.0 / t as f64;
        let metric = (1.0 - weight) * previous + weight * correct;
        self.confusion.record(predicted, label);
        self.rows.push(InstanceLog {
            t,
            predicted,
            label,
            queried,
            leaves,
            metric,
        });
    }
}

/// F-measure of the online predictions with `positive_class` as positive.
pub fn fmeasure(record: &RunRecord, positive_class: bool) -> f64 {
    if positive_class {
        record.confusion.f1()
    } else {
        record.confusion.flipped().f1()
    }
}

fn label_of(example: &Example, t: u64) -> Result<bool> {
    example
        .label
        .ok_or_else(|| Error::domain(format!("instance {t} has no label")))
}

fn dimension(stream: &[Example]) -> Result<usize> {
    stream
        .first()
        .map(|e| e.features.len())
        .ok_or_else(|| Error::domain("empty stream"))
}

/// Every instance is predicted, scored, then used for training.
pub fn run_full(config: &LearnerConfig, stream: &[Example]) -> Result<RunRecord> {
    let mut tree = Tree::new(dimension(stream)?, *config)?;
    let mut record = RunRecord::new(*config, None, None, 0, stream.len());
    for (i, example) in stream.iter().enumerate() {
        let t = i as u64 + 1;
        let label = label_of(example, t)?;
        if example.features.len() != tree.num_attributes() {
            return Err(Error::DimensionMismatch {
                expected: tree.num_attributes(),
                got: example.features.len(),
            });
        }
        let predicted = tree.predict(&example.features);
        record.log(t, predicted, label, true, tree.num_leaves());
        tree.observe(&example.features, label, t)?;
        record.queried += 1;
    }
    Ok(record)
}

/// Every instance is predicted and scored; its label is revealed and used
/// for training only when the budget allows a query and the strategy asks
/// for one. A drift signal resets the learner but not the budget.
pub fn run_active(
    config: &LearnerConfig,
    strategy: &StrategyConfig,
    budget: f64,
    seed: u64,
    stream: &[Example],
) -> Result<RunRecord> {
    let mut tree = Tree::new(dimension(stream)?, *config)?;
    let mut state = StrategyState::new(*strategy, seed)?;
    let mut gate = BudgetState::new(budget)?;
    let mut record = RunRecord::new(*config, Some(*strategy), Some(budget), seed, stream.len());
    for (i, example) in stream.iter().enumerate() {
        let t = i as u64 + 1;
        let label = label_of(example, t)?;
        if example.features.len() != tree.num_attributes() {
            return Err(Error::DimensionMismatch {
                expected: tree.num_attributes(),
                got: example.features.len(),
            });
        }
        gate.arrive();
        let leaf = tree.leaf_for(&example.features);
        let predicted = leaf.predict();
        let decision = if gate.allows() {
            Some(state.decide(leaf, t, budget))
        } else {
            None
        };
        let queried = decision.is_some_and(|d| d.query);
        record.log(t, predicted, label, queried, tree.num_leaves());
        let Some(decision) = decision.filter(|d| d.query) else {
            continue;
        };
        gate.record_query();
        record.queried += 1;
        tree.observe(&example.features, label, t)?;
        if decision.feed_ddm && state.ddm.update(predicted == label) == DdmStatus::Drift {
            tree.reset();
            state.ddm.reset();
            record.drifts += 1;
        }
    }
    Ok(record)
}

/// One point of a performance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// The swept parameter: `c`, `δ` or the budget.
    pub param: f64,
    pub leaves: f64,
    pub metric: f64,
    pub runs: usize,
}

/// Averages `(param, leaves, metric)` triples that share a parameter value.
/// The result is ordered by parameter.
pub fn average_by_param(points: &[(f64, f64, f64)]) -> Vec<CurvePoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<CurvePoint> = Vec::new();
    for (param, leaves, metric) in sorted {
        match out.last_mut() {
            Some(last) if last.param == param => {
                last.leaves += leaves;
                last.metric += metric;
                last.runs += 1;
            }
            _ => out.push(CurvePoint {
                param,
                leaves,
                metric,
                runs: 1,
            }),
        }
    }
    for p in &mut out {
        p.leaves /= p.runs as f64;
        p.metric /= p.runs as f64;
    }
    out
}

/// Final leaf count and metric of each run, one point per parameter value,
/// ordered by leaf count.
pub fn leaves_curve(points: &[(f64, f64, f64)]) -> Vec<CurvePoint> {
    let mut curve = average_by_param(points);
    curve.sort_by(|a, b| a.leaves.total_cmp(&b.leaves).then(a.param.total_cmp(&b.param)));
    curve
}

/// Final metric per budget, ordered by budget.
pub fn budget_curve(points: &[(f64, f64, f64)]) -> Vec<CurvePoint> {
    average_by_param(points)
}

/// The point with the highest metric; the earliest one on ties.
pub fn peak(curve: &[CurvePoint]) -> Option<&CurvePoint> {
    curve.iter().reduce(|best, p| if p.metric > best.metric { p } else { best })
}

pub fn write_curve<W: Write>(mut out: W, param_name: &str, curve: &[CurvePoint]) -> io::Result<()> {
    writeln!(out, "{param_name}\tleaves\tmetric\truns")?;
    for p in curve {
        writeln!(out, "{}\t{}\t{}\t{}", p.param, p.leaves, p.metric, p.runs)?;
    }
    Ok(())
}
