use crate::bounds::{self, BoundKind};
use crate::criteria::{conditional_estimate, conditional_from_joint, CriterionKind, SplitStats};
use crate::error::Result;

use super::config::{LearnerConfig, SplitBound};
use super::leaf::LeafState;

/// A binary split `F(x) = 1 iff x[attribute] > threshold` with its counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub attribute: usize,
    pub threshold: f64,
    pub stats: SplitStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitDecision {
    Split { attribute: usize, threshold: f64 },
    NoSplit,
}

/// Everything computed by one split evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitAttempt {
    pub decision: SplitDecision,
    /// `Φ̂` of the empirically best split.
    pub best: Option<f64>,
    /// `Φ̂` of the runner-up: the best split on another attribute, or not
    /// splitting at all, whichever is lower.
    pub runner_up: Option<f64>,
    pub epsilon: Option<f64>,
}

impl SplitAttempt {
    fn no_split() -> Self {
        SplitAttempt {
            decision: SplitDecision::NoSplit,
            best: None,
            runner_up: None,
            epsilon: None,
        }
    }
}

/// Thresholds at midpoints of consecutive stored values, for every attribute.
pub fn enumerate_candidates(leaf: &LeafState) -> Vec<Candidate> {
    let negatives = leaf.negatives();
    let positives = leaf.positives();
    let mut out = Vec::new();
    for (attribute, observer) in leaf.observers.iter().enumerate() {
        let mut below = [0u64; 2];
        let mut values = observer.iter().peekable();
        while let Some((value, counts)) = values.next() {
            below[0] += counts[0];
            below[1] += counts[1];
            let Some(&(next, _)) = values.peek() else {
                break;
            };
            out.push(Candidate {
                attribute,
                threshold: value + (next - value) / 2.0,
                stats: SplitStats::new(
                    positives - below[1],
                    negatives - below[0],
                    below[1],
                    below[0],
                ),
            });
        }
    }
    out
}

/// The separation test: split when the runner-up trails the best by more than
/// `2ε`, or when `ε` has shrunk to the tie-break threshold `tau` (disabled
/// when `tau` is zero).
pub fn decide_split(best: f64, runner_up: f64, epsilon: f64, tau: f64) -> bool {
    runner_up - best > 2.0 * epsilon || (tau > 0.0 && epsilon <= tau)
}

/// The interval width `ε_t` used for a leaf with `m` labeled examples at
/// depth `depth`, at stream time `t`, among `d` attributes.
pub fn split_epsilon(config: &LearnerConfig, m: u64, t: u64, d: usize, depth: u32) -> Result<f64> {
    let delta = config.delta.at(t);
    match config.bound {
        SplitBound::CTreeExact => {
            let kind = match config.criterion {
                CriterionKind::ScaledEntropy => BoundKind::Entropy,
                CriterionKind::Gini => BoundKind::Gini,
                CriterionKind::KearnsMansour => BoundKind::KearnsMansour,
                CriterionKind::ClassificationError => BoundKind::Hoeffding { range: 1.0 },
            };
            bounds::split_confidence(m, t, d, depth, delta, kind)
        }
        SplitBound::CTreeHeuristic { c } => bounds::heuristic_interval(m, t, d, depth, c),
        SplitBound::Hoeffding { range } => {
            let range = range.unwrap_or_else(|| config.criterion_range());
            bounds::hoeffding_interval(m, delta, range)
        }
        SplitBound::McDiarmid => bounds::mcdiarmid_entropy_interval(m, delta, 2),
    }
}

/// Lowest-`Φ̂` candidate of every attribute; ties keep the lowest threshold.
fn best_per_attribute(leaf: &LeafState, kind: CriterionKind) -> Vec<Option<(f64, Candidate)>> {
    let negatives = leaf.negatives();
    let positives = leaf.positives();
    let m = leaf.m() as f64;
    leaf.observers
        .iter()
        .enumerate()
        .map(|(attribute, observer)| {
            let mut best: Option<(f64, Candidate)> = None;
            let mut below = [0u64; 2];
            let mut values = observer.iter().peekable();
            while let Some((value, counts)) = values.next() {
                below[0] += counts[0];
                below[1] += counts[1];
                let Some(&(next, _)) = values.peek() else {
                    break;
                };
                let stats = SplitStats::new(positives - below[1], negatives - below[0], below[1], below[0]);
                let joint = [
                    stats.n11 as f64 / m,
                    stats.n01 as f64 / m,
                    stats.n10 as f64 / m,
                    stats.n00 as f64 / m,
                ];
                let phi = conditional_from_joint(kind, joint);
                if best.is_none_or(|(current, _)| phi < current) {
                    best = Some((
                        phi,
                        Candidate {
                            attribute,
                            threshold: value + (next - value) / 2.0,
                            stats,
                        },
                    ));
                }
            }
            best
        })
        .collect()
}

/// Ranks every candidate by ascending `Φ̂(Y | F)` (lower conditional impurity
/// means higher gain) and applies [`decide_split`].
pub fn attempt_split(leaf: &LeafState, t: u64, config: &LearnerConfig) -> SplitAttempt {
    if leaf.m() < 2 || leaf.is_pure() {
        return SplitAttempt::no_split();
    }
    let kind = config.criterion;
    let unsplit = SplitStats::unsplit(leaf.positives(), leaf.negatives());
    let Ok(null_phi) = conditional_estimate(kind, &unsplit) else {
        return SplitAttempt::no_split();
    };

    let per_attribute = best_per_attribute(leaf, kind);
    let mut best: Option<(f64, Candidate)> = None;
    for (phi, candidate) in per_attribute.iter().flatten() {
        if best.is_none_or(|(current, _)| *phi < current) {
            best = Some((*phi, *candidate));
        }
    }
    let Some((best_phi, best_candidate)) = best else {
        return SplitAttempt::no_split();
    };
    // improvements at rounding level are not improvements
    if best_phi >= null_phi - 1e-12 {
        return SplitAttempt {
            best: Some(best_phi),
            runner_up: Some(null_phi),
            ..SplitAttempt::no_split()
        };
    }
    let runner_up = per_attribute
        .iter()
        .flatten()
        .filter(|(_, c)| c.attribute != best_candidate.attribute)
        .map(|(phi, _)| *phi)
        .fold(null_phi, f64::min);

    let Ok(epsilon) = split_epsilon(config, leaf.m(), t, leaf.observers.len(), leaf.depth) else {
        return SplitAttempt {
            best: Some(best_phi),
            runner_up: Some(runner_up),
            ..SplitAttempt::no_split()
        };
    };
    let decision = if decide_split(best_phi, runner_up, epsilon, config.tau) {
        SplitDecision::Split {
            attribute: best_candidate.attribute,
            threshold: best_candidate.threshold,
        }
    } else {
        SplitDecision::NoSplit
    };
    SplitAttempt {
        decision,
        best: Some(best_phi),
        runner_up: Some(runner_up),
        epsilon: Some(epsilon),
    }
}
