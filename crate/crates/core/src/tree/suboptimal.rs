use rand::Rng;

use crate::criteria::{conditional_from_joint, impurity_unchecked, CriterionKind};
use crate::synth::GroundTruthTree;

use super::{Node, NodeId, Region, Tree};

/// A learned split compared with the best split available at its node under
/// the generating distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitAudit {
    pub node: NodeId,
    pub gain: f64,
    pub best_gain: f64,
}

impl SplitAudit {
    pub fn is_suboptimal(&self, tau: f64) -> bool {
        self.best_gain - self.gain > tau
    }
}

/// True gain of cutting `region` at `threshold` on `attribute`.
fn true_gain(truth: &GroundTruthTree, kind: CriterionKind, region: &Region, attribute: usize, threshold: f64) -> Option<f64> {
    let (mass, positive) = truth.region_mass(region);
    if mass <= 0.0 {
        return None;
    }
    let (left, right) = region.cut(attribute, threshold);
    let (right_mass, right_pos) = truth.region_mass(&right);
    let (left_mass, left_pos) = truth.region_mass(&left);
    let joint = [
        right_pos / mass,
        (right_mass - right_pos).max(0.0) / mass,
        left_pos / mass,
        (left_mass - left_pos).max(0.0) / mass,
    ];
    let p = (positive / mass).clamp(0.0, 1.0);
    Some(impurity_unchecked(kind, p) - conditional_from_joint(kind, joint))
}

/// Largest true gain over all axis-aligned cuts of `region`. Between two
/// consecutive generator thresholds the joint probabilities move linearly
/// with the cut and the conditional impurity is concave in them, so the
/// maximum sits on a generator threshold.
fn best_true_gain(truth: &GroundTruthTree, kind: CriterionKind, region: &Region) -> f64 {
    let mut best = 0.0f64;
    for attribute in 0..region.dim() {
        let (lo, hi) = (region.lower[attribute], region.upper[attribute]);
        for threshold in truth.thresholds_on(attribute) {
            if threshold > lo && threshold < hi {
                if let Some(g) = true_gain(truth, kind, region, attribute, threshold) {
                    best = best.max(g);
                }
            }
        }
    }
    best
}

/// Audits every internal node of `learned` against `truth`.
pub fn suboptimal_splits(truth: &GroundTruthTree, learned: &Tree) -> Vec<SplitAudit> {
    let kind = learned.config().criterion;
    let mut out = Vec::new();
    for (id, region) in learned.regions(&Region::unit(truth.num_attributes())) {
        let Node::Internal(split) = learned.node(id) else {
            continue;
        };
        let Some(gain) = true_gain(truth, kind, &region, split.attribute, split.threshold) else {
            continue;
        };
        out.push(SplitAudit {
            node: id,
            gain,
            best_gain: best_true_gain(truth, kind, &region),
        });
    }
    out.sort_by_key(|a| a.node);
    out
}

/// Monte-Carlo estimate of the probability that a fresh example from
/// `truth` is routed through at least one τ-suboptimal split of `learned`.
pub fn suboptimal_split_rate<R: Rng + ?Sized>(
    truth: &GroundTruthTree,
    learned: &Tree,
    tau: f64,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mut flagged = vec![false; learned.num_nodes()];
    let mut any = false;
    for audit in suboptimal_splits(truth, learned) {
        if audit.is_suboptimal(tau) {
            flagged[audit.node.0] = true;
            any = true;
        }
    }
    if !any || samples == 0 {
        return 0.0;
    }
    let hits = (0..samples)
        .filter(|_| {
            let example = truth.sample(rng);
            learned
                .route_path(&example.features)
                .iter()
                .any(|id| flagged[id.0])
        })
        .count();
    hits as f64 / samples as f64
}
