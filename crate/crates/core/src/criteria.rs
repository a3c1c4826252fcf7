//! Impurity functions and their plug-in conditional estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    /// `-(p/2) ln p - ((1-p)/2) ln(1-p)`
    ScaledEntropy,
    /// `2p(1-p)`
    Gini,
    /// `sqrt(p(1-p))`
    KearnsMansour,
    /// `min(p, 1-p)`
    ClassificationError,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 4] = [
        CriterionKind::ScaledEntropy,
        CriterionKind::Gini,
        CriterionKind::KearnsMansour,
        CriterionKind::ClassificationError,
    ];

    /// The three concave criteria with dedicated confidence intervals.
    pub const CONCAVE: [CriterionKind; 3] = [
        CriterionKind::ScaledEntropy,
        CriterionKind::Gini,
        CriterionKind::KearnsMansour,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::ScaledEntropy => "entropy",
            CriterionKind::Gini => "gini",
            CriterionKind::KearnsMansour => "km",
            CriterionKind::ClassificationError => "error",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "entropy" | "scaled-entropy" => Some(CriterionKind::ScaledEntropy),
            "gini" => Some(CriterionKind::Gini),
            "km" | "kearns-mansour" => Some(CriterionKind::KearnsMansour),
            "error" | "classification-error" => Some(CriterionKind::ClassificationError),
            _ => None,
        }
    }
}

/// Joint label/split counts at a leaf. The first digit is the label, the
/// second the side of the split: `n01` counts examples with `Y = 0, F = 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitStats {
    pub n11: u64,
    pub n01: u64,
    pub n10: u64,
    pub n00: u64,
}

impl SplitStats {
    pub fn new(n11: u64, n01: u64, n10: u64, n00: u64) -> Self {
        SplitStats { n11, n01, n10, n00 }
    }

    /// Stats of the trivial split that sends every example to one side.
    pub fn unsplit(positives: u64, negatives: u64) -> Self {
        SplitStats::new(positives, negatives, 0, 0)
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n01 + self.n10 + self.n00
    }

    pub fn positives(&self) -> u64 {
        self.n11 + self.n10
    }

    /// Empirical joint probabilities `(p̂1, q̂1, p̂0, q̂0)`.
    pub fn joint(&self) -> Result<[f64; 4]> {
        let m = self.total();
        if m == 0 {
            return Err(Error::domain("split statistics are empty"));
        }
        let m = m as f64;
        Ok([
            self.n11 as f64 / m,
            self.n01 as f64 / m,
            self.n10 as f64 / m,
            self.n00 as f64 / m,
        ])
    }
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn harmonic_mean(p: f64, q: f64) -> f64 {
    if p + q == 0.0 {
        0.0
    } else {
        2.0 * p * q / (p + q)
    }
}

fn geometric_mean(p: f64, q: f64) -> f64 {
    if p == 0.0 || q == 0.0 {
        0.0
    } else {
        (p * q).sqrt()
    }
}

/// Impurity of a Bernoulli label with parameter `p`.
pub fn impurity(kind: CriterionKind, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(impurity_unchecked(kind, p))
}

pub(crate) fn impurity_unchecked(kind: CriterionKind, p: f64) -> f64 {
    let q = 1.0 - p;
    match kind {
        CriterionKind::ScaledEntropy => -(xlnx(p) + xlnx(q)) / 2.0,
        CriterionKind::Gini => 2.0 * p * q,
        CriterionKind::KearnsMansour => geometric_mean(p, q),
        CriterionKind::ClassificationError => p.min(q),
    }
}

/// Plug-in estimate of `Φ(Y | F)` from joint probabilities
/// `[p1, q1, p0, q0]` (label 1 / label 0, on sides F = 1 and F = 0).
pub fn conditional_from_joint(kind: CriterionKind, joint: [f64; 4]) -> f64 {
    let [p1, q1, p0, q0] = joint;
    match kind {
        CriterionKind::ScaledEntropy => {
            let joint_entropy = -(xlnx(p1) + xlnx(q1) + xlnx(p0) + xlnx(q0)) / 2.0;
            let split_entropy = -(xlnx(p1 + q1) + xlnx(p0 + q0)) / 2.0;
            joint_entropy - split_entropy
        }
        CriterionKind::Gini => harmonic_mean(p1, q1) + harmonic_mean(p0, q0),
        CriterionKind::KearnsMansour => geometric_mean(p1, q1) + geometric_mean(p0, q0),
        CriterionKind::ClassificationError => p1.min(q1) + p0.min(q0),
    }
}

/// Plug-in estimate `Φ̂(Y | F)` of the conditional impurity after a split.
pub fn conditional_estimate(kind: CriterionKind, stats: &SplitStats) -> Result<f64> {
    Ok(conditional_from_joint(kind, stats.joint()?))
}

/// `Φ(leaf) - Φ̂(Y | F)`; may be negative on empirical inputs.
pub fn gain(kind: CriterionKind, leaf_class_p: f64, stats: &SplitStats) -> Result<f64> {
    Ok(impurity(kind, leaf_class_p)? - conditional_estimate(kind, stats)?)
}
