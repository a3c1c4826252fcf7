//! Monte-Carlo coverage of the conditional-impurity confidence intervals.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::criteria::{conditional_estimate, impurity, CriterionKind, SplitStats};
use crate::error::{Error, Result};

/// Joint distributions `[p1, q1, p0, q0]` of `(Y, F)` used by the coverage
/// runs: `p_k = Pr(Y = 1, F = k)`, `q_k = Pr(Y = 0, F = k)`.
pub const REFERENCE_JOINTS: [[f64; 4]; 5] = [
    [0.25, 0.25, 0.25, 0.25],
    [0.3, 0.2, 0.1, 0.4],
    [0.45, 0.05, 0.05, 0.45],
    [0.1, 0.1, 0.4, 0.4],
    [0.02, 0.08, 0.6, 0.3],
];

/// `Σ_k Pr(F = k) Φ(Y | F = k)` computed from the definition.
pub fn true_conditional(kind: CriterionKind, joint: [f64; 4]) -> Result<f64> {
    let [p1, q1, p0, q0] = joint;
    let side = |p: f64, q: f64| -> Result<f64> {
        let mass = p + q;
        if mass == 0.0 {
            Ok(0.0)
        } else {
            Ok(mass * impurity(kind, (p / mass).clamp(0.0, 1.0))?)
        }
    };
    Ok(side(p1, q1)? + side(p0, q0)?)
}

/// Multinomial draw of `m` pairs as split statistics.
pub fn sample_stats<R: Rng + ?Sized>(joint: [f64; 4], m: u64, rng: &mut R) -> Result<SplitStats> {
    let mut counts = [0u64; 4];
    let mut left = m;
    let mut mass = 1.0;
    for (i, &p) in joint.iter().enumerate() {
        if i == 3 || left == 0 {
            counts[i] = left;
            break;
        }
        let prob = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = Binomial::new(left, prob)
            .map_err(|e| Error::domain(e.to_string()))?
            .sample(rng);
        counts[i] = n;
        left -= n;
        mass -= p;
    }
    Ok(SplitStats::new(counts[0], counts[1], counts[2], counts[3]))
}

/// The interval matched to each concave criterion.
pub fn interval_for(kind: CriterionKind, m: u64, delta: f64) -> Result<f64> {
    match kind {
        CriterionKind::ScaledEntropy => bounds::entropy_interval(m, delta),
        CriterionKind::Gini => bounds::gini_interval(m, delta),
        CriterionKind::KearnsMansour => bounds::km_interval(m, delta),
        CriterionKind::ClassificationError => Err(Error::domain(
            "classification error has no dedicated interval",
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub criterion: CriterionKind,
    pub joint: [f64; 4],
    pub m: u64,
    pub delta: f64,
    pub interval: f64,
    pub trials: u64,
    pub violations: u64,
}

impl Coverage {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.trials as f64
    }
}

/// Fraction of `trials` samples of size `m` whose estimate misses the true
/// conditional impurity by more than the interval.
pub fn coverage<R: Rng + ?Sized>(
    kind: CriterionKind,
    joint: [f64; 4],
    m: u64,
    delta: f64,
    trials: u64,
    rng: &mut R,
) -> Result<Coverage> {
    let total: f64 = joint.iter().sum();
    if joint.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{joint:?} is not a distribution")));
    }
    let interval = interval_for(kind, m, delta)?;
    let truth = true_conditional(kind, joint)?;
    let mut violations = 0;
    for _ in 0..trials {
        let stats = sample_stats(joint, m, rng)?;
        let estimate = conditional_estimate(kind, &stats)?;
        if (estimate - truth).abs() > interval {
            violations += 1;
        }
    }
    Ok(Coverage {
        criterion: kind,
        joint,
        m,
        delta,
        interval,
        trials,
        violations,
    })
}
