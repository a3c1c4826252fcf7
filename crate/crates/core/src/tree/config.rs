use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionKind;
use crate::error::{Error, Result};

pub const DEFAULT_GRACE_PERIOD: u64 = 100;
pub const DEFAULT_MAX_VALUES: usize = 1000;

/// How the split interval `ε_t` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SplitBound {
    /// `c sqrt(ln(m² h² t d) / m)`.
    CTreeHeuristic { c: f64 },
    /// The criterion's own interval at the union-bound δ'.
    CTreeExact,
    /// Plain Hoeffding interval; `range` defaults to the criterion's range.
    Hoeffding {
        #[serde(default)]
        range: Option<f64>,
    },
    /// McDiarmid entropy-gain interval with two classes.
    McDiarmid,
}

impl SplitBound {
    pub fn name(&self) -> &'static str {
        match self {
            SplitBound::CTreeHeuristic { .. } => "heuristic",
            SplitBound::CTreeExact => "exact",
            SplitBound::Hoeffding { .. } => "hoeffding",
            SplitBound::McDiarmid => "mcdiarmid",
        }
    }
}

/// Confidence level fed to the bounds: a constant, or `1/t` at stream time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeltaRepr", into = "DeltaRepr")]
pub enum DeltaMode {
    Fixed(f64),
    OneOverT,
}

impl DeltaMode {
    pub fn at(self, t: u64) -> f64 {
        match self {
            DeltaMode::Fixed(delta) => delta,
            DeltaMode::OneOverT => 1.0 / t.max(1) as f64,
        }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaMode::Fixed(delta) => write!(f, "{delta}"),
            DeltaMode::OneOverT => f.write_str("1/t"),
        }
    }
}

impl FromStr for DeltaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1/t" {
            return Ok(DeltaMode::OneOverT);
        }
        let delta: f64 = s
            .parse()
            .map_err(|_| Error::domain(format!("delta must be a number or \"1/t\", got {s:?}")))?;
        if delta > 0.0 && delta < 1.0 {
            Ok(DeltaMode::Fixed(delta))
        } else {
            Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeltaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<DeltaRepr> for DeltaMode {
    type Error = Error;

    fn try_from(repr: DeltaRepr) -> Result<Self> {
        match repr {
            DeltaRepr::Number(x) => x.to_string().parse(),
            DeltaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<DeltaMode> for DeltaRepr {
    fn from(mode: DeltaMode) -> Self {
        match mode {
            DeltaMode::Fixed(delta) => DeltaRepr::Number(delta),
            DeltaMode::OneOverT => DeltaRepr::Text("1/t".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub criterion: CriterionKind,
    pub bound: SplitBound,
    #[serde(default = "default_grace")]
    pub grace_period: u64,
    /// Tie-break threshold; zero disables it.
    #[serde(default)]
    pub tau: f64,
    pub delta: DeltaMode,
    /// Distinct values kept per attribute per leaf.
    #[serde(default = "default_max_values")]
    pub max_values: usize,
}

fn default_grace() -> u64 {
    DEFAULT_GRACE_PERIOD
}

fn default_max_values() -> usize {
    DEFAULT_MAX_VALUES
}

impl LearnerConfig {
    /// Gini C-Tree with the tunable interval and `δ = 1/t`.
    pub fn c_tree(c: f64) -> Self {
        LearnerConfig {
            criterion: CriterionKind::Gini,
            bound: SplitBound::CTreeHeuristic { c },
            grace_period: DEFAULT_GRACE_PERIOD,
            tau: 0.0,
            delta: DeltaMode::OneOverT,
            max_values: DEFAULT_MAX_VALUES,
        }
    }

    /// C-Tree using the criterion's own interval at the union-bound δ'.
    pub fn c_tree_exact(criterion: CriterionKind, delta: f64) -> Self {
        LearnerConfig {
            criterion,
            bound: SplitBound::CTreeExact,
            delta: DeltaMode::Fixed(delta),
            ..LearnerConfig::c_tree(1.0)
        }
    }

    /// Hoeffding tree on the Gini index.
    pub fn h_tree(delta: f64) -> Self {
        LearnerConfig {
            criterion: CriterionKind::Gini,
            bound: SplitBound::Hoeffding { range: Some(1.0) },
            delta: DeltaMode::Fixed(delta),
            ..LearnerConfig::c_tree(1.0)
        }
    }

    /// Hoeffding tree on the classification error.
    pub fn corr_h_tree(delta: f64) -> Self {
        LearnerConfig {
            criterion: CriterionKind::ClassificationError,
            ..LearnerConfig::h_tree(delta)
        }
    }

    /// Gini tree gated by the McDiarmid entropy-gain interval.
    pub fn mcdiarmid(delta: f64) -> Self {
        LearnerConfig {
            bound: SplitBound::McDiarmid,
            delta: DeltaMode::Fixed(delta),
            ..LearnerConfig::c_tree(1.0)
        }
    }

    pub fn with_grace_period(mut self, grace_period: u64) -> Self {
        self.grace_period = grace_period;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_criterion(mut self, criterion: CriterionKind) -> Self {
        self.criterion = criterion;
        self
    }

    /// Width of the range of the criterion's gain, for the Hoeffding bound.
    pub fn criterion_range(&self) -> f64 {
        match self.criterion {
            CriterionKind::ScaledEntropy => LN_2,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grace_period == 0 {
            return Err(Error::domain("grace_period must be at least 1"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::domain(format!("tau must be non-negative, got {}", self.tau)));
        }
        if self.max_values < 2 {
            return Err(Error::domain("max_values must be at least 2"));
        }
        if let DeltaMode::Fixed(delta) = self.delta {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
            }
        }
        match self.bound {
            SplitBound::CTreeHeuristic { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::domain(format!("c must be positive, got {c}")))
            }
            SplitBound::Hoeffding { range: Some(r) } if !(r > 0.0 && r.is_finite()) => {
                Err(Error::domain(format!("range must be positive, got {r}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::c_tree(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_mode_parsing() {
        assert_eq!("1/t".parse::<DeltaMode>().unwrap(), DeltaMode::OneOverT);
        assert_eq!("0.05".parse::<DeltaMode>().unwrap(), DeltaMode::Fixed(0.05));
        assert!("1.5".parse::<DeltaMode>().is_err());
        assert!("abc".parse::<DeltaMode>().is_err());
        assert_eq!(DeltaMode::OneOverT.at(200), 0.005);
    }

    #[test]
    fn config_from_toml() {
        let text = r#"
            criterion = "gini"
            delta = "1/t"
            bound = { kind = "c-tree-heuristic", c = 0.5 }
        "#;
        let config: LearnerConfig = toml::from_str(text).unwrap();
        assert_eq!(config, LearnerConfig::c_tree(0.5));

        let text = r#"
            criterion = "classification-error"
            delta = 0.01
            grace_period = 50
            bound = { kind = "hoeffding", range = 1.0 }
        "#;
        let config: LearnerConfig = toml::from_str(text).unwrap();
        assert_eq!(config, LearnerConfig::corr_h_tree(0.01).with_grace_period(50));
    }

    #[test]
    fn validation() {
        assert!(LearnerConfig::c_tree(0.5).validate().is_ok());
        assert!(LearnerConfig::c_tree(0.0).validate().is_err());
        assert!(LearnerConfig::c_tree(0.5).with_grace_period(0).validate().is_err());
        assert!(LearnerConfig::c_tree(0.5).with_tau(-1.0).validate().is_err());
        assert_eq!(LearnerConfig::default().grace_period, 100);
        assert_eq!(LearnerConfig::default().tau, 0.0);
    }
}
