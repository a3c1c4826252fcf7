//! Label-query strategies for budgeted streams, budget accounting and the
//! drift detector used by the split strategies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bounds::leaf_consistency_interval;
use crate::error::{Error, Result};
use crate::tree::{DeltaMode, LeafState};

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_NU: f64 = 0.2;

/// Fraction of instances whose label may be requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetState {
    budget: f64,
    queried: u64,
    seen: u64,
}

impl BudgetState {
    pub fn new(budget: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&budget) {
            return Err(Error::domain(format!("budget must lie in [0, 1], got {budget}")));
        }
        Ok(BudgetState {
            budget,
            queried: 0,
            seen: 0,
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn queried(&self) -> u64 {
        self.queried
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Counts a new instance; call before [`BudgetState::allows`].
    pub fn arrive(&mut self) {
        self.seen += 1;
    }

    /// Whether one more query keeps the query rate within the budget.
    pub fn allows(&self) -> bool {
        self.seen > 0 && (self.queried + 1) as f64 <= self.budget * self.seen as f64
    }

    pub fn record_query(&mut self) {
        debug_assert!(self.queried < self.seen);
        self.queried += 1;
    }

    pub fn query_rate(&self) -> f64 {
        if self.seen == 0 {
            0.0
        } else {
            self.queried as f64 / self.seen as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Rnd,
    VarUn,
    RndVar,
    SelSamp,
    Split,
    ConfTree,
    SplitConfTree,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Rnd,
        StrategyKind::VarUn,
        StrategyKind::RndVar,
        StrategyKind::SelSamp,
        StrategyKind::Split,
        StrategyKind::ConfTree,
        StrategyKind::SplitConfTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Rnd => "rnd",
            StrategyKind::VarUn => "var-un",
            StrategyKind::RndVar => "rnd-var",
            StrategyKind::SelSamp => "sel-samp",
            StrategyKind::Split => "split",
            StrategyKind::ConfTree => "conf-tree",
            StrategyKind::SplitConfTree => "split-conf-tree",
        }
    }

    /// Strategies that route part of the stream to a drift detector.
    pub fn uses_ddm(self) -> bool {
        matches!(self, StrategyKind::Split | StrategyKind::SplitConfTree)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || k.name().replace('-', "") == norm)
            .ok_or_else(|| Error::domain(format!("unknown strategy {s:?}")))
    }
}

/// Queries with probability `budget`.
pub fn rnd_decide<R: Rng + ?Sized>(rng: &mut R, budget: f64) -> bool {
    rng.random::<f64>() < budget
}

/// Variable-uncertainty rule: query when the leaf's confidence is below
/// `theta`, then tighten `theta`; otherwise relax it.
pub fn var_un_decide(theta: &mut f64, step: f64, p: f64) -> bool {
    rnd_var_decide(theta, step, p, 1.0)
}

/// [`var_un_decide`] with the comparison threshold scaled by `eta`.
pub fn rnd_var_decide(theta: &mut f64, step: f64, p: f64, eta: f64) -> bool {
    let confidence = p.max(1.0 - p);
    if confidence < *theta * eta {
        *theta *= 1.0 - step;
        true
    } else {
        *theta *= 1.0 + step;
        false
    }
}

/// `B / (B + |p - 1/2|)`, with `1` at zero margin.
pub fn sel_samp_probability(p: f64, budget: f64) -> f64 {
    let margin = (p - 0.5).abs();
    if margin == 0.0 {
        1.0
    } else {
        budget / (budget + margin)
    }
}

/// Whether the leaf's empirical class rate is farther from `1/2` than the
/// consistency interval at stream time `t`.
pub fn is_consistent(leaf: &LeafState, t: u64, delta: f64) -> bool {
    match leaf.positive_rate() {
        None => false,
        Some(p) => match leaf_consistency_interval(leaf.m(), t, delta) {
            Ok(eps) => (p - 0.5).abs() > eps,
            Err(_) => false,
        },
    }
}

/// Query probability of the confidence-tree strategy: `1` for a leaf that is
/// not δ-consistent, `(B + ε) / (B + ε + margin)` otherwise.
pub fn conf_tree_probability(leaf: &LeafState, t: u64, budget: f64, delta: f64) -> f64 {
    let Some(p) = leaf.positive_rate() else {
        return 1.0;
    };
    let Ok(eps) = leaf_consistency_interval(leaf.m(), t, delta) else {
        return 1.0;
    };
    let margin = (p - 0.5).abs();
    if margin <= eps {
        1.0
    } else {
        (budget + eps) / (budget + eps + margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DdmStatus {
    InControl,
    Warning,
    Drift,
}

/// Drift detection on the online error rate: warning at two and drift at
/// three standard deviations above the best rate seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct DdmState {
    n: u64,
    errors: u64,
    p_min: f64,
    s_min: f64,
    status: DdmStatus,
}

impl DdmState {
    pub const MIN_INSTANCES: u64 = 30;

    pub fn new() -> Self {
        DdmState {
            n: 0,
            errors: 0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
            status: DdmStatus::InControl,
        }
    }

    pub fn reset(&mut self) {
        *self = DdmState::new();
    }

    pub fn status(&self) -> DdmStatus {
        self.status
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn error_rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.errors as f64 / self.n as f64
        }
    }

    pub fn minimum(&self) -> (f64, f64) {
        (self.p_min, self.s_min)
    }

    pub fn update(&mut self, prediction_correct: bool) -> DdmStatus {
        self.n += 1;
        self.errors += u64::from(!prediction_correct);
        let p = self.error_rate();
        let s = (p * (1.0 - p) / self.n as f64).sqrt();
        if self.n < Self::MIN_INSTANCES {
            self.status = DdmStatus::InControl;
            return self.status;
        }
        if p + s <= self.p_min + self.s_min {
            self.p_min = p;
            self.s_min = s;
        }
        self.status = if p + s > self.p_min + 3.0 * self.s_min {
            DdmStatus::Drift
        } else if p + s > self.p_min + 2.0 * self.s_min {
            DdmStatus::Warning
        } else {
            DdmStatus::InControl
        };
        self.status
    }
}

impl Default for DdmState {
    fn default() -> Self {
        DdmState::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Threshold adjustment step of the variable-uncertainty rule.
    #[serde(default = "default_step")]
    pub step: f64,
    /// Fraction of the stream the split strategies send to random sampling.
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Confidence of the consistency test.
    #[serde(default = "default_delta")]
    pub delta: DeltaMode,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_nu() -> f64 {
    DEFAULT_NU
}

fn default_delta() -> DeltaMode {
    DeltaMode::OneOverT
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        StrategyConfig {
            kind,
            step: DEFAULT_STEP,
            nu: DEFAULT_NU,
            delta: DeltaMode::OneOverT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step < 1.0) {
            return Err(Error::domain(format!("step must lie in (0, 1), got {}", self.step)));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::domain(format!("nu must lie in [0, 1], got {}", self.nu)));
        }
        Ok(())
    }
}

/// What to do with the current instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub query: bool,
    /// The instance went through the random branch of a split strategy, so
    /// its prediction outcome belongs to the drift detector.
    pub feed_ddm: bool,
}

#[derive(Debug, Clone)]
pub struct StrategyState {
    config: StrategyConfig,
    theta: f64,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    pub ddm: DdmState,
}

impl StrategyState {
    pub fn new(config: StrategyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(StrategyState {
            config,
            theta: 1.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: Normal::new(1.0, 1.0).expect("unit normal"),
            ddm: DdmState::new(),
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.config.kind
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Decides whether to request the label of an instance routed to `leaf`
    /// at stream time `t`. Only called when the budget allows a query.
    pub fn decide(&mut self, leaf: &LeafState, t: u64, budget: f64) -> Decision {
        let kind = self.config.kind;
        if kind.uses_ddm() && self.rng.random::<f64>() < self.config.nu {
            return Decision {
                query: rnd_decide(&mut self.rng, budget),
                feed_ddm: true,
            };
        }
        let query = match kind {
            StrategyKind::Rnd => rnd_decide(&mut self.rng, budget),
            StrategyKind::VarUn | StrategyKind::Split => {
                var_un_decide(&mut self.theta, self.config.step, posterior(leaf))
            }
            StrategyKind::RndVar => {
                let eta = self.noise.sample(&mut self.rng);
                rnd_var_decide(&mut self.theta, self.config.step, posterior(leaf), eta)
            }
            StrategyKind::SelSamp => {
                let prob = sel_samp_probability(posterior(leaf), budget);
                self.rng.random::<f64>() < prob
            }
            StrategyKind::ConfTree | StrategyKind::SplitConfTree => {
                let prob = conf_tree_probability(leaf, t, budget, self.config.delta.at(t));
                prob >= 1.0 || self.rng.random::<f64>() < prob
            }
        };
        Decision {
            query,
            feed_ddm: false,
        }
    }
}

/// Leaf estimate of `Pr(Y = 1)`, one half for a leaf with no labels.
fn posterior(leaf: &LeafState) -> f64 {
    leaf.positive_rate().unwrap_or(0.5)
}
