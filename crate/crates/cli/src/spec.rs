//! Experiment specifications: the TOML file and the grids it sweeps.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ctree_core::active::{StrategyConfig, StrategyKind, DEFAULT_NU, DEFAULT_STEP};
use ctree_core::tree::{DeltaMode, LearnerConfig, SplitBound};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    Active,
    SynthFull,
    SynthActive,
    Coverage,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Active => "active",
            Mode::SynthFull => "synth-full",
            Mode::SynthActive => "synth-active",
            Mode::Coverage => "coverage",
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Mode::Active | Mode::SynthActive)
    }

    pub fn is_synthetic(self) -> bool {
        matches!(self, Mode::SynthFull | Mode::SynthActive)
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        [Mode::Full, Mode::Active, Mode::SynthFull, Mode::SynthActive, Mode::Coverage]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::spec("mode", format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridParam {
    /// Scale of the heuristic interval.
    C,
    /// Confidence of the bound.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Geometric,
    Linear,
}

/// A sweep over one learner parameter, either as explicit values or as
/// `count` points between `lo` and `hi` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub param: GridParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

/// Points of the default sweep.
pub const DEFAULT_GRID_POINTS: usize = 200;

impl GridSpec {
    /// Geometric sweep with 200 points: `c` over `[0.01, 2]`, `δ` over
    /// `[1e-9, 0.5]`.
    pub fn default_for(param: GridParam) -> Self {
        let (lo, hi) = match param {
            GridParam::C => (0.01, 2.0),
            GridParam::Delta => (1e-9, 0.5),
        };
        GridSpec {
            param,
            values: None,
            spacing: Some(Spacing::Geometric),
            lo: Some(lo),
            hi: Some(hi),
            count: Some(DEFAULT_GRID_POINTS),
        }
    }

    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let values = match &self.values {
            Some(v) => v.clone(),
            None => {
                let default = GridSpec::default_for(self.param);
                let lo = self.lo.or(default.lo).unwrap();
                let hi = self.hi.or(default.hi).unwrap();
                let count = self.count.or(default.count).unwrap();
                let spacing = self.spacing.unwrap_or(Spacing::Geometric);
                if count == 0 || lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
                    return Err(CliError::spec("grid", format!("empty range {lo}..{hi} with {count} points")));
                }
                if spacing == Spacing::Geometric && lo <= 0.0 {
                    return Err(CliError::spec("grid.lo", "geometric grids need a positive lower end"));
                }
                (0..count)
                    .map(|i| {
                        let f = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                        match spacing {
                            Spacing::Geometric => lo * (hi / lo).powf(f),
                            Spacing::Linear => lo + (hi - lo) * f,
                        }
                    })
                    .collect()
            }
        };
        for &v in &values {
            let ok = match self.param {
                GridParam::C => v > 0.0 && v.is_finite(),
                GridParam::Delta => v > 0.0 && v < 1.0,
            };
            if !ok {
                return Err(CliError::spec("grid", format!("value {v} is out of range")));
            }
        }
        if values.is_empty() {
            return Err(CliError::spec("grid", "no values"));
        }
        Ok(values)
    }

    /// `config` with the swept parameter set to `value`.
    pub fn apply(&self, config: &LearnerConfig, value: f64) -> LearnerConfig {
        let mut config = *config;
        match self.param {
            GridParam::C => config.bound = SplitBound::CTreeHeuristic { c: value },
            GridParam::Delta => config.delta = DeltaMode::Fixed(value),
        }
        config
    }
}

/// `c=geom:0.01:2:20`, `delta=lin:0.01:0.1:10`, `c=0.1,0.5,1`, or a bare
/// parameter name for the default sweep.
impl FromStr for GridSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = |msg: String| CliError::spec("--grid", msg);
        let (name, rest) = match s.split_once('=') {
            Some((n, r)) => (n.trim(), Some(r.trim())),
            None => (s.trim(), None),
        };
        let param = match name {
            "c" => GridParam::C,
            "delta" => GridParam::Delta,
            _ => return Err(bad(format!("unknown parameter {name:?}"))),
        };
        let Some(rest) = rest else {
            return Ok(GridSpec::default_for(param));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("cannot parse {t:?}")));
        let parts: Vec<&str> = rest.split(':').collect();
        let mut grid = GridSpec {
            param,
            values: None,
            spacing: None,
            lo: None,
            hi: None,
            count: None,
        };
        match parts.as_slice() {
            [kind, lo, hi, count] => {
                grid.spacing = Some(match *kind {
                    "geom" | "geometric" => Spacing::Geometric,
                    "lin" | "linear" => Spacing::Linear,
                    _ => return Err(bad(format!("unknown spacing {kind:?}"))),
                });
                grid.lo = Some(num(lo)?);
                grid.hi = Some(num(hi)?);
                grid.count = Some(count.trim().parse().map_err(|_| bad(format!("cannot parse {count:?}")))?);
            }
            [list] => grid.values = Some(list.split(',').map(num).collect::<Result<_, _>>()?),
            _ => return Err(bad(format!("cannot parse {rest:?}"))),
        }
        grid.points()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub leaves: usize,
    pub dim: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    pub examples_per_leaf: usize,
    #[serde(default = "default_trees")]
    pub trees: usize,
}

fn default_q() -> f64 {
    ctree_core::synth::DEFAULT_Q
}

fn default_trees() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSpec {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<u64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

fn default_trials() -> u64 {
    10_000
}

fn default_sizes() -> Vec<u64> {
    vec![100, 1000]
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.1]
}

impl Default for CoverageSpec {
    fn default() -> Self {
        CoverageSpec {
            trials: default_trials(),
            sizes: default_sizes(),
            deltas: default_deltas(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyParams {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_consistency_delta")]
    pub delta: DeltaMode,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_nu() -> f64 {
    DEFAULT_NU
}

fn default_consistency_delta() -> DeltaMode {
    DeltaMode::OneOverT
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            step: DEFAULT_STEP,
            nu: DEFAULT_NU,
            delta: DeltaMode::OneOverT,
        }
    }
}

impl StrategyParams {
    pub fn config(&self, kind: StrategyKind) -> StrategyConfig {
        StrategyConfig {
            kind,
            step: self.step,
            nu: self.nu,
            delta: self.delta,
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_repeats() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Everything needed to reproduce one batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Streams per configuration: permutations of a dataset in full mode.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Write one log file per run.
    #[serde(default = "default_true")]
    pub records: bool,
    #[serde(default)]
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub strategy: StrategyParams,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSpec>,
}

impl ExperimentSpec {
    pub fn new(mode: Mode) -> Self {
        ExperimentSpec {
            mode,
            dataset: None,
            manifest: None,
            seed: default_seed(),
            repeats: 1,
            out: None,
            workers: None,
            records: true,
            budgets: Vec::new(),
            strategies: Vec::new(),
            strategy: StrategyParams::default(),
            learner: LearnerConfig::default(),
            grid: None,
            synth: None,
            coverage: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::spec("spec", e.message().to_string()))
    }

    /// Reads a spec file; a relative manifest path is taken relative to it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut spec = ExperimentSpec::parse(&text)?;
        if let Some(manifest) = &spec.manifest {
            if manifest.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                spec.manifest = Some(base.join(manifest));
            }
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs always serialize")
    }

    /// Parameter values to sweep; the configured learner alone without a grid.
    pub fn grid_points(&self) -> Result<Vec<(f64, LearnerConfig)>, CliError> {
        match &self.grid {
            None => Ok(vec![(self.default_param(), self.learner)]),
            Some(grid) => Ok(grid
                .points()?
                .into_iter()
                .map(|v| (v, grid.apply(&self.learner, v)))
                .collect()),
        }
    }

    fn default_param(&self) -> f64 {
        match self.learner.bound {
            SplitBound::CTreeHeuristic { c } => c,
            _ => match self.learner.delta {
                DeltaMode::Fixed(d) => d,
                DeltaMode::OneOverT => 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.learner
            .validate()
            .map_err(|e| CliError::spec("learner", e.to_string()))?;
        if let Some(grid) = &self.grid {
            grid.points()?;
        }
        if self.repeats == 0 {
            return Err(CliError::spec("repeats", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(CliError::spec("workers", "must be at least 1"));
        }
        if self.mode.is_active() {
            if self.budgets.is_empty() {
                return Err(CliError::spec("budgets", "active modes need at least one budget"));
            }
            if let Some(b) = self.budgets.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                return Err(CliError::spec("budgets", format!("{b} is outside [0, 1]")));
            }
            if self.strategies.is_empty() {
                return Err(CliError::spec("strategies", "active modes need at least one strategy"));
            }
            self.strategy
                .config(StrategyKind::Rnd)
                .validate()
                .map_err(|e| CliError::spec("strategy", e.to_string()))?;
        }
        match self.mode {
            Mode::Full | Mode::Active => {
                if self.dataset.is_none() {
                    return Err(CliError::spec("dataset", "dataset modes need a dataset name"));
                }
                if self.manifest.is_none() {
                    return Err(CliError::spec("manifest", "dataset modes need a manifest"));
                }
            }
            Mode::SynthFull | Mode::SynthActive => {
                let Some(synth) = &self.synth else {
                    return Err(CliError::spec("synth", "synthetic modes need a [synth] table"));
                };
                if synth.leaves == 0 || synth.dim == 0 || synth.examples_per_leaf == 0 || synth.trees == 0 {
                    return Err(CliError::spec("synth", "leaves, dim, examples_per_leaf and trees must be positive"));
                }
                if !(synth.q > 0.0 && synth.q < 1.0) {
                    return Err(CliError::spec("synth.q", format!("{} is outside (0, 1)", synth.q)));
                }
            }
            Mode::Coverage => {
                let coverage = self.coverage.clone().unwrap_or_default();
                if coverage.trials == 0 {
                    return Err(CliError::spec("coverage.trials", "must be positive"));
                }
                if coverage.sizes.iter().any(|&m| m < 2) {
                    return Err(CliError::spec("coverage.sizes", "sample sizes must be at least 2"));
                }
                if let Some(d) = coverage.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
                    return Err(CliError::spec("coverage.deltas", format!("{d} is outside (0, 1)")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}
