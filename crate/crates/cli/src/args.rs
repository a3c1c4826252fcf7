use std::path::PathBuf;

use clap::Parser;
use ctree_core::active::StrategyKind;
use ctree_core::criteria::CriterionKind;
use ctree_core::tree::{DeltaMode, SplitBound};

use crate::error::CliError;
use crate::spec::{ExperimentSpec, GridSpec, Mode, SynthSpec};

/// Run C-Tree experiments. A spec file gives the full configuration; any
/// flag given on the command line replaces the matching spec value.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "ctree", version)]
pub struct Args {
    /// full, active, synth-full, synth-active or coverage.
    #[arg(long)]
    pub mode: Option<String>,
    /// TOML experiment spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Dataset name in the manifest.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',')]
    pub budget: Option<Vec<f64>>,
    /// Comma-separated strategy names, or "all".
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub criterion: Option<String>,
    /// heuristic, exact, hoeffding or mcdiarmid.
    #[arg(long)]
    pub bound: Option<String>,
    /// Scale of the heuristic interval; implies the heuristic bound.
    #[arg(long)]
    pub c: Option<f64>,
    /// A number in (0, 1) or "1/t".
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub grace: Option<u64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// `c=geom:LO:HI:N`, `delta=lin:LO:HI:N`, `c=V1,V2,...` or a bare name.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Leaves of each generating tree.
    #[arg(long)]
    pub leaves: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub examples_per_leaf: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Skip the per-run log files.
    #[arg(long)]
    pub no_records: bool,
}

fn parse_bound(name: &str, c: Option<f64>) -> Result<SplitBound, CliError> {
    match name {
        "heuristic" => Ok(SplitBound::CTreeHeuristic { c: c.unwrap_or(1.0) }),
        "exact" => Ok(SplitBound::CTreeExact),
        "hoeffding" => Ok(SplitBound::Hoeffding { range: None }),
        "mcdiarmid" => Ok(SplitBound::McDiarmid),
        _ => Err(CliError::spec("--bound", format!("unknown bound {name:?}"))),
    }
}

fn parse_strategies(text: &str) -> Result<Vec<StrategyKind>, CliError> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(StrategyKind::ALL.to_vec());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| CliError::spec("--strategy", format!("unknown strategy {s:?}"))))
        .collect()
}

impl Args {
    /// The spec file, or an empty spec for `--mode`, with flags applied.
    pub fn spec(&self) -> Result<ExperimentSpec, CliError> {
        let mode = self.mode.as_deref().map(str::parse::<Mode>).transpose()?;
        let mut spec = match (&self.spec, mode) {
            (Some(path), _) => ExperimentSpec::load(path)?,
            (None, Some(mode)) => ExperimentSpec::new(mode),
            (None, None) => return Err(CliError::spec("mode", "give --mode or --spec")),
        };
        self.apply(&mut spec)?;
        Ok(spec)
    }

    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<(), CliError> {
        if let Some(mode) = &self.mode {
            spec.mode = mode.parse()?;
        }
        if let Some(name) = &self.dataset {
            spec.dataset = Some(name.clone());
        }
        if let Some(path) = &self.manifest {
            spec.manifest = Some(path.clone());
        }
        if let Some(budgets) = &self.budget {
            spec.budgets = budgets.clone();
        }
        if let Some(text) = &self.strategy {
            spec.strategies = parse_strategies(text)?;
        }
        let learner = &mut spec.learner;
        if let Some(name) = &self.criterion {
            learner.criterion = CriterionKind::from_name(name)
                .ok_or_else(|| CliError::spec("--criterion", format!("unknown criterion {name:?}")))?;
        }
        if let Some(name) = &self.bound {
            learner.bound = parse_bound(name, self.c)?;
        }
        if let Some(c) = self.c {
            match (&self.bound, learner.bound) {
                (_, SplitBound::CTreeHeuristic { .. }) | (None, _) => learner.bound = SplitBound::CTreeHeuristic { c },
                _ => return Err(CliError::spec("--c", "only the heuristic bound takes c")),
            }
        }
        if let Some(text) = &self.delta {
            learner.delta = text
                .parse::<DeltaMode>()
                .map_err(|e| CliError::spec("--delta", e.to_string()))?;
        }
        if let Some(grace) = self.grace {
            learner.grace_period = grace;
        }
        if let Some(tau) = self.tau {
            learner.tau = tau;
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(repeats) = self.repeats {
            spec.repeats = repeats;
        }
        if let Some(text) = &self.grid {
            spec.grid = Some(text.parse::<GridSpec>()?);
        }
        if let Some(out) = &self.out {
            spec.out = Some(out.clone());
        }
        if let Some(workers) = self.workers {
            spec.workers = Some(workers);
        }
        if self.no_records {
            spec.records = false;
        }
        let synth_flags = [self.leaves, self.dim, self.examples_per_leaf, self.trees];
        if synth_flags.iter().any(Option::is_some) {
            let base = spec.synth.unwrap_or(SynthSpec {
                leaves: 10,
                dim: 5,
                q: ctree_core::synth::DEFAULT_Q,
                examples_per_leaf: 1000,
                trees: 1,
            });
            spec.synth = Some(SynthSpec {
                leaves: self.leaves.unwrap_or(base.leaves),
                dim: self.dim.unwrap_or(base.dim),
                q: base.q,
                examples_per_leaf: self.examples_per_leaf.unwrap_or(base.examples_per_leaf),
                trees: self.trees.unwrap_or(base.trees),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(line: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("ctree").chain(line.iter().copied())).unwrap()
    }

    #[test]
    fn flags_build_a_spec() {
        let spec = args(&[
            "--mode", "synth-active", "--budget", "0.1,0.2", "--strategy", "all", "--c", "0.5", "--tau", "0.05",
            "--leaves", "4",
        ])
        .spec()
        .unwrap();
        assert_eq!(spec.mode, Mode::SynthActive);
        assert_eq!(spec.budgets, vec![0.1, 0.2]);
        assert_eq!(spec.strategies.len(), 7);
        assert_eq!(spec.learner.bound, SplitBound::CTreeHeuristic { c: 0.5 });
        assert_eq!(spec.learner.tau, 0.05);
        assert_eq!(spec.synth.unwrap().leaves, 4);
        spec.validate().unwrap();
    }

    #[test]
    fn bad_flags_name_themselves() {
        let err = args(&["--mode", "full", "--bound", "exact", "--c", "1"]).spec().unwrap_err();
        assert!(err.to_string().contains("--c"), "{err}");
        let err = args(&["--mode", "full", "--strategy", "nope"]).spec().unwrap_err();
        assert!(err.to_string().contains("--strategy"), "{err}");
        let err = args(&["--mode", "full", "--delta", "2"]).spec().unwrap_err();
        assert!(err.to_string().contains("--delta"), "{err}");
        let err = args(&["--mode", "sideways"]).spec().unwrap_err();
        assert!(err.to_string().contains("mode"), "{err}");
        assert!(args(&[]).spec().is_err());
    }

    #[test]
    fn flags_win_over_the_spec_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "mode = \"coverage\"\nseed = 4\n").unwrap();
        let spec = args(&["--spec", path.to_str().unwrap(), "--seed", "9"]).spec().unwrap();
        assert_eq!(spec.mode, Mode::Coverage);
        assert_eq!(spec.seed, 9);
    }
}
