//! Batch execution of an experiment spec.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ctree_core::active::{StrategyConfig, StrategyKind};
use ctree_core::coverage::{coverage, Coverage, REFERENCE_JOINTS};
use ctree_core::criteria::CriterionKind;
use ctree_core::data::{permute, Manifest, Metric, Order};
use ctree_core::eval::{budget_curve, leaves_curve, run_active, run_full, write_curve, RunRecord};
use ctree_core::synth::{rand_cbt, sample_stream};
use ctree_core::tree::{Example, LearnerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::spec::{ExperimentSpec, GridParam, Mode};

pub const DEFAULT_OUT: &str = "ctree-out";

/// Seed for one component of an experiment, from the spec seed and a path
/// of indices. Distinct paths give unrelated streams.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |h, &p| mix(h ^ mix(p.wrapping_add(0x632b_e59b_d9b4_e019))))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Stream {
    tree: Option<usize>,
    repeat: usize,
    examples: Vec<Example>,
    metric: Metric,
    smallest_class: bool,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    stream: usize,
    grid: usize,
    param: f64,
    learner: LearnerConfig,
    strategy: Option<StrategyConfig>,
    budget: Option<f64>,
    seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct CoverageCell {
    criterion: CriterionKind,
    joint: usize,
    m: u64,
    delta: f64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexEntry {
    pub path: String,
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub cell: usize,
    pub description: String,
    pub error: String,
}

#[derive(Debug, Serialize)]
struct Index<'a> {
    mode: &'static str,
    seed: u64,
    cells: usize,
    failures: usize,
    files: &'a [IndexEntry],
}

/// What a run left behind.
#[derive(Debug)]
pub struct Outcome {
    pub out: PathBuf,
    pub cells: usize,
    pub files: Vec<IndexEntry>,
    pub failures: Vec<Failure>,
    /// Remarks from dataset loading, such as published counts that differ.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn files_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a IndexEntry> {
        self.files.iter().filter(move |f| f.kind == kind)
    }
}

struct Emitter {
    root: PathBuf,
    files: Vec<IndexEntry>,
}

impl Emitter {
    fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Emitter {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        rel: &str,
        kind: &'static str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        body(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.files.push(IndexEntry {
            path: rel.to_string(),
            kind,
        });
        Ok(())
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::spec("workers", e.to_string()))
}

/// Validates `spec`, executes every cell and writes the results under the
/// output directory. Cell failures do not abort the batch; they are listed
/// in `failures.json` and in the returned outcome.
pub fn run(spec: &ExperimentSpec) -> Result<Outcome, CliError> {
    spec.validate()?;
    let out = spec.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut emitter = Emitter::new(&out)?;
    emitter.write("spec.toml", "spec", |w| w.write_all(spec.to_toml().as_bytes()))?;
    let pool = pool(spec.workers)?;
    let (cells, failures, notes) = match spec.mode {
        Mode::Coverage => run_coverage(spec, &pool, &mut emitter)?,
        _ => run_learners(spec, &pool, &mut emitter)?,
    };
    if !failures.is_empty() {
        let text = serde_json::to_string_pretty(&failures).expect("failures serialize");
        emitter.write("failures.json", "failures", |w| writeln!(w, "{text}"))?;
    }
    let index = Index {
        mode: spec.mode.name(),
        seed: spec.seed,
        cells,
        failures: failures.len(),
        files: &emitter.files,
    };
    let text = serde_json::to_string_pretty(&index).expect("index serializes");
    let path = out.join("index.json");
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(Outcome {
        out,
        cells,
        files: emitter.files,
        failures,
        notes,
    })
}

type Tally = (usize, Vec<Failure>, Vec<String>);

fn build_streams(spec: &ExperimentSpec, emitter: &mut Emitter) -> Result<(Vec<Stream>, Vec<String>), CliError> {
    let mut streams = Vec::new();
    let mut notes = Vec::new();
    if let Some(synth) = spec.synth.filter(|_| spec.mode.is_synthetic()) {
        for k in 0..synth.trees {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[1, k as u64]));
            let truth = rand_cbt(synth.leaves, synth.dim, synth.q, &mut rng)?;
            let snapshot = truth.to_snapshot();
            emitter.write(&format!("truth/tree-{k:04}.txt"), "truth", |w| w.write_all(snapshot.as_bytes()))?;
            for r in 0..spec.repeats {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[2, k as u64, r as u64]));
                streams.push(Stream {
                    tree: Some(k),
                    repeat: r,
                    examples: sample_stream(&truth, synth.examples_per_leaf, &mut rng),
                    metric: Metric::Accuracy,
                    smallest_class: true,
                });
            }
        }
        return Ok((streams, notes));
    }
    let manifest_path = spec.manifest.as_ref().expect("validated");
    let name = spec.dataset.as_deref().expect("validated");
    let manifest = Manifest::load(manifest_path).map_err(|e| CliError::spec("manifest", e.to_string()))?;
    let entry = manifest.get(name).map_err(|e| CliError::spec("dataset", e.to_string()))?;
    let (dataset, note) = entry.load()?;
    notes.extend(note);
    for r in 0..spec.repeats {
        // Active runs keep the recorded order; full runs see a permutation.
        let order = if spec.mode.is_active() {
            Order::Identity
        } else {
            Order::Seeded(derive_seed(spec.seed, &[3, r as u64]))
        };
        streams.push(Stream {
            tree: None,
            repeat: r,
            examples: permute(dataset.examples.clone(), order),
            metric: dataset.meta.metric,
            smallest_class: dataset.meta.smallest_class(),
        });
    }
    Ok((streams, notes))
}

fn build_cells(spec: &ExperimentSpec, streams: &[Stream]) -> Result<Vec<Cell>, CliError> {
    let grid = spec.grid_points()?;
    let mut cells = Vec::new();
    for (s, _) in streams.iter().enumerate() {
        for (g, &(param, learner)) in grid.iter().enumerate() {
            if !spec.mode.is_active() {
                cells.push(Cell {
                    stream: s,
                    grid: g,
                    param,
                    learner,
                    strategy: None,
                    budget: None,
                    seed: 0,
                });
                continue;
            }
            for (k, &kind) in spec.strategies.iter().enumerate() {
                for (b, &budget) in spec.budgets.iter().enumerate() {
                    cells.push(Cell {
                        stream: s,
                        grid: g,
                        param,
                        learner,
                        strategy: Some(spec.strategy.config(kind)),
                        budget: Some(budget),
                        seed: derive_seed(spec.seed, &[4, s as u64, g as u64, k as u64, b as u64]),
                    });
                }
            }
        }
    }
    Ok(cells)
}

fn describe(cell: &Cell, stream: &Stream) -> String {
    let mut parts = Vec::new();
    if let Some(t) = stream.tree {
        parts.push(format!("tree {t}"));
    }
    parts.push(format!("repeat {}", stream.repeat));
    parts.push(format!("param {}", cell.param));
    if let (Some(s), Some(b)) = (cell.strategy, cell.budget) {
        parts.push(format!("strategy {}", s.kind));
        parts.push(format!("budget {b}"));
    }
    parts.join(", ")
}

fn param_name(spec: &ExperimentSpec) -> &'static str {
    match spec.grid.as_ref().map(|g| g.param) {
        Some(GridParam::C) => "c",
        Some(GridParam::Delta) => "delta",
        None => "param",
    }
}

fn run_learners(spec: &ExperimentSpec, pool: &rayon::ThreadPool, emitter: &mut Emitter) -> Result<Tally, CliError> {
    let (streams, notes) = build_streams(spec, emitter)?;
    let cells = build_cells(spec, &streams)?;
    let results: Vec<ctree_core::Result<RunRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let stream = &streams[cell.stream].examples;
                match (cell.strategy, cell.budget) {
                    (Some(strategy), Some(budget)) => run_active(&cell.learner, &strategy, budget, cell.seed, stream),
                    _ => run_full(&cell.learner, stream),
                }
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (i, (cell, result)) in cells.iter().zip(results).enumerate() {
        let stream = &streams[cell.stream];
        match result {
            Ok(record) => {
                if spec.records {
                    emitter.write(&format!("runs/run-{i:04}.tsv"), "run", |w| record.write_rows(w))?;
                }
                let metric = record.final_metric(stream.metric, stream.smallest_class);
                summary.push((i, *cell, record.final_leaves(), metric, record.accuracy(), record.queried, record.query_rate(), record.drifts));
            }
            Err(e) => failures.push(Failure {
                cell: i,
                description: describe(cell, stream),
                error: e.to_string(),
            }),
        }
    }

    let name = param_name(spec);
    emitter.write("summary.tsv", "summary", |w| {
        writeln!(w, "cell\ttree\trepeat\t{name}\tstrategy\tbudget\tseed\tleaves\tmetric\taccuracy\tqueried\tquery_rate\tdrifts")?;
        for (i, cell, leaves, metric, accuracy, queried, rate, drifts) in &summary {
            let stream = &streams[cell.stream];
            writeln!(
                w,
                "{i}\t{}\t{}\t{}\t{}\t{}\t{}\t{leaves}\t{metric}\t{accuracy}\t{queried}\t{rate}\t{drifts}",
                stream.tree.map_or("-".to_string(), |t| t.to_string()),
                stream.repeat,
                cell.param,
                cell.strategy.map_or("-".to_string(), |s| s.kind.to_string()),
                cell.budget.map_or("-".to_string(), |b| b.to_string()),
                cell.seed,
            )?;
        }
        Ok(())
    })?;

    if spec.mode.is_active() {
        let grid_len = spec.grid_points()?.len();
        for &kind in &spec.strategies {
            for g in 0..grid_len {
                let points: Vec<(f64, f64, f64)> = summary
                    .iter()
                    .filter(|s| s.1.grid == g && s.1.strategy.map(|c| c.kind) == Some(kind))
                    .map(|s| (s.1.budget.unwrap_or(0.0), s.2 as f64, s.3))
                    .collect();
                let curve = budget_curve(&points);
                let rel = curve_name(kind, g, grid_len);
                emitter.write(&rel, "curve", |w| write_curve(w, "budget", &curve))?;
            }
        }
    } else {
        let points: Vec<(f64, f64, f64)> = summary.iter().map(|s| (s.1.param, s.2 as f64, s.3)).collect();
        let curve = leaves_curve(&points);
        emitter.write("curve.tsv", "curve", |w| write_curve(w, name, &curve))?;
    }
    Ok((cells.len(), failures, notes))
}

fn curve_name(kind: StrategyKind, grid: usize, grid_len: usize) -> String {
    if grid_len == 1 {
        format!("curve-{kind}.tsv")
    } else {
        format!("curve-{kind}-{grid:03}.tsv")
    }
}

fn run_coverage(spec: &ExperimentSpec, pool: &rayon::ThreadPool, emitter: &mut Emitter) -> Result<Tally, CliError> {
    let settings = spec.coverage.clone().unwrap_or_default();
    let mut cells = Vec::new();
    for criterion in CriterionKind::CONCAVE {
        for &m in &settings.sizes {
            for &delta in &settings.deltas {
                for joint in 0..REFERENCE_JOINTS.len() {
                    let i = cells.len() as u64;
                    cells.push(CoverageCell {
                        criterion,
                        joint,
                        m,
                        delta,
                        seed: derive_seed(spec.seed, &[5, i]),
                    });
                }
            }
        }
    }
    let results: Vec<ctree_core::Result<Coverage>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
                coverage(c.criterion, REFERENCE_JOINTS[c.joint], c.m, c.delta, settings.trials, &mut rng)
            })
            .collect()
    });
    let mut failures = Vec::new();
    let mut rows: Vec<(usize, Coverage)> = Vec::new();
    for (i, (cell, result)) in cells.iter().zip(results).enumerate() {
        match result {
            Ok(c) => rows.push((cell.joint, c)),
            Err(e) => failures.push(Failure {
                cell: i,
                description: format!("{} joint {} m {} delta {}", cell.criterion.name(), cell.joint, cell.m, cell.delta),
                error: e.to_string(),
            }),
        }
    }
    for criterion in CriterionKind::CONCAVE {
        emitter.write(&format!("coverage-{}.tsv", criterion.name()), "coverage", |w| {
            writeln!(w, "joint\tp1\tq1\tp0\tq0\tm\tdelta\tinterval\ttrials\tviolations\trate")?;
            for (j, c) in rows.iter().filter(|(_, c)| c.criterion == criterion) {
                let [p1, q1, p0, q0] = c.joint;
                writeln!(
                    w,
                    "{j}\t{p1}\t{q1}\t{p0}\t{q0}\t{}\t{}\t{}\t{}\t{}\t{}",
                    c.m,
                    c.delta,
                    c.interval,
                    c.trials,
                    c.violations,
                    c.violation_rate()
                )?;
            }
            Ok(())
        })?;
    }
    Ok((cells.len(), failures, Vec::new()))
}
