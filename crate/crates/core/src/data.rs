//! Dataset loading, manifests and stream permutation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Example;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Accuracy,
    /// F-measure with the less frequent class as the positive one.
    FMeasure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub dim: usize,
    pub examples: usize,
    pub positives: usize,
    pub negatives: usize,
    pub metric: Metric,
}

impl DatasetMeta {
    /// The less frequent label; label 1 on ties.
    pub fn smallest_class(&self) -> bool {
        self.positives <= self.negatives
    }

    /// Accuracy of always predicting the more frequent label.
    pub fn majority_rate(&self) -> f64 {
        if self.examples == 0 {
            return 0.0;
        }
        self.positives.max(self.negatives) as f64 / self.examples as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub examples: Vec<Example>,
}

impl Dataset {
    fn from_examples(name: String, dim: usize, examples: Vec<Example>) -> Self {
        let positives = examples.iter().filter(|e| e.label == Some(true)).count();
        Dataset {
            meta: DatasetMeta {
                name,
                dim,
                examples: examples.len(),
                positives,
                negatives: examples.len() - positives,
                metric: Metric::Accuracy,
            },
            examples,
        }
    }
}

/// Published sizes of the benchmark datasets: name, dimension, examples,
/// positives, negatives and metric.
pub const BENCHMARKS: [(&str, usize, usize, usize, usize, Metric); 5] = [
    ("a9a", 123, 48842, 11687, 37155, Metric::FMeasure),
    ("airlines", 7, 539383, 240264, 299119, Metric::Accuracy),
    ("cod-rna", 8, 488565, 162855, 325710, Metric::FMeasure),
    ("covertype", 54, 581012, 283301, 297711, Metric::Accuracy),
    ("electricity", 8, 45312, 26075, 19237, Metric::Accuracy),
];

/// Reference sizes for one of the benchmark datasets.
pub fn benchmark(name: &str) -> Option<DatasetMeta> {
    let key = name.to_ascii_lowercase();
    BENCHMARKS
        .iter()
        .find(|b| b.0 == key)
        .map(|&(name, dim, examples, positives, negatives, metric)| DatasetMeta {
            name: name.to_string(),
            dim,
            examples,
            positives,
            negatives,
            metric,
        })
}

/// Compares a loaded benchmark dataset with its published sizes. Mismatches
/// are errors, except for COD-RNA, whose public distributions differ in
/// size: those are returned as a note instead.
pub fn check_benchmark(meta: &DatasetMeta) -> Result<Option<String>> {
    let Some(reference) = benchmark(&meta.name) else {
        return Ok(None);
    };
    let fields = [
        ("dimension", reference.dim, meta.dim),
        ("examples", reference.examples, meta.examples),
        ("positives", reference.positives, meta.positives),
    ];
    for (field, expected, found) in fields {
        if expected == found {
            continue;
        }
        if reference.name == "cod-rna" {
            return Ok(Some(format!(
                "cod-rna: {field} is {found}, published value {expected}"
            )));
        }
        return Err(Error::CountMismatch {
            name: meta.name.clone(),
            field,
            expected,
            found,
        });
    }
    Ok(None)
}

/// How raw label strings become binary labels. Without explicit entries,
/// numeric labels are accepted: `1` is positive, `0` and `-1` negative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap(BTreeMap<String, bool>);

impl LabelMap {
    pub fn new(entries: impl IntoIterator<Item = (String, bool)>) -> Self {
        LabelMap(entries.into_iter().collect())
    }

    pub fn get(&self, raw: &str) -> Option<bool> {
        if !self.0.is_empty() {
            return self.0.get(raw).copied();
        }
        match raw.parse::<f64>() {
            Ok(1.0) => Some(true),
            Ok(0.0 | -1.0) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseSchema {
    pub delimiter: char,
    /// Column holding the label; the last one when `None`.
    pub label_column: Option<usize>,
    pub header: bool,
    pub labels: LabelMap,
}

impl Default for DenseSchema {
    fn default() -> Self {
        DenseSchema {
            delimiter: ',',
            label_column: None,
            header: false,
            labels: LabelMap::default(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_feature(path: &Path, line: usize, token: &str) -> Result<f64> {
    let parse_error = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(parse_error(format!("non-finite value {token:?}"))),
        Err(_) if token.is_empty() || token == "?" => Err(parse_error("missing value".into())),
        Err(_) => Err(parse_error(format!("cannot parse {token:?} as a number"))),
    }
}

/// Delimiter-separated numeric rows with one label column.
pub fn load_dense(path: impl AsRef<Path>, schema: &DenseSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut arity: Option<usize> = None;
    let mut examples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if schema.header && i == 0 {
            continue;
        }
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(schema.delimiter).map(str::trim).collect();
        let expected = *arity.get_or_insert(cells.len());
        if cells.len() != expected || expected < 2 {
            return Err(Error::Arity {
                path: path.to_path_buf(),
                line,
                expected: expected.max(2),
                found: cells.len(),
            });
        }
        let label_at = schema.label_column.unwrap_or(expected - 1);
        if label_at >= expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("label column {label_at} out of range"),
            });
        }
        let label = schema.labels.get(cells[label_at]).ok_or_else(|| Error::UnmappedLabel {
            path: path.to_path_buf(),
            line,
            value: cells[label_at].to_string(),
        })?;
        let features = cells
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_at)
            .map(|(_, c)| parse_feature(path, line, c))
            .collect::<Result<Vec<_>>>()?;
        examples.push(Example::labeled(features, label));
    }
    let dim = arity.map_or(0, |a| a - 1);
    Ok(Dataset::from_examples(dataset_name(path), dim, examples))
}

/// `label index:value ...` lines with 1-based indices. The dimension is the
/// largest index in the file unless given.
pub fn load_sparse(path: impl AsRef<Path>, dim: Option<usize>, labels: &LabelMap) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut rows: Vec<(Vec<(usize, f64)>, bool)> = Vec::new();
    let mut max_index = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.split('#').next().unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let mut tokens = raw.split_whitespace();
        let label_token = tokens.next().unwrap_or_default();
        let label = labels.get(label_token).ok_or_else(|| Error::UnmappedLabel {
            path: path.to_path_buf(),
            line,
            value: label_token.to_string(),
        })?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for token in tokens {
            let parsed = token
                .split_once(':')
                .and_then(|(index, value)| Some((index.parse::<usize>().ok()?, value)));
            let Some((index, value)) = parsed.filter(|(index, _)| *index >= 1) else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("malformed entry {token:?}"),
                });
            };
            if entries.iter().any(|(j, _)| *j == index) {
                return Err(Error::DuplicateIndex {
                    path: path.to_path_buf(),
                    line,
                    index,
                });
            }
            if let Some(d) = dim {
                if index > d {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("index {index} exceeds dimension {d}"),
                    });
                }
            }
            max_index = max_index.max(index);
            entries.push((index, parse_feature(path, line, value)?));
        }
        rows.push((entries, label));
    }
    let dim = dim.unwrap_or(max_index);
    let examples = rows
        .into_iter()
        .map(|(entries, label)| {
            let mut features = vec![0.0; dim];
            for (index, value) in entries {
                features[index - 1] = value;
            }
            Example::labeled(features, label)
        })
        .collect();
    Ok(Dataset::from_examples(dataset_name(path), dim, examples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Identity,
    Seeded(u64),
}

/// Reorders `examples` uniformly at random for a seed, or leaves them alone.
pub fn permute(mut examples: Vec<Example>, order: Order) -> Vec<Example> {
    if let Order::Seeded(seed) = order {
        examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    examples
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedCounts {
    pub examples: usize,
    pub positives: Option<usize>,
}

/// One dataset of a manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    pub format: Format,
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default)]
    pub label_column: Option<usize>,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Defaults to the published metric for benchmark names, else accuracy.
    #[serde(default)]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub labels: BTreeMap<String, u8>,
    #[serde(default)]
    pub expected: Option<ExpectedCounts>,
}

impl ManifestEntry {
    fn label_map(&self) -> Result<LabelMap> {
        let mut entries = Vec::new();
        for (raw, value) in &self.labels {
            match value {
                0 | 1 => entries.push((raw.clone(), *value == 1)),
                _ => {
                    return Err(Error::Manifest(format!(
                        "{}: label {raw:?} maps to {value}, expected 0 or 1",
                        self.name
                    )))
                }
            }
        }
        Ok(LabelMap::new(entries))
    }

    /// Loads the file, names it after the entry and checks declared and
    /// published counts.
    pub fn load(&self) -> Result<(Dataset, Option<String>)> {
        let labels = self.label_map()?;
        let mut dataset = match self.format {
            Format::Dense => {
                let schema = DenseSchema {
                    delimiter: self.delimiter.unwrap_or(','),
                    label_column: self.label_column,
                    header: self.header,
                    labels,
                };
                load_dense(&self.path, &schema)?
            }
            Format::Sparse => load_sparse(&self.path, self.dim, &labels)?,
        };
        dataset.meta.name = self.name.clone();
        dataset.meta.metric = self
            .metric
            .or_else(|| benchmark(&self.name).map(|b| b.metric))
            .unwrap_or_default();
        if let Some(expected) = self.expected {
            let mut checks = vec![("examples", expected.examples, dataset.meta.examples)];
            if let Some(p) = expected.positives {
                checks.push(("positives", p, dataset.meta.positives));
            }
            for (field, expected, found) in checks {
                if expected != found {
                    return Err(Error::CountMismatch {
                        name: self.name.clone(),
                        field,
                        expected,
                        found,
                    });
                }
            }
        }
        let note = check_benchmark(&dataset.meta)?;
        Ok((dataset, note))
    }
}

/// A list of named datasets, read from TOML:
///
/// ```toml
/// [[dataset]]
/// name = "electricity"
/// path = "elec.csv"
/// format = "dense"
/// header = true
/// labels = { UP = 1, DOWN = 0 }
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut manifest: Manifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        for entry in &mut manifest.datasets {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
        let mut names: Vec<&str> = manifest.datasets.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Manifest(format!("dataset {:?} listed twice", w[0])));
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Manifest::parse(&read(path)?, base)
    }

    pub fn get(&self, name: &str) -> Result<&ManifestEntry> {
        self.datasets
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Manifest(format!("no dataset named {name:?}")))
    }
}
