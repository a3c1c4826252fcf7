use std::cmp::Ordering;
use std::collections::BTreeMap;

/// `f64` key with a total order. Feature values are checked for NaN before
/// they get here.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Distinct observed values of one attribute at a leaf, with per-value class
/// counts. Holds at most `capacity` values; once full, a new value is
/// credited to the nearest stored one (the lower one on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeObserver {
    capacity: usize,
    values: BTreeMap<Key, [u64; 2]>,
}

impl AttributeObserver {
    pub fn new(capacity: usize) -> Self {
        AttributeObserver {
            capacity: capacity.max(1),
            values: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn observe(&mut self, value: f64, label: bool) {
        let key = self.slot_for(value);
        self.values.entry(key).or_insert([0, 0])[usize::from(label)] += 1;
    }

    fn slot_for(&self, value: f64) -> Key {
        let key = Key(if value == 0.0 { 0.0 } else { value });
        if self.values.len() < self.capacity || self.values.contains_key(&key) {
            return key;
        }
        let below = self.values.range(..key).next_back().map(|(k, _)| *k);
        let above = self.values.range(key..).next().map(|(k, _)| *k);
        match (below, above) {
            (Some(lo), Some(hi)) => {
                if value - lo.0 <= hi.0 - value {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => key,
        }
    }

    /// Stored values in ascending order with their `[negatives, positives]`.
    pub fn iter(&self) -> impl Iterator<Item = (f64, [u64; 2])> + '_ {
        self.values.iter().map(|(k, c)| (k.0, *c))
    }

    pub(crate) fn insert_counts(&mut self, value: f64, counts: [u64; 2]) {
        let slot = self.values.entry(Key(value)).or_insert([0, 0]);
        slot[0] += counts[0];
        slot[1] += counts[1];
    }
}

/// Sufficient statistics of a leaf of the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafState {
    /// `[negatives, positives]` among labeled examples routed here.
    pub counts: [u64; 2],
    pub depth: u32,
    /// Labeled examples since the last split evaluation.
    pub since_last_eval: u64,
    /// Prediction used while the leaf has no labeled examples.
    pub fallback: bool,
    pub observers: Vec<AttributeObserver>,
}

impl LeafState {
    pub fn new(num_attributes: usize, depth: u32, fallback: bool, capacity: usize) -> Self {
        LeafState {
            counts: [0, 0],
            depth,
            since_last_eval: 0,
            fallback,
            observers: (0..num_attributes)
                .map(|_| AttributeObserver::new(capacity))
                .collect(),
        }
    }

    /// Labeled count `m`.
    pub fn m(&self) -> u64 {
        self.counts[0] + self.counts[1]
    }

    pub fn positives(&self) -> u64 {
        self.counts[1]
    }

    pub fn negatives(&self) -> u64 {
        self.counts[0]
    }

    /// Fraction of positive labels, `None` when nothing was observed.
    pub fn positive_rate(&self) -> Option<f64> {
        match self.m() {
            0 => None,
            m => Some(self.counts[1] as f64 / m as f64),
        }
    }

    pub fn is_pure(&self) -> bool {
        self.counts[0] == 0 || self.counts[1] == 0
    }

    /// Majority label; ties go to 1, an empty leaf answers with its fallback.
    pub fn predict(&self) -> bool {
        if self.m() == 0 {
            self.fallback
        } else {
            self.counts[1] >= self.counts[0]
        }
    }

    pub(crate) fn record(&mut self, features: &[f64], label: bool) {
        self.counts[usize::from(label)] += 1;
        self.since_last_eval += 1;
        for (observer, &x) in self.observers.iter_mut().zip(features) {
            observer.observe(x, label);
        }
    }
}
