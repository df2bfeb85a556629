use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::record::SensorRecord;
use super::sample::{TaskLabels, Vocabulary, WindowedSample};
use super::split::split_train_test;
use super::window::{window, RawWindow};
use crate::error::{Error, Result};
use crate::model::Task;
use crate::seed::derive_seed;

fn default_window_length() -> usize {
    24
}
fn default_stride() -> usize {
    12
}
fn default_split_ratio() -> f64 {
    0.8
}
fn default_threshold() -> usize {
    2
}
fn default_true() -> bool {
    true
}

/// Windowing, splitting and normalization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataOptions {
    #[serde(default = "default_window_length")]
    pub window_length: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    /// Minimum distinct classes for a task to count as available.
    #[serde(default = "default_threshold")]
    pub availability_threshold: usize,
    /// Per-channel z-score with the client's training statistics.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            window_length: default_window_length(),
            stride: default_stride(),
            split_ratio: default_split_ratio(),
            availability_threshold: default_threshold(),
            normalize: true,
        }
    }
}

impl DataOptions {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.stride == 0 {
            return Err(Error::Config("window length and stride must be positive".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio {} must lie in (0, 1)",
                self.split_ratio
            )));
        }
        if self.availability_threshold == 0 {
            return Err(Error::Config("availability_threshold must be at least 1".into()));
        }
        Ok(())
    }
}

/// One client's windowed, split data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: String,
    pub train: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub task_availability: BTreeMap<Task, bool>,
    /// Training sample count.
    pub n_k: usize,
}

impl ClientDataset {
    pub fn has_task(&self, task: Task) -> bool {
        self.task_availability.get(&task).copied().unwrap_or(false)
    }

    pub fn distinct_classes(&self, task: Task) -> usize {
        self.train
            .iter()
            .chain(&self.test)
            .filter_map(|s| s.labels.get(task))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Splits `samples`, normalizes with training statistics and derives task
    /// availability.
    pub fn from_samples(
        client_id: &str,
        samples: Vec<WindowedSample>,
        opts: &DataOptions,
        seed: u64,
    ) -> Self {
        let split_seed = derive_seed(seed, &format!("split/{client_id}"), &[]);
        let (mut train, mut test) = split_train_test(samples, opts.split_ratio, split_seed);
        if opts.normalize && !train.is_empty() {
            let (mean, std) = channel_stats(&train);
            for s in train.iter_mut().chain(test.iter_mut()) {
                for row in s.window.data_mut().chunks_mut(3) {
                    for c in 0..3 {
                        row[c] = (row[c] - mean[c]) / std[c];
                    }
                }
            }
        }
        let mut ds = ClientDataset {
            client_id: client_id.to_string(),
            n_k: train.len(),
            train,
            test,
            task_availability: BTreeMap::new(),
        };
        for task in Task::ALL {
            let available = ds.distinct_classes(task) >= opts.availability_threshold;
            ds.task_availability.insert(task, available);
        }
        ds
    }
}

fn channel_stats(samples: &[WindowedSample]) -> ([f64; 3], [f64; 3]) {
    let mut sum = [0.0; 3];
    let mut count = 0.0;
    for s in samples {
        for row in s.window.data().chunks(3) {
            for c in 0..3 {
                sum[c] += row[c];
            }
            count += 1.0;
        }
    }
    let mean = sum.map(|v| v / count);
    let mut var = [0.0; 3];
    for s in samples {
        for row in s.window.data().chunks(3) {
            for c in 0..3 {
                var[c] += (row[c] - mean[c]).powi(2);
            }
        }
    }
    let std = var.map(|v| {
        let sd = (v / count).sqrt();
        if sd > 1e-12 {
            sd
        } else {
            1.0
        }
    });
    (mean, std)
}

/// Sorted canonical labels seen per task across all segments.
pub fn observed_vocabulary<'a>(records: impl IntoIterator<Item = &'a SensorRecord>) -> Vocabulary {
    let mut sets: BTreeMap<Task, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        for task in Task::ALL {
            if let Some(l) = r.label(task) {
                sets.entry(task).or_default().insert(l.to_string());
            }
        }
    }
    Vocabulary {
        classes: sets
            .into_iter()
            .map(|(t, s)| (t, s.into_iter().collect()))
            .collect(),
    }
}

/// Converts string-labeled windows to class indices, dropping windows that
/// carry no label at all.
pub fn label_windows(raw: Vec<RawWindow>, vocab: &Vocabulary, client_id: &str) -> Result<Vec<WindowedSample>> {
    let mut out = Vec::with_capacity(raw.len());
    for w in raw {
        let mut labels = TaskLabels::default();
        for task in Task::ALL {
            if let Some(l) = w.label(task) {
                let idx = vocab.index(task, l).ok_or_else(|| Error::UnmappedLabels {
                    task: task.to_string(),
                    labels: vec![l.to_string()],
                })?;
                labels.set(task, Some(idx));
            }
        }
        if !labels.is_empty() {
            out.push(WindowedSample {
                window: w.data,
                labels,
                client_id: client_id.to_string(),
            });
        }
    }
    Ok(out)
}

/// Windows every 10 Hz segment of a client and builds its dataset.
pub fn build_client_dataset(
    client_id: &str,
    segments: &[Vec<SensorRecord>],
    vocab: &Vocabulary,
    opts: &DataOptions,
    seed: u64,
) -> Result<ClientDataset> {
    let mut samples = Vec::new();
    for seg in segments {
        let raw = window(seg, opts.window_length, opts.stride);
        samples.extend(label_windows(raw, vocab, client_id)?);
    }
    Ok(ClientDataset::from_samples(client_id, samples, opts, seed))
}
