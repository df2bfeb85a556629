use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LayerGroup, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmSpec {
    pub hidden: usize,
}

/// Concrete layer with resolved input sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
    },
    Lstm {
        input_size: usize,
        hidden_size: usize,
    },
    Dense {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub spec: LayerSpec,
    /// `None` for the shared convolutional trunk.
    pub task: Option<Task>,
}

/// Shape of the network: a shared conv trunk feeding one LSTM stack and one
/// classifier head per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub conv_layers: Vec<ConvSpec>,
    pub lstm_layers: Vec<LstmSpec>,
    /// Class count per task head.
    pub heads: BTreeMap<Task, usize>,
    /// Layer name to transfer-learning group.
    pub group_partition: BTreeMap<String, LayerGroup>,
    pub window_length: usize,
    pub input_channels: usize,
}

pub const DEFAULT_FILTERS: usize = 16;
pub const DEFAULT_KERNEL: usize = 5;
pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_WINDOW: usize = 24;

pub fn conv_name(i: usize) -> String {
    format!("conv{}", i + 1)
}

pub fn lstm_name(task: Task, i: usize) -> String {
    format!("{task}.lstm{}", i + 1)
}

pub fn head_name(task: Task) -> String {
    format!("{task}.head")
}

impl ModelConfig {
    /// Four 16-filter K=5 convolutions, two 32-unit LSTMs per task, default
    /// layer partition.
    pub fn deep_conv_lstm(heads: BTreeMap<Task, usize>) -> Self {
        let conv_layers = vec![
            ConvSpec {
                filters: DEFAULT_FILTERS,
                kernel: DEFAULT_KERNEL
            };
            4
        ];
        let lstm_layers = vec![
            LstmSpec {
                hidden: DEFAULT_HIDDEN
            };
            2
        ];
        Self::with_default_partition(conv_layers, lstm_layers, heads, DEFAULT_WINDOW, 3)
    }

    pub fn with_default_partition(
        conv_layers: Vec<ConvSpec>,
        lstm_layers: Vec<LstmSpec>,
        heads: BTreeMap<Task, usize>,
        window_length: usize,
        input_channels: usize,
    ) -> Self {
        let group_partition =
            Self::default_partition(conv_layers.len(), lstm_layers.len(), heads.keys().copied());
        Self {
            conv_layers,
            lstm_layers,
            heads,
            group_partition,
            window_length,
            input_channels,
        }
    }

    /// Lower half of the convolutions is pre-trained, the upper half common;
    /// each task's LSTM stack is task-specific and every head personalized.
    pub fn default_partition(
        convs: usize,
        lstms: usize,
        tasks: impl IntoIterator<Item = Task>,
    ) -> BTreeMap<String, LayerGroup> {
        let mut p = BTreeMap::new();
        let pre = convs.div_ceil(2);
        for i in 0..convs {
            let g = if i < pre {
                LayerGroup::PreTrained
            } else {
                LayerGroup::Common
            };
            p.insert(conv_name(i), g);
        }
        for task in tasks {
            for i in 0..lstms {
                p.insert(lstm_name(task, i), LayerGroup::TaskSpecific(task));
            }
            p.insert(head_name(task), LayerGroup::Personalized);
        }
        p
    }

    pub fn tasks(&self) -> impl Iterator<Item = Task> + '_ {
        self.heads.keys().copied()
    }

    pub fn num_classes(&self, task: Task) -> Result<usize> {
        self.heads
            .get(&task)
            .copied()
            .ok_or_else(|| Error::UnconfiguredTask(task.to_string()))
    }

    /// Length of the feature sequence leaving the conv trunk.
    pub fn trunk_length(&self) -> Option<usize> {
        self.conv_layers
            .iter()
            .try_fold(self.window_length, |t, c| t.checked_sub(c.kernel.saturating_sub(1)))
    }

    pub fn trunk_channels(&self) -> usize {
        self.conv_layers
            .last()
            .map_or(self.input_channels, |c| c.filters)
    }

    /// All layers in canonical order: trunk, then per task its LSTMs and head.
    pub fn layers(&self) -> Vec<Layer> {
        let mut out = Vec::new();
        let mut channels = self.input_channels;
        for (i, c) in self.conv_layers.iter().enumerate() {
            out.push(Layer {
                name: conv_name(i),
                spec: LayerSpec::Conv1d {
                    in_channels: channels,
                    out_channels: c.filters,
                    kernel_size: c.kernel,
                },
                task: None,
            });
            channels = c.filters;
        }
        for (&task, &classes) in &self.heads {
            let mut width = channels;
            for (i, l) in self.lstm_layers.iter().enumerate() {
                out.push(Layer {
                    name: lstm_name(task, i),
                    spec: LayerSpec::Lstm {
                        input_size: width,
                        hidden_size: l.hidden,
                    },
                    task: Some(task),
                });
                width = l.hidden;
            }
            out.push(Layer {
                name: head_name(task),
                spec: LayerSpec::Dense {
                    in_features: width,
                    out_features: classes,
                },
                task: Some(task),
            });
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelConfig(m));
        if self.conv_layers.is_empty() {
            return bad("at least one convolutional layer is required".into());
        }
        if self.lstm_layers.is_empty() {
            return bad("at least one LSTM layer is required".into());
        }
        if self.input_channels == 0 {
            return bad("input_channels must be positive".into());
        }
        if self.heads.is_empty() {
            return bad("at least one task head is required".into());
        }
        for (task, &c) in &self.heads {
            if c < 2 {
                return bad(format!("task {task} needs at least 2 classes, got {c}"));
            }
        }
        for (i, c) in self.conv_layers.iter().enumerate() {
            if c.filters == 0 || c.kernel == 0 {
                return bad(format!("{}: filters and kernel must be positive", conv_name(i)));
            }
        }
        if self.lstm_layers.iter().any(|l| l.hidden == 0) {
            return bad("LSTM hidden sizes must be positive".into());
        }
        match self.trunk_length() {
            Some(t) if t >= 1 => {}
            _ => {
                return bad(format!(
                    "window_length {} is too short for the convolution stack",
                    self.window_length
                ))
            }
        }
        let layers = self.layers();
        for layer in &layers {
            let Some(&group) = self.group_partition.get(&layer.name) else {
                return bad(format!("group partition does not cover layer {}", layer.name));
            };
            match (layer.task, group) {
                (None, LayerGroup::TaskSpecific(_)) => {
                    return bad(format!(
                        "shared layer {} cannot be task-specific",
                        layer.name
                    ))
                }
                (Some(t), LayerGroup::TaskSpecific(g)) if g != t => {
                    return bad(format!("layer {} belongs to task {t}, not {g}", layer.name))
                }
                (Some(t), LayerGroup::PreTrained | LayerGroup::Common) => {
                    return bad(format!(
                        "layer {} of the {t} branch must be task-specific or personalized",
                        layer.name
                    ))
                }
                _ => {}
            }
        }
        if let Some(extra) = self
            .group_partition
            .keys()
            .find(|k| !layers.iter().any(|l| &l.name == *k))
        {
            return bad(format!("group partition names unknown layer {extra}"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("model config serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}
