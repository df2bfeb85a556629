//! DeepConvLSTM-style network with per-task branches, partitioned into
//! transfer-learning layer groups.

mod config;
mod group;

use std::collections::BTreeMap;

pub use config::{
    conv_name, head_name, lstm_name, ConvSpec, Layer, LayerSpec, LstmSpec, ModelConfig,
    DEFAULT_FILTERS, DEFAULT_HIDDEN, DEFAULT_KERNEL, DEFAULT_WINDOW,
};
pub use group::{LayerGroup, Task};

use crate::error::{Error, Result};
use crate::nn::{self, LstmCache, LstmParams};
use crate::params::{Gradients, ParameterStore, TrainableMask};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParameterStore,
}

/// He-uniform bound for the ReLU convolutions, so activations keep their scale
/// through the trunk.
pub const CONV_INIT_GAIN: f64 = 2.449_489_742_783_178;

/// Builds a model with weights drawn uniformly from `[-g/sqrt(fan_in),
/// g/sqrt(fan_in)]` (g = 1 except for convolutions), one stream per tensor.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut params = ParameterStore::new();
    for layer in config.layers() {
        let group = config.group_partition[&layer.name];
        let gain = match layer.spec {
            LayerSpec::Conv1d { .. } => CONV_INIT_GAIN,
            _ => 1.0,
        };
        let mut add = |suffix: &str, shape: &[usize], fan_in: usize| {
            let name = format!("{}.{suffix}", layer.name);
            let t = nn::uniform_init(shape, fan_in, gain, seed, &name);
            params.insert(name, group, t);
        };
        match layer.spec {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
            } => {
                let fan_in = in_channels * kernel_size;
                add("weight", &[out_channels, in_channels, kernel_size], fan_in);
                add("bias", &[out_channels], fan_in);
            }
            LayerSpec::Lstm {
                input_size,
                hidden_size,
            } => {
                add("w", &[4 * hidden_size, input_size], input_size);
                add("u", &[4 * hidden_size, hidden_size], hidden_size);
                add("b", &[4 * hidden_size], hidden_size);
            }
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                add("weight", &[out_features, in_features], in_features);
                add("bias", &[out_features], in_features);
            }
        }
    }
    Ok(Model {
        config: config.clone(),
        params,
    })
}

impl Model {
    pub fn forward(&self, window: &Tensor) -> Result<BTreeMap<Task, Tensor>> {
        forward(&self.config, &self.params, window)
    }

    pub fn predict(&self, window: &Tensor, task: Task) -> Result<usize> {
        predict(&self.config, &self.params, window, task)
    }

    pub fn trainable_mask(&self, stage: LayerGroup) -> TrainableMask {
        trainable_mask(&self.params, stage)
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeroed(&self) -> Model {
        Model {
            config: self.config.clone(),
            params: self.params.zeros_like(),
        }
    }
}

/// Tensors in groups below `stage` are frozen. During a task-specific stage
/// the other task's task-specific tensors are frozen as well.
pub fn trainable_mask(params: &ParameterStore, stage: LayerGroup) -> TrainableMask {
    TrainableMask::from_fn(params, |_, group| match (stage, group) {
        (LayerGroup::TaskSpecific(s), LayerGroup::TaskSpecific(g)) => s == g,
        _ => group.rank() >= stage.rank(),
    })
}

/// Task owning a tensor, read from its `{task}.` name prefix. Trunk tensors
/// belong to no task.
pub fn tensor_task(name: &str) -> Option<Task> {
    name.split('.').next()?.parse().ok()
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

pub fn predict(
    config: &ModelConfig,
    params: &ParameterStore,
    window: &Tensor,
    task: Task,
) -> Result<usize> {
    config.num_classes(task)?;
    let trunk = trunk_forward(config, params, window)?;
    let branch = branch_forward(config, params, task, trunk.features())?;
    Ok(argmax(branch.logits.data()))
}

pub fn forward(
    config: &ModelConfig,
    params: &ParameterStore,
    window: &Tensor,
) -> Result<BTreeMap<Task, Tensor>> {
    let trunk = trunk_forward(config, params, window)?;
    config
        .tasks()
        .map(|task| Ok((task, branch_forward(config, params, task, trunk.features())?.logits)))
        .collect()
}

struct TrunkCache {
    /// Input of every conv layer, followed by the final activated output.
    inputs: Vec<Tensor>,
    /// Pre-activation output of every conv layer.
    pre: Vec<Tensor>,
}

impl TrunkCache {
    fn features(&self) -> &Tensor {
        self.inputs.last().expect("trunk has an output")
    }
}

fn trunk_forward(config: &ModelConfig, params: &ParameterStore, window: &Tensor) -> Result<TrunkCache> {
    window.expect_shape(
        &[config.window_length, config.input_channels],
        "model input window",
    )?;
    let mut inputs = vec![window.clone()];
    let mut pre = Vec::with_capacity(config.conv_layers.len());
    for i in 0..config.conv_layers.len() {
        let name = conv_name(i);
        let z = nn::conv1d_forward(
            inputs.last().expect("non-empty"),
            params.tensor(&format!("{name}.weight"))?,
            params.tensor(&format!("{name}.bias"))?,
        )?;
        inputs.push(nn::relu(&z));
        pre.push(z);
    }
    Ok(TrunkCache { inputs, pre })
}

struct BranchCache {
    lstm: Vec<LstmCache>,
    last_hidden: Tensor,
    logits: Tensor,
}

fn lstm_params<'a>(params: &'a ParameterStore, layer: &str) -> Result<LstmParams<'a>> {
    Ok(LstmParams {
        w: params.tensor(&format!("{layer}.w"))?,
        u: params.tensor(&format!("{layer}.u"))?,
        b: params.tensor(&format!("{layer}.b"))?,
    })
}

fn branch_forward(
    config: &ModelConfig,
    params: &ParameterStore,
    task: Task,
    features: &Tensor,
) -> Result<BranchCache> {
    let mut caches: Vec<LstmCache> = Vec::with_capacity(config.lstm_layers.len());
    for i in 0..config.lstm_layers.len() {
        let input = caches.last().map_or(features, |c| c.hidden());
        let cache = nn::lstm_forward_cached(input, lstm_params(params, &lstm_name(task, i))?)?;
        caches.push(cache);
    }
    let hs = caches.last().expect("at least one LSTM").hidden();
    let last_hidden = Tensor::from_vec(hs.row(hs.rows() - 1).to_vec());
    let head = head_name(task);
    let logits = nn::dense_forward(
        &last_hidden,
        params.tensor(&format!("{head}.weight"))?,
        params.tensor(&format!("{head}.bias"))?,
    )?;
    Ok(BranchCache {
        lstm: caches,
        last_hidden,
        logits,
    })
}

fn add_grad(grads: &mut Gradients, name: &str, g: &Tensor) -> Result<()> {
    grads.get_mut(name)?.add_scaled(1.0, g);
    Ok(())
}

/// Sum of per-task cross-entropy losses for one sample. Gradients are added
/// into `grads`; tasks without a label contribute nothing.
///
/// Backpropagation stops at the deepest layer that has a trainable tensor
/// under `mask`, so frozen lower layers cost nothing. Gradients of frozen
/// tensors above that point are still filled in.
pub fn accumulate_loss_grad(
    config: &ModelConfig,
    params: &ParameterStore,
    window: &Tensor,
    labels: &[(Task, usize)],
    mask: &TrainableMask,
    grads: &mut Gradients,
) -> Result<f64> {
    let trunk = trunk_forward(config, params, window)?;
    let trunk_trainable = (0..config.conv_layers.len()).any(|i| {
        let n = conv_name(i);
        mask.is_trainable(&format!("{n}.weight")) || mask.is_trainable(&format!("{n}.bias"))
    });
    let features = trunk.features();
    let mut d_features = Tensor::zeros(features.shape());
    let mut total = 0.0;
    for &(task, label) in labels {
        let branch = branch_forward(config, params, task, features)?;
        let (loss, d_logits) = nn::softmax_cross_entropy(&branch.logits, label)?;
        total += loss;

        let head = head_name(task);
        let hw = format!("{head}.weight");
        let hb = format!("{head}.bias");
        let dg = nn::dense_backward(
            &branch.last_hidden,
            params.tensor(&hw)?,
            params.tensor(&hb)?,
            &d_logits,
        )?;
        add_grad(grads, &hw, &dg.weights)?;
        add_grad(grads, &hb, &dg.bias)?;

        // Lowest LSTM layer that needs gradients, or 0 if the trunk does.
        let n_lstm = config.lstm_layers.len();
        let lowest = if trunk_trainable {
            Some(0)
        } else {
            (0..n_lstm).find(|&i| {
                let n = lstm_name(task, i);
                ["w", "u", "b"]
                    .iter()
                    .any(|s| mask.is_trainable(&format!("{n}.{s}")))
            })
        };
        let Some(lowest) = lowest else { continue };

        let top = branch.lstm.last().expect("at least one LSTM").hidden();
        let mut d_hidden = Tensor::zeros(top.shape());
        d_hidden.row_mut(top.rows() - 1).copy_from_slice(dg.input.data());
        for i in (lowest..n_lstm).rev() {
            let name = lstm_name(task, i);
            let g = nn::lstm_backward(&branch.lstm[i], lstm_params(params, &name)?, &d_hidden)?;
            add_grad(grads, &format!("{name}.w"), &g.w)?;
            add_grad(grads, &format!("{name}.u"), &g.u)?;
            add_grad(grads, &format!("{name}.b"), &g.b)?;
            d_hidden = g.input;
        }
        if trunk_trainable {
            d_features.add_scaled(1.0, &d_hidden);
        }
    }
    if trunk_trainable && !labels.is_empty() {
        let mut d_out = d_features;
        for i in (0..config.conv_layers.len()).rev() {
            let name = conv_name(i);
            let w = format!("{name}.weight");
            let b = format!("{name}.bias");
            let d_pre = nn::relu_backward(&trunk.pre[i], &d_out);
            let g = nn::conv1d_backward(&trunk.inputs[i], params.tensor(&w)?, params.tensor(&b)?, &d_pre)?;
            add_grad(grads, &w, &g.weights)?;
            add_grad(grads, &b, &g.bias)?;
            d_out = g.input;
        }
    }
    Ok(total)
}

/// Loss and full gradient for one sample with every tensor trainable.
pub fn loss_and_grad(
    config: &ModelConfig,
    params: &ParameterStore,
    window: &Tensor,
    labels: &[(Task, usize)],
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_for(params);
    let loss = accumulate_loss_grad(
        config,
        params,
        window,
        labels,
        &TrainableMask::all(params),
        &mut grads,
    )?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("sample loss".into()));
    }
    Ok((loss, grads))
}
