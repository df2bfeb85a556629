use rand::seq::SliceRandom;

use crate::data::{ClientDataset, WindowedSample};
use crate::error::{Error, Result};
use crate::model::{accumulate_loss_grad, ModelConfig, Task};
use crate::nn::sgd_step_in_place;
use crate::params::{Gradients, ParameterStore, TrainableMask};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: String,
    pub params: ParameterStore,
    pub n_k: usize,
}

/// Which task labels contribute to the local loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskScope {
    /// Every task the client has available.
    All,
    Only(Task),
}

impl TaskScope {
    /// Tasks whose labels `client` trains on under this scope.
    pub fn tasks(self, config: &ModelConfig, client: &ClientDataset) -> Vec<Task> {
        config
            .tasks()
            .filter(|&t| client.has_task(t))
            .filter(|&t| match self {
                TaskScope::All => true,
                TaskScope::Only(s) => s == t,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

/// Seed for local training in one round of a named phase. It does not
/// depend on the client, so a one-client federation replays individual
/// training exactly.
pub fn round_seed(base: u64, phase: &str, round: usize) -> u64 {
    derive_seed(base, &format!("round/{phase}"), &[round as u64])
}

/// Mini-batch SGD on the client's training windows. Each batch step uses the
/// mean gradient of the summed per-task cross-entropy over the batch.
/// Samples without a label in scope are skipped; `n_k` counts the rest.
pub fn local_train(
    config: &ModelConfig,
    client: &ClientDataset,
    start: &ParameterStore,
    mask: &TrainableMask,
    scope: TaskScope,
    opts: &TrainOptions,
    seed: u64,
) -> Result<ClientUpdate> {
    if !mask.is_congruent(start) {
        return Err(Error::Shape("mask is not congruent with parameters".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let tasks = scope.tasks(config, client);
    let samples: Vec<(&WindowedSample, Vec<(Task, usize)>)> = client
        .train
        .iter()
        .map(|s| (s, s.labels.pairs(&tasks)))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyTrainSet(client.client_id.clone()));
    }
    let mut params = start.clone();
    if mask.any() {
        let mut rng = rng(seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..opts.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(opts.batch_size) {
                let mut grads = Gradients::zeros_for(&params);
                for &i in batch {
                    let (s, labels) = &samples[i];
                    let loss = accumulate_loss_grad(config, &params, &s.window, labels, mask, &mut grads)?;
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!("loss on client {}", client.client_id)));
                    }
                }
                grads.scale(1.0 / batch.len() as f64);
                sgd_step_in_place(&mut params, &grads, mask, opts.lr)?;
            }
        }
    }
    Ok(ClientUpdate {
        client_id: client.client_id.clone(),
        params,
        n_k: samples.len(),
    })
}
