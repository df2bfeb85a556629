//! Experiment regimes: the staged layered-transfer pipeline and the
//! centralized, individual and federated baselines.

mod baselines;
mod layered;

pub use baselines::{
    pool_clients, run_centralized_bulk, run_federated_multi_task, run_federated_one_task,
    run_individual, train_individual, BaselineOutcome, FINAL_STAGE,
};
pub use layered::{plan_stages, pretrain_client, run_layered, Stage, StageKind, StagePlan};

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::federation::TaskScope;
use crate::metrics::{accuracy, confusion, ClientResult, StageResult, TaskResult, Weighting};
use crate::model::{predict, tensor_task, trainable_mask, LayerGroup, ModelConfig, Task};
use crate::params::{ParameterStore, TrainableMask};
use crate::seed::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    CentralizedBulk,
    Individual,
    FederatedOneTask(Task),
    FederatedMultiTask,
    LayeredTransfer,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::CentralizedBulk => f.write_str("centralized_bulk"),
            Regime::Individual => f.write_str("individual"),
            Regime::FederatedOneTask(t) => write!(f, "federated_one_task:{t}"),
            Regime::FederatedMultiTask => f.write_str("federated_multi_task"),
            Regime::LayeredTransfer => f.write_str("layered_transfer"),
        }
    }
}

/// Optimizer and round settings shared by all regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Local epochs per federated round.
    pub local_epochs: usize,
    /// Rounds of the federated baselines.
    pub rounds: usize,
    /// Epochs of individual and centralized training.
    pub epochs: usize,
    /// Fraction of eligible clients sampled each round.
    pub participation: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lr: 0.05,
            batch_size: 16,
            local_epochs: 2,
            rounds: 10,
            epochs: 40,
            participation: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("training.lr must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("training.batch_size must be positive".into()));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Config("training.participation must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Layered-transfer stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StagesConfig {
    /// Client trained alone in the first stage; defaults to the client with
    /// the most distinct position classes.
    pub pretrain_client: Option<String>,
    pub pretrain_epochs: usize,
    pub common_rounds: usize,
    pub task_rounds: usize,
    pub personalize_epochs: usize,
}

impl Default for StagesConfig {
    fn default() -> Self {
        StagesConfig {
            pretrain_client: None,
            pretrain_epochs: 15,
            common_rounds: 10,
            task_rounds: 10,
            personalize_epochs: 5,
        }
    }
}

/// Everything a regime needs besides its own choice of task.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub model: &'a ModelConfig,
    pub clients: &'a [ClientDataset],
    pub training: &'a TrainingConfig,
    pub stages: &'a StagesConfig,
    pub weighting: Weighting,
    pub seed: u64,
}

impl Experiment<'_> {
    pub fn client(&self, id: &str) -> Result<&ClientDataset> {
        self.clients
            .iter()
            .find(|c| c.client_id == id)
            .ok_or_else(|| Error::UnknownClient(id.to_string()))
    }

    /// Clients with availability for `task`, in id order.
    pub fn cohort(&self, task: Task) -> Vec<String> {
        let mut ids: Vec<String> = self
            .clients
            .iter()
            .filter(|c| c.has_task(task) && !c.train.is_empty())
            .map(|c| c.client_id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Clients with at least one available configured task.
    pub fn multi_task_cohort(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .clients
            .iter()
            .filter(|c| !c.train.is_empty() && self.model.tasks().any(|t| c.has_task(t)))
            .map(|c| c.client_id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Configured tasks that have a non-empty cohort.
    pub fn tasks_with_cohort(&self) -> Vec<Task> {
        self.model.tasks().filter(|&t| !self.cohort(t).is_empty()).collect()
    }

    /// Participants of one round, sampled when participation is below 1.
    pub fn participants(&self, cohort: &[String], phase: &str, round: usize) -> Vec<String> {
        let n = cohort.len();
        let k = ((self.training.participation * n as f64).ceil() as usize).clamp(1, n.max(1));
        if k >= n {
            return cohort.to_vec();
        }
        let mut rng = derived_rng(self.seed, &format!("participants/{phase}"), &[round as u64]);
        let mut idx = sample(&mut rng, n, k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cohort[i].clone()).collect()
    }
}

/// Trainable mask of `group` under `scope`: tensors owned by a task outside
/// the scope are frozen.
pub fn scoped_mask(params: &ParameterStore, group: LayerGroup, scope: TaskScope) -> TrainableMask {
    let base = trainable_mask(params, group);
    TrainableMask::from_fn(params, |name, _| {
        base.is_trainable(name)
            && match (scope, tensor_task(name)) {
                (TaskScope::Only(t), Some(owner)) => owner == t,
                _ => true,
            }
    })
}

/// Test accuracy of `params` on one client for each given task that has
/// labeled test windows.
pub fn evaluate_client(
    config: &ModelConfig,
    client: &ClientDataset,
    params: &ParameterStore,
    tasks: &[Task],
) -> Result<ClientResult> {
    let mut out = BTreeMap::new();
    for &task in tasks {
        let classes = config.num_classes(task)?;
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for s in &client.test {
            if let Some(l) = s.labels.get(task) {
                preds.push(predict(config, params, &s.window, task)?);
                labels.push(l);
            }
        }
        if labels.is_empty() {
            continue;
        }
        let n_train = client.train.iter().filter(|s| s.labels.get(task).is_some()).count();
        out.insert(
            task,
            TaskResult {
                accuracy: accuracy(&preds, &labels)?,
                n_test: labels.len(),
                n_train,
                confusion: confusion(task, &preds, &labels, classes)?,
            },
        );
    }
    Ok(ClientResult {
        client_id: client.client_id.clone(),
        tasks: out,
    })
}

/// Evaluates every client on its available tasks with the model `view`
/// returns for it.
pub fn evaluate_stage(
    exp: &Experiment<'_>,
    stage: &str,
    view: impl Fn(&str) -> ParameterStore,
) -> Result<StageResult> {
    let mut ids: Vec<&ClientDataset> = exp.clients.iter().collect();
    ids.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let mut results = Vec::new();
    for c in ids {
        let tasks: Vec<Task> = exp.model.tasks().filter(|&t| c.has_task(t)).collect();
        let r = evaluate_client(exp.model, c, &view(&c.client_id), &tasks)?;
        if !r.tasks.is_empty() {
            results.push(r);
        }
    }
    StageResult::new(stage, results, exp.weighting)
}
