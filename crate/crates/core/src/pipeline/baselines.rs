use std::collections::BTreeMap;

use super::{evaluate_client, evaluate_stage, scoped_mask, Experiment, Regime};
use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::federation::{local_train, round_seed, run_round, GlobalState, RoundPlan, TaskScope, TrainOptions};
use crate::metrics::{ClientResult, RegimeResult, StageResult};
use crate::model::{build_model, LayerGroup, Task};
use crate::params::ParameterStore;

/// Stage name used by single-stage regimes.
pub const FINAL_STAGE: &str = "final";

/// Final parameters keyed by a label (task, client or both) plus results.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub models: BTreeMap<String, GlobalState>,
    pub result: RegimeResult,
}

const PHASE: &str = "train";

fn one_task_mask(params: &ParameterStore, task: Task) -> crate::params::TrainableMask {
    scoped_mask(params, LayerGroup::PreTrained, TaskScope::Only(task))
}

fn epochs_options(exp: &Experiment<'_>, epochs: usize) -> TrainOptions {
    TrainOptions {
        epochs,
        lr: exp.training.lr,
        batch_size: exp.training.batch_size,
    }
}

fn require_task(exp: &Experiment<'_>, task: Task) -> Result<Vec<String>> {
    exp.model.num_classes(task)?;
    let cohort = exp.cohort(task);
    if cohort.is_empty() {
        return Err(Error::Pipeline(format!("no client has task {task}")));
    }
    Ok(cohort)
}

/// Concatenates the cohort's train and test sets in client-id order.
pub fn pool_clients(clients: &[&ClientDataset], task: Task) -> ClientDataset {
    let mut sorted = clients.to_vec();
    sorted.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let train: Vec<_> = sorted.iter().flat_map(|c| c.train.iter().cloned()).collect();
    let test = sorted.iter().flat_map(|c| c.test.iter().cloned()).collect();
    ClientDataset {
        client_id: "pooled".into(),
        n_k: train.len(),
        train,
        test,
        task_availability: [(task, true)].into(),
    }
}

/// One model per task trained on the pooled data of the task's cohort.
pub fn run_centralized_bulk(exp: &Experiment<'_>, tasks: &[Task]) -> Result<BaselineOutcome> {
    let mut models = BTreeMap::new();
    let mut clients = Vec::new();
    for &task in tasks {
        let cohort = require_task(exp, task)?;
        let members = cohort.iter().map(|id| exp.client(id)).collect::<Result<Vec<_>>>()?;
        let pooled = pool_clients(&members, task);
        let start = build_model(exp.model, exp.seed)?.params;
        let mask = one_task_mask(&start, task);
        let opts = epochs_options(exp, exp.training.epochs);
        let u = local_train(exp.model, &pooled, &start, &mask, TaskScope::Only(task), &opts, round_seed(exp.seed, PHASE, 0))?;
        clients.push(ClientResult {
            client_id: format!("pooled:{task}"),
            ..evaluate_client(exp.model, &pooled, &u.params, &[task])?
        });
        models.insert(task.to_string(), GlobalState::from_store(&u.params));
    }
    Ok(BaselineOutcome {
        models,
        result: RegimeResult {
            regime: Regime::CentralizedBulk.to_string(),
            stages: vec![StageResult::new(FINAL_STAGE, clients, exp.weighting)?],
        },
    })
}

/// Parameters of individual training of one client on one task.
pub fn train_individual(exp: &Experiment<'_>, client: &ClientDataset, task: Task) -> Result<ParameterStore> {
    let start = build_model(exp.model, exp.seed)?.params;
    let mask = one_task_mask(&start, task);
    let opts = epochs_options(exp, exp.training.epochs);
    Ok(local_train(exp.model, client, &start, &mask, TaskScope::Only(task), &opts, round_seed(exp.seed, PHASE, 0))?.params)
}

/// Every cohort client trains its own model per task.
pub fn run_individual(exp: &Experiment<'_>, tasks: &[Task]) -> Result<BaselineOutcome> {
    let mut models = BTreeMap::new();
    let mut per_client: BTreeMap<String, ClientResult> = BTreeMap::new();
    for &task in tasks {
        for id in require_task(exp, task)? {
            let client = exp.client(&id)?;
            let params = train_individual(exp, client, task)?;
            let r = evaluate_client(exp.model, client, &params, &[task])?;
            per_client
                .entry(id.clone())
                .or_insert_with(|| ClientResult { client_id: id.clone(), tasks: BTreeMap::new() })
                .tasks
                .extend(r.tasks);
            models.insert(format!("{task}_{id}"), GlobalState::from_store(&params));
        }
    }
    Ok(BaselineOutcome {
        models,
        result: RegimeResult {
            regime: Regime::Individual.to_string(),
            stages: vec![StageResult::new(FINAL_STAGE, per_client.into_values().collect(), exp.weighting)?],
        },
    })
}

fn federate(exp: &Experiment<'_>, cohort: &[String], scope: TaskScope) -> Result<GlobalState> {
    let start = build_model(exp.model, exp.seed)?.params;
    let mask = match scope {
        TaskScope::All => scoped_mask(&start, LayerGroup::PreTrained, scope),
        TaskScope::Only(t) => one_task_mask(&start, t),
    };
    let mut state = GlobalState::from_store(&start);
    for r in 0..exp.training.rounds {
        let plan = RoundPlan {
            participants: exp.participants(cohort, PHASE, r),
            mask: mask.clone(),
            scope,
            train: epochs_options(exp, exp.training.local_epochs),
        };
        state = run_round(exp.model, &state, &plan, exp.clients, round_seed(exp.seed, PHASE, r))?;
    }
    Ok(state)
}

/// Federated rounds over the task's cohort, training only that task.
pub fn run_federated_one_task(exp: &Experiment<'_>, task: Task) -> Result<BaselineOutcome> {
    let cohort = require_task(exp, task)?;
    let state = federate(exp, &cohort, TaskScope::Only(task))?;
    let members: Vec<&ClientDataset> = cohort.iter().map(|id| exp.client(id)).collect::<Result<_>>()?;
    let mut clients = Vec::new();
    for c in members {
        clients.push(evaluate_client(exp.model, c, &state.global_store(), &[task])?);
    }
    Ok(BaselineOutcome {
        models: [(task.to_string(), state)].into(),
        result: RegimeResult {
            regime: Regime::FederatedOneTask(task).to_string(),
            stages: vec![StageResult::new(FINAL_STAGE, clients, exp.weighting)?],
        },
    })
}

/// Federated rounds over all clients, each training the heads it has labels
/// for, with a single aggregation over all tensors.
pub fn run_federated_multi_task(exp: &Experiment<'_>) -> Result<BaselineOutcome> {
    let cohort = exp.multi_task_cohort();
    if cohort.is_empty() {
        return Err(Error::Pipeline("no client has training data".into()));
    }
    let state = federate(exp, &cohort, TaskScope::All)?;
    let result = evaluate_stage(exp, FINAL_STAGE, |_| state.global_store())?;
    Ok(BaselineOutcome {
        models: [("global".to_string(), state)].into(),
        result: RegimeResult {
            regime: Regime::FederatedMultiTask.to_string(),
            stages: vec![result],
        },
    })
}
