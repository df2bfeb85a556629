use rayon::prelude::*;

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::params::TrainableMask;

use super::aggregate::fedavg_aggregate;
use super::state::GlobalState;
use super::train::{local_train, ClientUpdate, TaskScope, TrainOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundPlan {
    pub participants: Vec<String>,
    pub mask: TrainableMask,
    pub scope: TaskScope,
    pub train: TrainOptions,
}

/// One broadcast, local-train, aggregate cycle. Participants train in
/// parallel on the current rayon pool; aggregated trainable tensors are
/// written back into the global partitions.
pub fn run_round(
    config: &ModelConfig,
    state: &GlobalState,
    plan: &RoundPlan,
    clients: &[ClientDataset],
    seed: u64,
) -> Result<GlobalState> {
    if plan.participants.is_empty() {
        return Err(Error::Aggregation("round has no participants".into()));
    }
    let chosen: Vec<&ClientDataset> = plan
        .participants
        .iter()
        .map(|id| {
            let c = clients
                .iter()
                .find(|c| &c.client_id == id)
                .ok_or_else(|| Error::UnknownClient(id.clone()))?;
            if let TaskScope::Only(task) = plan.scope {
                if !c.has_task(task) {
                    return Err(Error::MissingTask {
                        client: id.clone(),
                        task: task.to_string(),
                    });
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let updates: Vec<ClientUpdate> = chosen
        .par_iter()
        .map(|c| {
            let start = state.materialize(&c.client_id);
            local_train(config, c, &start, &plan.mask, plan.scope, &plan.train, seed)
        })
        .collect::<Result<_>>()?;
    let aggregated = fedavg_aggregate(&updates, &plan.mask)?;
    let mut next = state.clone();
    next.write_global(&aggregated, plan.mask.trainable_names())?;
    Ok(next)
}
