use log::{info, warn};
use rayon::prelude::*;

use super::{evaluate_stage, scoped_mask, Experiment};
use crate::error::{Error, Result};
use crate::federation::{local_train, round_seed, run_round, GlobalState, RoundPlan, TaskScope, TrainOptions};
use crate::metrics::{RegimeResult, StageResult};
use crate::model::{build_model, LayerGroup, Task};
use crate::params::TrainableMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    PreTrain,
    Common,
    TaskSpecific(Task),
    Personalize,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::PreTrain => "PreTrain",
            StageKind::Common => "Common",
            StageKind::TaskSpecific(Task::Activity) => "TaskSpecific(Activity)",
            StageKind::TaskSpecific(Task::Position) => "TaskSpecific(Position)",
            StageKind::Personalize => "Personalize",
        }
    }

    /// File-name friendly form.
    pub fn slug(self) -> String {
        match self {
            StageKind::PreTrain => "pretrain".into(),
            StageKind::Common => "common".into(),
            StageKind::TaskSpecific(t) => format!("task_specific_{t}"),
            StageKind::Personalize => "personalize".into(),
        }
    }

    /// Lowest layer group trained in this stage.
    pub fn group(self) -> LayerGroup {
        match self {
            StageKind::PreTrain => LayerGroup::PreTrained,
            StageKind::Common => LayerGroup::Common,
            StageKind::TaskSpecific(t) => LayerGroup::TaskSpecific(t),
            StageKind::Personalize => LayerGroup::Personalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub kind: StageKind,
    pub participants: Vec<String>,
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
}

/// The client with the most distinct position classes, ties to the lowest id.
pub fn pretrain_client(exp: &Experiment<'_>) -> Result<String> {
    if let Some(id) = &exp.stages.pretrain_client {
        exp.client(id)
            .map_err(|_| Error::Pipeline(format!("pre-training client {id} not found")))?;
        return Ok(id.clone());
    }
    let mut clients: Vec<_> = exp.clients.iter().filter(|c| !c.train.is_empty()).collect();
    clients.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    clients
        .iter()
        .max_by(|a, b| {
            a.distinct_classes(Task::Position)
                .cmp(&b.distinct_classes(Task::Position))
                .then(b.client_id.cmp(&a.client_id))
        })
        .map(|c| c.client_id.clone())
        .ok_or_else(|| Error::Pipeline("no client with training data".into()))
}

pub fn plan_stages(exp: &Experiment<'_>) -> Result<StagePlan> {
    let s = exp.stages;
    let lr = exp.training.lr;
    let all = exp.multi_task_cohort();
    let mut stages = vec![
        Stage {
            kind: StageKind::PreTrain,
            participants: vec![pretrain_client(exp)?],
            rounds: 1,
            local_epochs: s.pretrain_epochs,
            lr,
        },
        Stage {
            kind: StageKind::Common,
            participants: all.clone(),
            rounds: s.common_rounds,
            local_epochs: exp.training.local_epochs,
            lr,
        },
    ];
    for task in Task::ALL {
        stages.push(Stage {
            kind: StageKind::TaskSpecific(task),
            participants: if exp.model.heads.contains_key(&task) { exp.cohort(task) } else { Vec::new() },
            rounds: s.task_rounds,
            local_epochs: exp.training.local_epochs,
            lr,
        });
    }
    stages.push(Stage {
        kind: StageKind::Personalize,
        participants: all,
        rounds: 1,
        local_epochs: s.personalize_epochs,
        lr,
    });
    Ok(StagePlan { stages })
}

/// Runs the four-stage pipeline. `on_stage` sees the state after every
/// stage (for checkpointing).
pub fn run_layered(
    exp: &Experiment<'_>,
    mut on_stage: impl FnMut(StageKind, &GlobalState) -> Result<()>,
) -> Result<(GlobalState, RegimeResult)> {
    let plan = plan_stages(exp)?;
    let init = build_model(exp.model, exp.seed)?;
    let mut state = GlobalState::from_store(&init.params);
    let mut history: Vec<StageResult> = Vec::new();
    for stage in &plan.stages {
        let opts = TrainOptions {
            epochs: stage.local_epochs,
            lr: stage.lr,
            batch_size: exp.training.batch_size,
        };
        let phase = stage.kind.slug();
        match stage.kind {
            StageKind::PreTrain => {
                let client = exp.client(&stage.participants[0])?;
                let start = state.global_store();
                let mask = TrainableMask::all(&start);
                let seed = round_seed(exp.seed, &phase, 0);
                let update = local_train(exp.model, client, &start, &mask, TaskScope::All, &opts, seed)?;
                let names: Vec<String> = update.params.names().map(str::to_string).collect();
                state.write_global(&update.params, names.iter().map(String::as_str))?;
            }
            StageKind::Common | StageKind::TaskSpecific(_) => {
                let scope = match stage.kind {
                    StageKind::TaskSpecific(t) => TaskScope::Only(t),
                    _ => TaskScope::All,
                };
                if stage.participants.is_empty() {
                    warn!("stage {} has no eligible clients; skipped", stage.kind.name());
                } else {
                    let mask = scoped_mask(&state.global_store(), stage.kind.group(), scope);
                    for r in 0..stage.rounds {
                        let plan = RoundPlan {
                            participants: exp.participants(&stage.participants, &phase, r),
                            mask: mask.clone(),
                            scope,
                            train: opts,
                        };
                        state = run_round(exp.model, &state, &plan, exp.clients, round_seed(exp.seed, &phase, r))?;
                    }
                }
            }
            StageKind::Personalize => {
                let seed = round_seed(exp.seed, &phase, 0);
                let updates = stage
                    .participants
                    .par_iter()
                    .map(|id| {
                        let client = exp.client(id)?;
                        let start = state.materialize(id);
                        let mask = scoped_mask(&start, LayerGroup::Personalized, TaskScope::All);
                        local_train(exp.model, client, &start, &mask, TaskScope::All, &opts, seed)
                    })
                    .collect::<Result<Vec<_>>>()?;
                for u in &updates {
                    state.set_client(&u.client_id, &u.params);
                }
            }
        }
        let result = evaluate_stage(exp, stage.kind.name(), |id| state.materialize(id))?;
        if let Some(o) = &result.overall {
            info!("{}: weighted accuracy {:.4} over {}", stage.kind.name(), o.accuracy, o.n_total);
        }
        history.push(result);
        on_stage(stage.kind, &state)?;
    }
    Ok((
        state,
        RegimeResult {
            regime: super::Regime::LayeredTransfer.to_string(),
            stages: history,
        },
    ))
}
