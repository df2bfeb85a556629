//! Simulated federated protocol: local training under a freeze mask, FedAvg
//! aggregation, round orchestration and checkpoints.

mod aggregate;
mod checkpoint;
mod round;
mod state;
mod train;

pub use aggregate::fedavg_aggregate;
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use round::{run_round, RoundPlan};
pub use state::GlobalState;
pub use train::{local_train, round_seed, ClientUpdate, TaskScope, TrainOptions};
