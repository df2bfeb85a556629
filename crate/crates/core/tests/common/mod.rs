#![allow(dead_code)]

use fedmtl_core::data::{generate_synthetic, ClientDataset, DataOptions, Skew, SyntheticSpec};
use fedmtl_core::model::{ConvSpec, LstmSpec, ModelConfig, Task};

pub fn tiny_config(activity: usize, position: usize) -> ModelConfig {
    let mut heads = std::collections::BTreeMap::new();
    heads.insert(Task::Activity, activity);
    if position > 0 {
        heads.insert(Task::Position, position);
    }
    ModelConfig::with_default_partition(
        vec![ConvSpec { filters: 4, kernel: 3 }; 2],
        vec![LstmSpec { hidden: 4 }],
        heads,
        12,
        3,
    )
}

pub fn tiny_options() -> DataOptions {
    DataOptions {
        window_length: 12,
        stride: 6,
        ..DataOptions::default()
    }
}

pub fn tiny_spec(num_clients: usize) -> SyntheticSpec {
    SyntheticSpec {
        num_clients,
        activity_classes: 3,
        position_classes: 2,
        position_clients: 1,
        windows_per_class: 5,
        noise_sigma: 0.3,
        skew: Skew::Swap,
    }
}

pub fn tiny_clients(num_clients: usize, seed: u64) -> Vec<ClientDataset> {
    generate_synthetic(&tiny_spec(num_clients), &tiny_options(), seed).unwrap()
}
