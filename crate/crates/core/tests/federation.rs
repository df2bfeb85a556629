mod common;

use std::collections::BTreeMap;

use common::{tiny_clients, tiny_config};
use fedmtl_core::federation::{
    fedavg_aggregate, load_checkpoint, local_train, read_checkpoint, run_round, save_checkpoint,
    write_checkpoint, ClientUpdate, GlobalState, RoundPlan, TaskScope, TrainOptions,
};
use fedmtl_core::model::{build_model, loss_and_grad, trainable_mask, LayerGroup, ModelConfig, Task};
use fedmtl_core::nn::sgd_step;
use fedmtl_core::params::{ParameterStore, TrainableMask};
use fedmtl_core::tensor::Tensor;
use fedmtl_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_store(v: f64) -> ParameterStore {
    let mut s = ParameterStore::new();
    s.insert("w", LayerGroup::Common, Tensor::from_vec(vec![v]));
    s
}

fn update(id: &str, params: ParameterStore, n_k: usize) -> ClientUpdate {
    ClientUpdate {
        client_id: id.into(),
        params,
        n_k,
    }
}

fn random_updates(rng: &mut ChaCha8Rng, k: usize) -> Vec<ClientUpdate> {
    let cfg = tiny_config(3, 2);
    (0..k)
        .map(|i| {
            let params = build_model(&cfg, rng.random()).unwrap().params;
            update(&format!("c{i:02}"), params, rng.random_range(1..500))
        })
        .collect()
}

fn brute_force_mean(updates: &[ClientUpdate], name: &str) -> Vec<f64> {
    let total: f64 = updates.iter().map(|u| u.n_k as f64).sum();
    let len = updates[0].params.tensor(name).unwrap().len();
    (0..len)
        .map(|i| {
            updates
                .iter()
                .map(|u| u.n_k as f64 * u.params.tensor(name).unwrap().data()[i])
                .sum::<f64>()
                / total
        })
        .collect()
}

#[test]
fn two_scalar_updates_average_to_three_point_five() {
    let ups = [update("a", scalar_store(2.0), 1), update("b", scalar_store(4.0), 3)];
    let out = fedavg_aggregate(&ups, &TrainableMask::all(&ups[0].params)).unwrap();
    assert_eq!(out.tensor("w").unwrap().data(), &[3.5]);
}

#[test]
fn single_update_is_identity() {
    let ups = random_updates(&mut ChaCha8Rng::seed_from_u64(1), 1);
    let out = fedavg_aggregate(&ups, &TrainableMask::all(&ups[0].params)).unwrap();
    assert!(out.bit_eq(&ups[0].params));
}

#[test]
fn random_updates_match_weighted_mean_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ups = random_updates(&mut rng, 5);
    let mask = TrainableMask::all(&ups[0].params);
    let out = fedavg_aggregate(&ups, &mask).unwrap();
    for (name, p) in out.iter() {
        let oracle = brute_force_mean(&ups, name);
        for (a, b) in p.tensor.data().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "{name}: {a} vs {b}");
        }
    }
    let mut reversed = ups.clone();
    reversed.reverse();
    assert!(fedavg_aggregate(&reversed, &mask).unwrap().bit_eq(&out));
}

#[test]
fn frozen_tensors_are_copied_and_checked() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ups = random_updates(&mut rng, 3);
    let mask = trainable_mask(&ups[0].params, LayerGroup::Personalized);
    let base = ups[0].params.clone();
    for u in &mut ups {
        for (name, p) in u.params.iter_mut() {
            if !mask.is_trainable(name) {
                p.tensor = base.tensor(name).unwrap().clone();
            }
        }
    }
    let out = fedavg_aggregate(&ups, &mask).unwrap();
    for (name, p) in out.iter() {
        if !mask.is_trainable(name) {
            assert!(p.tensor.bit_eq(base.tensor(name).unwrap()));
        }
    }
    let v = &mut ups[2].params.get_mut("conv1.weight").unwrap().tensor.data_mut()[0];
    *v = f64::from_bits(v.to_bits() + 1);
    match fedavg_aggregate(&ups, &mask) {
        Err(Error::FreezeViolation(name)) => assert_eq!(name, "conv1.weight"),
        other => panic!("expected freeze violation, got {other:?}"),
    }
}

#[test]
fn incongruent_update_rejected() {
    let ups = [
        update("a", scalar_store(1.0), 1),
        update("b", {
            let mut s = ParameterStore::new();
            s.insert("w", LayerGroup::Common, Tensor::from_vec(vec![1.0, 2.0]));
            s
        }, 1),
    ];
    assert!(fedavg_aggregate(&ups, &TrainableMask::all(&ups[0].params)).is_err());
    assert!(fedavg_aggregate(&[], &TrainableMask::all(&ups[0].params)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn aggregation_is_permutation_invariant(seed in any::<u64>(), k in 1usize..=8, rot in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ups = random_updates(&mut rng, k);
        let mask = TrainableMask::all(&ups[0].params);
        let out = fedavg_aggregate(&ups, &mask).unwrap();
        let mut shuffled = ups.clone();
        shuffled.rotate_left(rot % k);
        shuffled.swap(0, k - 1);
        prop_assert!(fedavg_aggregate(&shuffled, &mask).unwrap().bit_eq(&out));
        for (name, p) in out.iter() {
            for (a, b) in p.tensor.data().iter().zip(&brute_force_mean(&ups, name)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn aggregation_is_idempotent(seed in any::<u64>(), k in 1usize..=6, n in proptest::collection::vec(1usize..1000, 6)) {
        let params = build_model(&tiny_config(3, 2), seed).unwrap().params;
        let ups: Vec<_> = (0..k).map(|i| update(&format!("c{i}"), params.clone(), n[i])).collect();
        prop_assert!(fedavg_aggregate(&ups, &TrainableMask::all(&params)).unwrap().bit_eq(&params));
    }

    #[test]
    fn weights_sum_to_one(n in proptest::collection::vec(1usize..100_000, 1..16)) {
        let total: f64 = n.iter().map(|&x| x as f64).sum();
        let s: f64 = n.iter().map(|&x| x as f64 / total).sum();
        prop_assert!((s - 1.0).abs() <= 1e-15);
    }
}

fn opts(epochs: usize) -> TrainOptions {
    TrainOptions {
        epochs,
        lr: 0.1,
        batch_size: 4,
    }
}

#[test]
fn zero_epochs_returns_start() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(2, 5);
    let start = build_model(&cfg, 1).unwrap().params;
    let u = local_train(&cfg, &clients[0], &start, &TrainableMask::all(&start), TaskScope::All, &opts(0), 9).unwrap();
    assert!(u.params.bit_eq(&start));
    assert_eq!(u.n_k, clients[0].train.len());
}

#[test]
fn all_frozen_mask_keeps_params() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(2, 5);
    let start = build_model(&cfg, 1).unwrap().params;
    let u = local_train(&cfg, &clients[0], &start, &TrainableMask::none(&start), TaskScope::All, &opts(5), 9).unwrap();
    assert!(u.params.bit_eq(&start));
}

#[test]
fn frozen_groups_untouched_by_training() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(1, 5);
    let start = build_model(&cfg, 1).unwrap().params;
    let mask = trainable_mask(&start, LayerGroup::TaskSpecific(Task::Activity));
    let u = local_train(&cfg, &clients[0], &start, &mask, TaskScope::Only(Task::Activity), &opts(2), 9).unwrap();
    for (name, p) in u.params.iter() {
        let same = p.tensor.bit_eq(start.tensor(name).unwrap());
        if !mask.is_trainable(name) {
            assert!(same, "{name} changed while frozen");
        }
    }
    assert!(!u.params.tensor("activity.lstm1.w").unwrap().bit_eq(start.tensor("activity.lstm1.w").unwrap()));
    assert!(u.params.tensor("position.head.weight").unwrap().bit_eq(start.tensor("position.head.weight").unwrap()));
}

#[test]
fn single_sample_step_matches_hand_composition() {
    let cfg = tiny_config(3, 2);
    let mut client = tiny_clients(1, 5).remove(0);
    client.train.truncate(1);
    let start = build_model(&cfg, 4).unwrap().params;
    let o = TrainOptions { epochs: 1, lr: 0.1, batch_size: 8 };
    let u = local_train(&cfg, &client, &start, &TrainableMask::all(&start), TaskScope::All, &o, 0).unwrap();
    let s = &client.train[0];
    let (_, grads) = loss_and_grad(&cfg, &start, &s.window, &s.labels.pairs(&Task::ALL)).unwrap();
    let expected = sgd_step(&start, &grads, &TrainableMask::all(&start), 0.1).unwrap();
    assert!(u.params.bit_eq(&expected));
    assert_eq!(u.n_k, 1);
}

#[test]
fn empty_train_set_is_error() {
    let cfg = tiny_config(3, 2);
    let mut client = tiny_clients(1, 5).remove(0);
    client.train.clear();
    let start = build_model(&cfg, 4).unwrap().params;
    let r = local_train(&cfg, &client, &start, &TrainableMask::all(&start), TaskScope::All, &opts(1), 0);
    assert!(matches!(r, Err(Error::EmptyTrainSet(_))));
}

#[test]
fn local_training_is_deterministic() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(1, 5);
    let start = build_model(&cfg, 1).unwrap().params;
    let mask = TrainableMask::all(&start);
    let a = local_train(&cfg, &clients[0], &start, &mask, TaskScope::All, &opts(2), 3).unwrap();
    let b = local_train(&cfg, &clients[0], &start, &mask, TaskScope::All, &opts(2), 3).unwrap();
    let c = local_train(&cfg, &clients[0], &start, &mask, TaskScope::All, &opts(2), 4).unwrap();
    assert!(a.params.bit_eq(&b.params));
    assert!(!a.params.bit_eq(&c.params));
}

fn plan(cfg_params: &ParameterStore, participants: &[&str], epochs: usize) -> RoundPlan {
    RoundPlan {
        participants: participants.iter().map(|s| s.to_string()).collect(),
        mask: trainable_mask(cfg_params, LayerGroup::Common),
        scope: TaskScope::All,
        train: opts(epochs),
    }
}

#[test]
fn one_participant_zero_epochs_leaves_state() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(3, 5);
    let state = GlobalState::from_store(&build_model(&cfg, 1).unwrap().params);
    let next = run_round(&cfg, &state, &plan(&state.global_store(), &["c00"], 0), &clients, 1).unwrap();
    assert_eq!(next, state);
}

#[test]
fn identical_participants_aggregate_to_either_update() {
    let cfg = tiny_config(3, 2);
    let mut clients = tiny_clients(1, 5);
    let mut twin = clients[0].clone();
    twin.client_id = "twin".into();
    clients.push(twin);
    let state = GlobalState::from_store(&build_model(&cfg, 1).unwrap().params);
    let p = plan(&state.global_store(), &["c00", "twin"], 1);
    let next = run_round(&cfg, &state, &p, &clients, 8).unwrap();
    let solo = local_train(&cfg, &clients[0], &state.global_store(), &p.mask, p.scope, &p.train, 8).unwrap();
    assert!(next.global_store().bit_eq(&solo.params));
}

#[test]
fn round_equals_scripted_calls() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(3, 5);
    let store = build_model(&cfg, 1).unwrap().params;
    let state = GlobalState::from_store(&store);
    let p = plan(&store, &["c02", "c00", "c01"], 1);
    let next = run_round(&cfg, &state, &p, &clients, 11).unwrap();

    let updates: Vec<_> = clients
        .iter()
        .map(|c| local_train(&cfg, c, &store, &p.mask, p.scope, &p.train, 11).unwrap())
        .collect();
    let agg = fedavg_aggregate(&updates, &p.mask).unwrap();
    assert!(next.global_store().bit_eq(&agg));
    for (name, param) in next.global_store().iter() {
        if !p.mask.is_trainable(name) {
            assert!(param.tensor.bit_eq(store.tensor(name).unwrap()));
        }
    }
}

#[test]
fn round_results_independent_of_thread_count() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(4, 5);
    let state = GlobalState::from_store(&build_model(&cfg, 1).unwrap().params);
    let p = plan(&state.global_store(), &["c00", "c01", "c02", "c03"], 1);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_round(&cfg, &state, &p, &clients, 2).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn participant_without_task_is_rejected() {
    let cfg = tiny_config(3, 2);
    let clients = tiny_clients(2, 5);
    let state = GlobalState::from_store(&build_model(&cfg, 1).unwrap().params);
    let mut p = plan(&state.global_store(), &["c00", "c01"], 1);
    p.scope = TaskScope::Only(Task::Position);
    assert!(matches!(
        run_round(&cfg, &state, &p, &clients, 1),
        Err(Error::MissingTask { .. })
    ));
    p.participants = vec!["nobody".into()];
    assert!(matches!(run_round(&cfg, &state, &p, &clients, 1), Err(Error::UnknownClient(_))));
}

fn default_state() -> (ModelConfig, GlobalState) {
    let heads: BTreeMap<Task, usize> = [(Task::Activity, 5), (Task::Position, 4)].into();
    let cfg = ModelConfig::deep_conv_lstm(heads);
    let state = GlobalState::from_store(&build_model(&cfg, 3).unwrap().params);
    (cfg, state)
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let (cfg, mut state) = default_state();
    let mut own = state.global_store();
    for (_, p) in own.iter_mut() {
        p.tensor.scale(-0.5);
    }
    state.set_client("c01", &own);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    save_checkpoint(&state, &cfg, &path).unwrap();
    let loaded = load_checkpoint(&path, &cfg).unwrap();
    assert_eq!(loaded, state);
    assert!(loaded.materialize("c01").bit_eq(&state.materialize("c01")));
    assert_eq!(std::fs::read(&path).unwrap(), write_checkpoint(&loaded, &cfg.digest()));
}

#[test]
fn checkpoint_manifest_counts_every_tensor() {
    let (cfg, state) = default_state();
    let bytes = write_checkpoint(&state, &cfg.digest());
    let count = u32::from_le_bytes(bytes[44..48].try_into().unwrap());
    assert_eq!(count as usize, build_model(&cfg, 0).unwrap().params.len());
    assert_eq!(count, 24);
}

#[test]
fn checkpoint_refuses_other_config() {
    let (cfg, state) = default_state();
    let bytes = write_checkpoint(&state, &cfg.digest());
    let other = ModelConfig::deep_conv_lstm([(Task::Activity, 6), (Task::Position, 4)].into());
    let err = read_checkpoint(&bytes, &other.digest()).unwrap_err();
    assert!(err.to_string().contains("digest mismatch"), "{err}");
}

#[test]
fn checkpoint_rejects_truncation_and_corruption() {
    let (cfg, state) = default_state();
    let bytes = write_checkpoint(&state, &cfg.digest());
    for cut in [0, 7, 12, 50, bytes.len() / 2, bytes.len() - 1] {
        assert!(read_checkpoint(&bytes[..cut], &cfg.digest()).is_err(), "cut at {cut}");
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(read_checkpoint(&bad, &cfg.digest()).is_err());
    let mut bad = bytes.clone();
    bad[8] = 9;
    assert!(read_checkpoint(&bad, &cfg.digest()).unwrap_err().to_string().contains("version"));
    let mut extra = bytes;
    extra.push(0);
    assert!(read_checkpoint(&extra, &cfg.digest()).is_err());
}
