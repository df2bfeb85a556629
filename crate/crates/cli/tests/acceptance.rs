//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! to stderr (bypassing output capture) before asserting.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fedmtl_core::data::{merge_labels, resample_to_10hz, window, window_count, LabelMap, SensorRecord};
use fedmtl_core::experiment::{prepare_data, ExperimentConfig};
use fedmtl_core::federation::{fedavg_aggregate, read_checkpoint, ClientUpdate, GlobalState};
use fedmtl_core::metrics::MetricsReport;
use fedmtl_core::model::{build_model, loss_and_grad, ConvSpec, LayerGroup, LstmSpec, ModelConfig, Task};
use fedmtl_core::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, lstm_backward, lstm_forward_cached,
    LstmParams,
};
use fedmtl_core::params::{ParameterStore, TrainableMask};
use fedmtl_core::pipeline::{run_centralized_bulk, run_federated_one_task, train_individual, Experiment};
use fedmtl_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bundled_config() -> PathBuf {
    repo().join("configs/layered_synthetic.json")
}

struct Run {
    dir: PathBuf,
    elapsed: Duration,
}

fn fedmtl_run(config: &Path, workers: usize) -> Run {
    let dir = tempfile::tempdir().unwrap().keep();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_fedmtl"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(&dir)
        .args(["--workers", &workers.to_string()])
        .output()
        .expect("fedmtl runs");
    assert!(out.status.success(), "fedmtl run failed: {}", String::from_utf8_lossy(&out.stderr));
    Run {
        dir,
        elapsed: start.elapsed(),
    }
}

/// The bundled 4-client config run once with a single worker, shared by the
/// criteria that inspect its outputs.
fn bundled_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| fedmtl_run(&bundled_config(), 1))
}

fn read_report(dir: &Path) -> MetricsReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Max relative error between `analytic` and central differences of `f`
/// with respect to every coordinate of `x`.
fn fd_max_err(x: &Tensor, analytic: &Tensor, f: impl Fn(&Tensor) -> f64) -> f64 {
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * eps);
        worst = worst.max(rel_err(analytic.data()[i], numeric));
    }
    worst
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

#[test]
fn criterion_1_aggregation_oracle() {
    let start = Instant::now();
    let cfg = ModelConfig::deep_conv_lstm([(Task::Activity, 4), (Task::Position, 3)].into());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in 1..=8 {
        let updates: Vec<ClientUpdate> = (0..k)
            .map(|i| ClientUpdate {
                client_id: format!("client{i}"),
                params: build_model(&cfg, rng.random()).unwrap().params,
                n_k: rng.random_range(1..1000),
            })
            .collect();
        let mask = TrainableMask::all(&updates[0].params);
        let out = fedavg_aggregate(&updates, &mask).unwrap();
        let total: f64 = updates.iter().map(|u| u.n_k as f64).sum();
        for (name, p) in out.iter() {
            for (i, &v) in p.tensor.data().iter().enumerate() {
                let oracle: f64 = updates
                    .iter()
                    .map(|u| u.n_k as f64 * u.params.tensor(name).unwrap().data()[i])
                    .sum::<f64>()
                    / total;
                worst = worst.max((v - oracle).abs());
            }
        }
        for _ in 0..3 {
            let mut shuffled = updates.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            ok &= fedavg_aggregate(&shuffled, &mask).unwrap().bit_eq(&out);
        }
        if k == 1 {
            ok &= out.bit_eq(&updates[0].params);
        }
    }
    let elapsed = start.elapsed();
    ok &= worst <= 1e-12 && elapsed < Duration::from_secs(1);
    verdict(1, ok, &format!("max |err| {worst:.2e}, permutation bit-identical, {:.3}s", elapsed.as_secs_f64()));
}

fn tiny_model() -> ModelConfig {
    ModelConfig::with_default_partition(
        vec![ConvSpec { filters: 3, kernel: 2 }, ConvSpec { filters: 2, kernel: 2 }],
        vec![LstmSpec { hidden: 3 }, LstmSpec { hidden: 2 }],
        [(Task::Activity, 3), (Task::Position, 2)].into(),
        7,
        3,
    )
}

#[test]
fn criterion_2_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // conv1d: L = <conv(x), r>
    let (x, w, b) = (random_tensor(&mut rng, &[6, 2]), random_tensor(&mut rng, &[3, 2, 3]), random_tensor(&mut rng, &[3]));
    let r = random_tensor(&mut rng, &[4, 3]);
    let g = conv1d_backward(&x, &w, &b, &r).unwrap();
    let conv = [
        fd_max_err(&x, &g.input, |x| dot(&conv1d_forward(x, &w, &b).unwrap(), &r)),
        fd_max_err(&w, &g.weights, |w| dot(&conv1d_forward(&x, w, &b).unwrap(), &r)),
        fd_max_err(&b, &g.bias, |b| dot(&conv1d_forward(&x, &w, b).unwrap(), &r)),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    // LSTM: L = <h, r> over every step.
    let (seq, lw, lu, lb) = (
        random_tensor(&mut rng, &[6, 3]),
        random_tensor(&mut rng, &[16, 3]),
        random_tensor(&mut rng, &[16, 4]),
        random_tensor(&mut rng, &[16]),
    );
    let r = random_tensor(&mut rng, &[6, 4]);
    let p = LstmParams { w: &lw, u: &lu, b: &lb };
    let cache = lstm_forward_cached(&seq, p).unwrap();
    let g = lstm_backward(&cache, p, &r).unwrap();
    let run = |s: &Tensor, w: &Tensor, u: &Tensor, b: &Tensor| {
        dot(&lstm_forward_cached(s, LstmParams { w, u, b }).unwrap().hidden(), &r)
    };
    let lstm = [
        fd_max_err(&seq, &g.input, |s| run(s, &lw, &lu, &lb)),
        fd_max_err(&lw, &g.w, |w| run(&seq, w, &lu, &lb)),
        fd_max_err(&lu, &g.u, |u| run(&seq, &lw, u, &lb)),
        fd_max_err(&lb, &g.b, |b| run(&seq, &lw, &lu, b)),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    // dense: L = <Wx + b, r>
    let (x, w, b) = (random_tensor(&mut rng, &[5]), random_tensor(&mut rng, &[3, 5]), random_tensor(&mut rng, &[3]));
    let r = random_tensor(&mut rng, &[3]);
    let g = dense_backward(&x, &w, &b, &r).unwrap();
    let dense = [
        fd_max_err(&x, &g.input, |x| dot(&dense_forward(x, &w, &b).unwrap(), &r)),
        fd_max_err(&w, &g.weights, |w| dot(&dense_forward(&x, w, &b).unwrap(), &r)),
        fd_max_err(&b, &g.bias, |b| dot(&dense_forward(&x, &w, b).unwrap(), &r)),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    // Full model, both tasks labeled.
    let cfg = tiny_model();
    let params = build_model(&cfg, 9).unwrap().params;
    let window = random_tensor(&mut rng, &[7, 3]);
    let labels = [(Task::Activity, 2), (Task::Position, 1)];
    let (_, grads) = loss_and_grad(&cfg, &params, &window, &labels).unwrap();
    let mut model: f64 = 0.0;
    for (name, p) in params.iter() {
        let analytic = grads.get(name).unwrap();
        let err = fd_max_err(&p.tensor, analytic, |t| {
            let mut q: ParameterStore = params.clone();
            q.get_mut(name).unwrap().tensor = t.clone();
            loss_and_grad(&cfg, &q, &window, &labels).unwrap().0
        });
        model = model.max(err);
    }
    let elapsed = start.elapsed();
    let worst = conv.max(lstm).max(dense).max(model);
    verdict(
        2,
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        &format!(
            "max rel err conv {conv:.1e}, lstm {lstm:.1e}, dense {dense:.1e}, model {model:.1e}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn bundled_model() -> ModelConfig {
    let cfg = ExperimentConfig::load(&bundled_config()).unwrap();
    let data = prepare_data(&cfg).unwrap();
    cfg.model_config(&data.vocabulary).unwrap()
}

#[test]
fn criterion_3_freeze_discipline() {
    let run = bundled_run();
    let model = bundled_model();
    let stages = ["1_pretrain", "2_common", "3_task_specific_activity", "4_task_specific_position", "5_personalize"];
    let states: Vec<GlobalState> = stages
        .iter()
        .map(|s| {
            let path = run.dir.join(format!("checkpoints/layered_transfer/{s}.ckpt"));
            read_checkpoint(&std::fs::read(path).unwrap(), &model.digest()).unwrap()
        })
        .collect();
    let own_stage = |g: LayerGroup| match g {
        LayerGroup::PreTrained => Some(0),
        LayerGroup::Common => Some(1),
        LayerGroup::TaskSpecific(Task::Activity) => Some(2),
        LayerGroup::TaskSpecific(Task::Position) => Some(3),
        LayerGroup::Personalized => None,
    };
    let clients: Vec<String> = (0..4).map(|k| format!("c{k:02}")).collect();
    let mut checked = 0;
    let mut violations = Vec::new();
    for (name, p) in states[0].global_store().iter() {
        let Some(own) = own_stage(p.group) else { continue };
        let frozen = states[own].global_store();
        let reference = frozen.tensor(name).unwrap();
        for (i, s) in states.iter().enumerate().skip(own + 1) {
            for c in &clients {
                checked += 1;
                if !s.materialize(c).tensor(name).unwrap().bit_eq(reference) {
                    violations.push(format!("{name} in {}", stages[i]));
                }
            }
        }
    }
    verdict(
        3,
        violations.is_empty() && checked > 0,
        &format!("{checked} frozen tensor views compared across stage checkpoints, {} changed", violations.len()),
    );
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_4_determinism() {
    let a = bundled_run();
    let b = fedmtl_run(&bundled_config(), 4);
    let mut compared = 0;
    let mut differing = Vec::new();
    let mut names = vec![PathBuf::from("summary.csv"), PathBuf::from("report.json")];
    names.extend(files_under(&a.dir.join("checkpoints")).into_iter().map(|p| p.strip_prefix(&a.dir).unwrap().to_path_buf()));
    for rel in &names {
        compared += 1;
        let x = std::fs::read(a.dir.join(rel)).unwrap();
        let y = std::fs::read(b.dir.join(rel));
        if y.map(|y| y != x).unwrap_or(true) {
            differing.push(rel.display().to_string());
        }
    }
    let b_count = files_under(&b.dir.join("checkpoints")).len();
    verdict(
        4,
        differing.is_empty() && b_count + 2 == names.len(),
        &format!("{compared} files byte-identical between --workers 1 and --workers 4; differing: {differing:?}"),
    );
}

#[test]
fn criterion_5_reduction_identities() {
    let mut cfg = ExperimentConfig::load(&bundled_config()).unwrap();
    cfg.training.epochs = 3;
    cfg.training.local_epochs = 3;
    cfg.training.rounds = 1;
    let data = prepare_data(&cfg).unwrap();
    let model = cfg.model_config(&data.vocabulary).unwrap();
    let mut ok = true;
    let mut checked = Vec::new();
    for id in ["c00", "c01"] {
        let one: Vec<_> = data.clients.iter().filter(|c| c.client_id == id).cloned().collect();
        let exp = Experiment {
            model: &model,
            clients: &one,
            training: &cfg.training,
            stages: &cfg.stages,
            weighting: cfg.report.weighting,
            seed: cfg.seed,
        };
        for task in exp.tasks_with_cohort() {
            let individual = train_individual(&exp, &one[0], task).unwrap();
            let federated = run_federated_one_task(&exp, task).unwrap().models[&task.to_string()].global_store();
            let central = run_centralized_bulk(&exp, &[task]).unwrap().models[&task.to_string()].global_store();
            ok &= federated.bit_eq(&individual) && central.bit_eq(&individual);
            checked.push(format!("{id}/{task}"));
        }
    }
    verdict(
        5,
        ok && checked.len() == 3,
        &format!("federated one-task (1 round) and centralized equal individual bit-for-bit for {checked:?}"),
    );
}

#[test]
fn criterion_6_data_pipeline_exactness() {
    let mut mismatches = 0;
    let mut cases = 0;
    for t in 1..=200usize {
        let stream: Vec<SensorRecord> = (0..t)
            .map(|i| SensorRecord {
                user_id: "u".into(),
                activity: Some("Sitting".into()),
                position: None,
                timestamp_ms: 100 * i as i64,
                accel: [i as f64, 0.0, 1.0],
            })
            .collect();
        for l in 1..=48usize {
            for s in 1..=24usize {
                let expected = if t >= l { (t - l) / s + 1 } else { 0 };
                cases += 1;
                if window(&stream, l, s).len() != expected || window_count(t, l, s) != expected {
                    mismatches += 1;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start: i64 = rng.random_range(0..1_000_000);
    let stream: Vec<SensorRecord> = (0..500)
        .map(|i| SensorRecord {
            user_id: "u".into(),
            activity: Some(["Walking", "Sitting"][i / 100 % 2].into()),
            position: Some("Waist".into()),
            timestamp_ms: start + 100 * i as i64,
            accel: [rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)],
        })
        .collect();
    let resampled = resample_to_10hz(&stream, 10.0).unwrap();
    let identity = resampled.len() == 1 && resampled[0] == stream;

    let walking = ["Walking", "Walking inc. stairs", "Walking stairs up", "Walking stairs down", "Walking at stairs"];
    let records: Vec<SensorRecord> = walking
        .iter()
        .zip(["Foot, left", "Foot, right", "Foot, left", "Foot, right", "Foot, left"])
        .map(|(a, p)| SensorRecord {
            user_id: "u".into(),
            activity: Some(a.to_string()),
            position: Some(p.to_string()),
            timestamp_ms: 0,
            accel: [0.0; 3],
        })
        .collect();
    let merged = merge_labels(&records, &LabelMap::default()).unwrap();
    let labels_ok = merged
        .iter()
        .all(|r| r.activity.as_deref() == Some("Walking") && r.position.as_deref() == Some("Leg/Foot"));

    verdict(
        6,
        mismatches == 0 && identity && labels_ok,
        &format!("{cases} (T, L, S) cases, {mismatches} mismatches; 10 Hz identity {identity}; label merge {labels_ok}"),
    );
}

#[test]
fn criterion_7_layered_ordering() {
    let run = bundled_run();
    let report = read_report(&run.dir);
    let overall = |regime: &str, stage: &str| {
        report.regime(regime).unwrap().stage(stage).unwrap().overall.unwrap().accuracy
    };
    let common = overall("layered_transfer", "Common");
    let ts_a = overall("layered_transfer", "TaskSpecific(Activity)");
    let ts_p = overall("layered_transfer", "TaskSpecific(Position)");
    let personalized = overall("layered_transfer", "Personalize");
    let multi = overall("federated_multi_task", "final");
    let individual = overall("individual", "final");
    let gap = personalized - multi;
    let vs_individual = (personalized - individual).abs();
    let monotone = common <= ts_a + 0.02 && ts_a <= ts_p + 0.02 && ts_p <= personalized + 0.02;
    let fast = run.elapsed < Duration::from_secs(300);
    verdict(
        7,
        gap >= 0.10 && vs_individual <= 0.05 && monotone && fast,
        &format!(
            "personalized {:.1}%, federated multi-task {:.1}%, individual {:.1}%; stages {:.1} -> {:.1} -> {:.1} -> {:.1}; run {:.0}s",
            100.0 * personalized,
            100.0 * multi,
            100.0 * individual,
            100.0 * common,
            100.0 * ts_a,
            100.0 * ts_p,
            100.0 * personalized,
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_8_separable_sanity() {
    let config = repo().join("configs/separable_synthetic.json");
    let cfg = ExperimentConfig::load(&config).unwrap();
    let fedmtl_core::experiment::DataSource::Synthetic(spec) = &cfg.data.source else { panic!("synthetic source") };
    assert_eq!(spec.noise_sigma, 0.0);
    assert_eq!(cfg.training, Default::default());
    let run = fedmtl_run(&config, 4);
    let report = read_report(&run.dir);
    let stage = report.regime("individual").unwrap().final_stage().unwrap();
    let activity = stage.weighted[&Task::Activity].accuracy;
    let position = stage.weighted[&Task::Position].accuracy;
    verdict(
        8,
        activity >= 0.99 && position >= 0.99,
        &format!("individual weighted accuracy: activity {:.2}%, position {:.2}%", 100.0 * activity, 100.0 * position),
    );
}
