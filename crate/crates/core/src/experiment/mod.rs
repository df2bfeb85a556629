//! Experiment configuration files and the end-to-end runner behind the CLI.

mod config;

pub use config::{CsvSource, DataSection, DataSource, ExperimentConfig, ModelSection, ReportSection};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};

use crate::data::{
    build_client_dataset, ingest_csv, merge_labels, observed_vocabulary, resample_to_10hz,
    write_csv, ClientDataset, DataOptions, LabelMap, SensorRecord, Vocabulary,
};
use crate::error::{Error, Result};
use crate::federation::{read_checkpoint, write_checkpoint, GlobalState};
use crate::metrics::{emit_report, MetricsReport, RegimeResult, ReportMetadata};
use crate::model::ModelConfig;
use crate::pipeline::{
    evaluate_stage, run_centralized_bulk, run_federated_multi_task, run_federated_one_task,
    run_individual, run_layered, Experiment, Regime,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub vocabulary: Vocabulary,
    pub clients: Vec<ClientDataset>,
}

/// Reads CSV files, merges labels, consolidates to 10 Hz and builds one
/// client per user id. Without a `vocabulary`, the sorted set of observed
/// canonical labels is used.
pub fn load_csv_clients(
    paths: &[PathBuf],
    native_hz: f64,
    labels: &LabelMap,
    vocabulary: Option<&Vocabulary>,
    opts: &DataOptions,
    seed: u64,
) -> Result<PreparedData> {
    let mut segments: BTreeMap<String, Vec<Vec<SensorRecord>>> = BTreeMap::new();
    let mut merged_all = Vec::new();
    for path in paths {
        let ingested = ingest_csv(path)?;
        if ingested.splits > 0 {
            log::warn!("{}: {} timestamp discontinuities split streams", path.display(), ingested.splits);
        }
        for stream in &ingested.streams {
            let merged = merge_labels(&stream.records, labels)?;
            let segs = resample_to_10hz(&merged, native_hz)?;
            merged_all.extend(merged);
            segments.entry(stream.user_id.clone()).or_default().extend(segs);
        }
    }
    let vocabulary = match vocabulary {
        Some(v) => v.clone(),
        None => observed_vocabulary(&merged_all),
    };
    let clients = segments
        .iter()
        .map(|(id, segs)| build_client_dataset(id, segs, &vocabulary, opts, seed))
        .collect::<Result<_>>()?;
    Ok(PreparedData { vocabulary, clients })
}

/// Expands directories to their `*.csv` files, sorted.
pub fn expand_csv_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|f| f.extension().is_some_and(|e| e == "csv"));
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let opts = &cfg.data.options;
    match &cfg.data.source {
        DataSource::Synthetic(spec) => Ok(PreparedData {
            vocabulary: spec.vocabulary(),
            clients: crate::data::generate_synthetic(spec, opts, cfg.seed)?,
        }),
        DataSource::Csv(csv) => load_csv_clients(
            &expand_csv_paths(&csv.paths)?,
            csv.native_hz,
            &csv.label_maps,
            csv.vocabulary().as_ref(),
            opts,
            cfg.seed,
        ),
    }
}

/// Writes one CSV per synthetic client in the ingest format.
pub fn generate_csv(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let DataSource::Synthetic(spec) = &cfg.data.source else {
        return Err(Error::Config("gen-data needs a synthetic data source".into()));
    };
    std::fs::create_dir_all(dir)?;
    let opts = &cfg.data.options;
    let mut out = Vec::new();
    for client in spec.generate_streams(opts.window_length, opts.stride, cfg.seed)? {
        let path = dir.join(format!("{}.csv", client.client_id));
        write_csv(&path, client.records())?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub model: ModelConfig,
    pub report: MetricsReport,
    /// Checkpoint files relative to the output directory.
    pub checkpoints: Vec<(PathBuf, Vec<u8>)>,
}

impl ExperimentOutput {
    /// Writes the report files and `checkpoints/...` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        emit_report(&self.report, dir)?;
        for (rel, bytes) in &self.checkpoints {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        Ok(())
    }
}

fn metadata(cfg: &ExperimentConfig, model: &ModelConfig, vocab: &Vocabulary) -> ReportMetadata {
    ReportMetadata {
        seed: cfg.seed,
        config_digest: cfg.digest_hex(),
        model_digest: model.digest_hex(),
        weighting: cfg.report.weighting,
        classes: vocab.classes.clone(),
    }
}

fn regime_dir(regime: Regime) -> PathBuf {
    PathBuf::from("checkpoints").join(regime.to_string().replace(':', "_"))
}

/// Runs every configured regime on the prepared data.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let model = cfg.model_config(&data.vocabulary)?;
    let exp = Experiment {
        model: &model,
        clients: &data.clients,
        training: &cfg.training,
        stages: &cfg.stages,
        weighting: cfg.report.weighting,
        seed: cfg.seed,
    };
    let digest = model.digest();
    let mut results: Vec<RegimeResult> = Vec::new();
    let mut checkpoints = Vec::new();
    for &regime in &cfg.regimes {
        info!("running {regime}");
        let dir = regime_dir(regime);
        let mut save = |name: String, state: &GlobalState| {
            checkpoints.push((dir.join(format!("{name}.ckpt")), write_checkpoint(state, &digest)));
        };
        let outcome = match regime {
            Regime::LayeredTransfer => {
                let mut i = 0;
                let (state, result) = run_layered(&exp, |kind, state| {
                    i += 1;
                    save(format!("{i}_{}", kind.slug()), state);
                    Ok(())
                })?;
                save("final".into(), &state);
                result
            }
            other => {
                let out = match other {
                    Regime::CentralizedBulk => run_centralized_bulk(&exp, &exp.tasks_with_cohort())?,
                    Regime::Individual => run_individual(&exp, &exp.tasks_with_cohort())?,
                    Regime::FederatedOneTask(t) => run_federated_one_task(&exp, t)?,
                    Regime::FederatedMultiTask => run_federated_multi_task(&exp)?,
                    Regime::LayeredTransfer => unreachable!(),
                };
                for (name, state) in &out.models {
                    save(name.clone(), state);
                }
                out.result
            }
        };
        results.push(outcome);
    }
    Ok(ExperimentOutput {
        report: MetricsReport {
            metadata: metadata(cfg, &model, &data.vocabulary),
            regimes: results,
        },
        model,
        checkpoints,
    })
}

/// Evaluates a checkpoint without training. Clients come from `data` (CSV
/// files or directories) when given, otherwise from the config's source.
/// Clients without personalized tensors of their own use the global ones.
pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    data: Option<&[PathBuf]>,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let base = prepare_data(cfg)?;
    let model = cfg.model_config(&base.vocabulary)?;
    let bytes = std::fs::read(checkpoint)?;
    let state = read_checkpoint(&bytes, &model.digest())
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", checkpoint.display())))?;
    let data = match data {
        None => base.clone(),
        Some(paths) => {
            let (hz, labels) = match &cfg.data.source {
                DataSource::Csv(c) => (c.native_hz, c.label_maps.clone()),
                DataSource::Synthetic(_) => (10.0, LabelMap::default()),
            };
            load_csv_clients(
                &expand_csv_paths(paths)?,
                hz,
                &labels,
                Some(&base.vocabulary),
                &cfg.data.options,
                cfg.seed,
            )?
        }
    };
    let exp = Experiment {
        model: &model,
        clients: &data.clients,
        training: &cfg.training,
        stages: &cfg.stages,
        weighting: cfg.report.weighting,
        seed: cfg.seed,
    };
    let stage = evaluate_stage(&exp, "eval", |id| state.materialize(id))?;
    Ok(MetricsReport {
        metadata: metadata(cfg, &model, &base.vocabulary),
        regimes: vec![RegimeResult {
            regime: "eval".into(),
            stages: vec![stage],
        }],
    })
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
