use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{weighted_average_accuracy, ConfusionMatrix};
use crate::error::Result;
use crate::model::Task;

pub const SUMMARY_HEADER: &str = "regime,stage,task,weighted_accuracy,n_total";

/// Which per-client size weights the reported averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Test,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub accuracy: f64,
    pub n_test: usize,
    pub n_train: usize,
    pub confusion: ConfusionMatrix,
}

impl TaskResult {
    pub fn weight(&self, w: Weighting) -> usize {
        match w {
            Weighting::Test => self.n_test,
            Weighting::Train => self.n_train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientResult {
    pub client_id: String,
    pub tasks: BTreeMap<Task, TaskResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedAccuracy {
    pub accuracy: f64,
    pub n_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: String,
    pub clients: Vec<ClientResult>,
    /// Weighted accuracy per task over clients evaluated on it.
    pub weighted: BTreeMap<Task, WeightedAccuracy>,
    /// Weighted accuracy over every (client, task) entry.
    pub overall: Option<WeightedAccuracy>,
}

impl StageResult {
    pub fn new(stage: impl Into<String>, clients: Vec<ClientResult>, weighting: Weighting) -> Result<Self> {
        let mut per_task: BTreeMap<Task, Vec<(f64, usize)>> = BTreeMap::new();
        for c in &clients {
            for (&task, r) in &c.tasks {
                let n = r.weight(weighting);
                if n > 0 {
                    per_task.entry(task).or_default().push((r.accuracy, n));
                }
            }
        }
        let summarize = |entries: &[(f64, usize)]| -> Result<WeightedAccuracy> {
            Ok(WeightedAccuracy {
                accuracy: weighted_average_accuracy(entries)?,
                n_total: entries.iter().map(|e| e.1).sum(),
            })
        };
        let mut weighted = BTreeMap::new();
        for (task, entries) in &per_task {
            weighted.insert(*task, summarize(entries)?);
        }
        let all: Vec<_> = per_task.values().flatten().copied().collect();
        let overall = if all.is_empty() { None } else { Some(summarize(&all)?) };
        Ok(StageResult {
            stage: stage.into(),
            clients,
            weighted,
            overall,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub regime: String,
    pub stages: Vec<StageResult>,
}

impl RegimeResult {
    pub fn final_stage(&self) -> Option<&StageResult> {
        self.stages.last()
    }

    pub fn stage(&self, name: &str) -> Option<&StageResult> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    /// SHA-256 of the experiment config.
    pub config_digest: String,
    /// SHA-256 of the model config, as stored in checkpoints.
    pub model_digest: String,
    pub weighting: Weighting,
    pub classes: BTreeMap<Task, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metadata: ReportMetadata,
    pub regimes: Vec<RegimeResult>,
}

impl MetricsReport {
    pub fn regime(&self, name: &str) -> Option<&RegimeResult> {
        self.regimes.iter().find(|r| r.regime == name)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in &self.regimes {
            for s in &r.stages {
                for (task, w) in &s.weighted {
                    writeln!(out, "{},{},{},{:.4},{}", r.regime, s.stage, task, w.accuracy, w.n_total)
                        .expect("write to string");
                }
            }
        }
        out
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn confusion_csv(m: &ConfusionMatrix, names: Option<&Vec<String>>) -> Result<Vec<u8>> {
    let name = |i: usize| names.and_then(|n| n.get(i).cloned()).unwrap_or_else(|| i.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["true\\predicted".to_string()];
    header.extend((0..m.num_classes()).map(name));
    w.write_record(&header).map_err(std::io::Error::from)?;
    for (i, row) in m.counts.iter().enumerate() {
        let mut rec = vec![name(i)];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(std::io::Error::from)?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

/// Writes `report.json`, `summary.csv` and, for the last stage of every
/// regime, `confusion/<regime>/<client>_<task>.csv`.
pub fn emit_report(report: &MetricsReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("summary.csv"), report.summary_csv())?;
    for r in &report.regimes {
        let Some(stage) = r.final_stage() else { continue };
        let sub = dir.join("confusion").join(slug(&r.regime));
        std::fs::create_dir_all(&sub)?;
        for c in &stage.clients {
            for (task, t) in &c.tasks {
                let bytes = confusion_csv(&t.confusion, report.metadata.classes.get(task))?;
                std::fs::write(sub.join(format!("{}_{task}.csv", slug(&c.client_id))), bytes)?;
            }
        }
    }
    Ok(())
}

/// Weighted accuracies in percent, one row per regime and stage.
pub fn format_table(report: &MetricsReport) -> String {
    let tasks: Vec<Task> = report.metadata.classes.keys().copied().collect();
    let mut out = format!("{:<28} {:<24}", "regime", "stage");
    for t in &tasks {
        write!(out, " {:>9}", t.name()).expect("write to string");
    }
    out.push_str(&format!(" {:>9}\n", "overall"));
    let cell = |w: Option<&WeightedAccuracy>| match w {
        Some(w) => format!(" {:>8.1}%", 100.0 * w.accuracy),
        None => format!(" {:>9}", "-"),
    };
    for r in &report.regimes {
        for s in &r.stages {
            write!(out, "{:<28} {:<24}", r.regime, s.stage).expect("write to string");
            for t in &tasks {
                out.push_str(&cell(s.weighted.get(t)));
            }
            out.push_str(&cell(s.overall.as_ref()));
            out.push('\n');
        }
    }
    out
}
