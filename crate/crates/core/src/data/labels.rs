use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::record::SensorRecord;
use crate::error::{Error, Result};
use crate::model::Task;

/// Raw-label to canonical-label mapping per task. Canonical labels (the map's
/// values) always map to themselves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMap {
    #[serde(default)]
    pub activity: BTreeMap<String, String>,
    #[serde(default)]
    pub position: BTreeMap<String, String>,
}

pub const WALKING_VARIANTS: [&str; 5] = [
    "Walking",
    "Walking inc. stairs",
    "Walking stairs up",
    "Walking stairs down",
    "Walking at stairs",
];

pub const LEG_FOOT_VARIANTS: [&str; 6] = [
    "Foot, left",
    "Foot, right",
    "Leg",
    "Leg, left",
    "Leg, right",
    "Leg/Foot",
];

/// Canonical activity labels known to the default map besides "Walking".
pub const DEFAULT_ACTIVITIES: [&str; 8] = [
    "Cycling", "Driving", "Jogging", "Jumping", "Lying", "Running", "Sitting", "Standing",
];

/// Canonical position labels known to the default map besides "Leg/Foot".
pub const DEFAULT_POSITIONS: [&str; 8] = [
    "Back", "Chest", "Hand", "Head", "Pocket", "Upper arm", "Waist", "Wrist",
];

impl Default for LabelMap {
    fn default() -> Self {
        let mut activity: BTreeMap<String, String> = WALKING_VARIANTS
            .iter()
            .map(|v| (v.to_string(), "Walking".to_string()))
            .collect();
        activity.extend(DEFAULT_ACTIVITIES.iter().map(|a| (a.to_string(), a.to_string())));
        let mut position: BTreeMap<String, String> = LEG_FOOT_VARIANTS
            .iter()
            .map(|v| (v.to_string(), "Leg/Foot".to_string()))
            .collect();
        position.extend(DEFAULT_POSITIONS.iter().map(|p| (p.to_string(), p.to_string())));
        Self { activity, position }
    }
}

impl LabelMap {
    pub fn task_map(&self, task: Task) -> &BTreeMap<String, String> {
        match task {
            Task::Activity => &self.activity,
            Task::Position => &self.position,
        }
    }

    pub fn canonical(&self, task: Task, raw: &str) -> Option<&str> {
        let map = self.task_map(task);
        map.get(raw)
            .map(String::as_str)
            .or_else(|| map.values().find(|v| *v == raw).map(String::as_str))
    }
}

/// Replaces raw labels by canonical ones. Fails listing every unmapped label.
pub fn merge_labels(records: &[SensorRecord], map: &LabelMap) -> Result<Vec<SensorRecord>> {
    for task in Task::ALL {
        let unmapped: BTreeSet<&str> = records
            .iter()
            .filter_map(|r| r.label(task))
            .filter(|l| map.canonical(task, l).is_none())
            .collect();
        if !unmapped.is_empty() {
            return Err(Error::UnmappedLabels {
                task: task.to_string(),
                labels: unmapped.into_iter().map(str::to_string).collect(),
            });
        }
    }
    Ok(records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            for task in Task::ALL {
                let slot = out.label_mut(task);
                if let Some(raw) = slot.as_deref() {
                    *slot = map.canonical(task, raw).map(str::to_string);
                }
            }
            out
        })
        .collect())
}
