use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Task;
use crate::tensor::Tensor;

/// Class index per task; `None` when the sample carries no label for it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskLabels {
    pub activity: Option<usize>,
    pub position: Option<usize>,
}

impl TaskLabels {
    pub fn get(&self, task: Task) -> Option<usize> {
        match task {
            Task::Activity => self.activity,
            Task::Position => self.position,
        }
    }

    pub fn set(&mut self, task: Task, class: Option<usize>) {
        match task {
            Task::Activity => self.activity = class,
            Task::Position => self.position = class,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.activity.is_none() && self.position.is_none()
    }

    /// Labeled `(task, class)` pairs restricted to `tasks`.
    pub fn pairs(&self, tasks: &[Task]) -> Vec<(Task, usize)> {
        tasks
            .iter()
            .filter_map(|&t| self.get(t).map(|c| (t, c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    /// `[L, 3]`
    pub window: Tensor,
    pub labels: TaskLabels,
    pub client_id: String,
}

/// Ordered canonical class names per task; a class index is a position here.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub classes: BTreeMap<Task, Vec<String>>,
}

impl Vocabulary {
    pub fn index(&self, task: Task, label: &str) -> Option<usize> {
        self.classes.get(&task)?.iter().position(|c| c == label)
    }

    pub fn num_classes(&self, task: Task) -> usize {
        self.classes.get(&task).map_or(0, Vec::len)
    }

    /// Class count per task with at least two classes.
    pub fn heads(&self) -> BTreeMap<Task, usize> {
        self.classes
            .iter()
            .filter(|(_, c)| c.len() >= 2)
            .map(|(t, c)| (*t, c.len()))
            .collect()
    }
}
