use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Classification task carried by a windowed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Activity,
    Position,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Activity, Task::Position];

    pub fn name(self) -> &'static str {
        match self {
            Task::Activity => "activity",
            Task::Position => "position",
        }
    }

    pub fn other(self) -> Task {
        match self {
            Task::Activity => Task::Position,
            Task::Position => Task::Activity,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "activity" => Ok(Task::Activity),
            "position" => Ok(Task::Position),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Transfer-learning layer group. Groups are trained bottom-up and frozen
/// once their stage is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerGroup {
    PreTrained,
    Common,
    TaskSpecific(Task),
    Personalized,
}

impl LayerGroup {
    /// Position in the hierarchy. Both task-specific groups share a rank.
    pub fn rank(self) -> u8 {
        match self {
            LayerGroup::PreTrained => 0,
            LayerGroup::Common => 1,
            LayerGroup::TaskSpecific(_) => 2,
            LayerGroup::Personalized => 3,
        }
    }

    pub fn task(self) -> Option<Task> {
        match self {
            LayerGroup::TaskSpecific(t) => Some(t),
            _ => None,
        }
    }

    /// Tensors of this group live in the shared part of the global state.
    pub fn is_shared(self) -> bool {
        matches!(self, LayerGroup::PreTrained | LayerGroup::Common)
    }
}

impl PartialOrd for LayerGroup {
    /// `TaskSpecific(Activity)` and `TaskSpecific(Position)` are incomparable.
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (LayerGroup::TaskSpecific(a), LayerGroup::TaskSpecific(b)) if a != b => None,
            _ => Some(self.rank().cmp(&other.rank())),
        }
    }
}

impl fmt::Display for LayerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerGroup::PreTrained => f.write_str("pre_trained"),
            LayerGroup::Common => f.write_str("common"),
            LayerGroup::TaskSpecific(t) => write!(f, "task_specific:{t}"),
            LayerGroup::Personalized => f.write_str("personalized"),
        }
    }
}

impl FromStr for LayerGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pre_trained" => Ok(LayerGroup::PreTrained),
            "common" => Ok(LayerGroup::Common),
            "personalized" => Ok(LayerGroup::Personalized),
            _ => match s.strip_prefix("task_specific:") {
                Some(task) => Ok(LayerGroup::TaskSpecific(task.parse()?)),
                None => Err(Error::Config(format!("unknown layer group {s:?}"))),
            },
        }
    }
}

impl Serialize for LayerGroup {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LayerGroup {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_order() {
        use LayerGroup::*;
        assert!(PreTrained < Common);
        assert!(Common < TaskSpecific(Task::Activity));
        assert!(TaskSpecific(Task::Position) < Personalized);
        assert_eq!(
            TaskSpecific(Task::Activity).partial_cmp(&TaskSpecific(Task::Position)),
            None
        );
    }

    #[test]
    fn group_string_form_round_trips() {
        for g in [
            LayerGroup::PreTrained,
            LayerGroup::Common,
            LayerGroup::TaskSpecific(Task::Activity),
            LayerGroup::TaskSpecific(Task::Position),
            LayerGroup::Personalized,
        ] {
            assert_eq!(g.to_string().parse::<LayerGroup>().unwrap(), g);
        }
        assert!("task_specific:gait".parse::<LayerGroup>().is_err());
    }
}
