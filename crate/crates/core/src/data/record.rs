use crate::model::Task;

/// One tri-axial accelerometer reading.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub user_id: String,
    pub activity: Option<String>,
    pub position: Option<String>,
    pub timestamp_ms: i64,
    /// m/s², as given by the source.
    pub accel: [f64; 3],
}

impl SensorRecord {
    pub fn label(&self, task: Task) -> Option<&str> {
        match task {
            Task::Activity => self.activity.as_deref(),
            Task::Position => self.position.as_deref(),
        }
    }

    pub fn label_mut(&mut self, task: Task) -> &mut Option<String> {
        match task {
            Task::Activity => &mut self.activity,
            Task::Position => &mut self.position,
        }
    }
}

/// Contiguous recording of one user with non-decreasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub user_id: String,
    pub records: Vec<SensorRecord>,
}
