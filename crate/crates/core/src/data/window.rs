use super::record::SensorRecord;
use crate::model::Task;
use crate::tensor::Tensor;

/// A window cut from a stream, labels still in string form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub start: usize,
    /// `[L, 3]`
    pub data: Tensor,
    pub activity: Option<String>,
    pub position: Option<String>,
}

impl RawWindow {
    pub fn label(&self, task: Task) -> Option<&str> {
        match task {
            Task::Activity => self.activity.as_deref(),
            Task::Position => self.position.as_deref(),
        }
    }
}

/// Number of windows of length `len` with stride `stride` over `t` samples.
pub fn window_count(t: usize, len: usize, stride: usize) -> usize {
    if t < len || len == 0 || stride == 0 {
        0
    } else {
        (t - len) / stride + 1
    }
}

/// Slides a window of `len` samples with step `stride` over the stream. Each
/// task's window label is the majority of the sample labels; ties go to the
/// center sample's label.
pub fn window(stream: &[SensorRecord], len: usize, stride: usize) -> Vec<RawWindow> {
    let n = window_count(stream.len(), len, stride);
    (0..n)
        .map(|w| {
            let start = w * stride;
            let slice = &stream[start..start + len];
            let data = slice.iter().flat_map(|r| r.accel).collect();
            RawWindow {
                start,
                data: Tensor::new(vec![len, 3], data).expect("len x 3"),
                activity: vote(slice, Task::Activity),
                position: vote(slice, Task::Position),
            }
        })
        .collect()
}

fn vote(slice: &[SensorRecord], task: Task) -> Option<String> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for l in slice.iter().filter_map(|r| r.label(task)) {
        match counts.iter_mut().find(|(x, _)| *x == l) {
            Some((_, c)) => *c += 1,
            None => counts.push((l, 1)),
        }
    }
    let top = counts.iter().map(|(_, c)| *c).max()?;
    let tied: Vec<&str> = counts.iter().filter(|(_, c)| *c == top).map(|(l, _)| *l).collect();
    if tied.len() == 1 {
        return Some(tied[0].to_string());
    }
    let center = slice[slice.len() / 2].label(task);
    Some(center.filter(|c| tied.contains(c)).unwrap_or(tied[0]).to_string())
}
