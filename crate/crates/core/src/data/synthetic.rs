//! Synthetic multi-client accelerometer data.
//!
//! Each activity class has a signature (per-axis sinusoids at a
//! class-specific frequency and phase), each position class a static
//! orientation offset. Clients may be skewed so that the same signature means
//! different classes on different clients, and only some clients carry
//! position labels.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{build_client_dataset, ClientDataset, DataOptions};
use super::record::SensorRecord;
use super::sample::Vocabulary;
use crate::error::{Error, Result};
use crate::model::Task;
use crate::seed::derived_rng;

/// Activity names in sorted order, so sorted vocabularies keep index order.
pub const SYNTHETIC_ACTIVITIES: [&str; 7] = [
    "Cycling", "Jumping", "Lying", "Running", "Sitting", "Standing", "Walking",
];
pub const SYNTHETIC_POSITIONS: [&str; 7] =
    ["Chest", "Hand", "Head", "Leg/Foot", "Pocket", "Waist", "Wrist"];

/// Gap inserted between segments; more than one 100 ms bin so resampling
/// keeps segments apart.
pub const SEGMENT_GAP_MS: i64 = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skew {
    /// Every client uses the same signature for a class.
    #[default]
    None,
    /// Client `k >= 1` swaps the signatures of activity classes `k-1` and `k`
    /// (mod the class count).
    Swap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_clients: usize,
    pub activity_classes: usize,
    pub position_classes: usize,
    /// The first this-many clients carry position labels.
    pub position_clients: usize,
    /// Windows per activity class, or per (activity, position) pair on
    /// position-labeled clients.
    pub windows_per_class: usize,
    pub noise_sigma: f64,
    #[serde(default)]
    pub skew: Skew,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClient {
    pub client_id: String,
    /// 10 Hz segments, each holding one label combination.
    pub segments: Vec<Vec<SensorRecord>>,
}

impl SyntheticClient {
    pub fn records(&self) -> impl Iterator<Item = &SensorRecord> {
        self.segments.iter().flatten()
    }
}

pub fn client_id(k: usize) -> String {
    format!("c{k:02}")
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Synthetic(m.to_string()));
        if self.num_clients == 0 {
            return bad("num_clients must be positive");
        }
        if self.activity_classes == 0 {
            return bad("activity_classes must be positive");
        }
        if self.activity_classes > SYNTHETIC_ACTIVITIES.len() {
            return bad("at most 7 activity classes are supported");
        }
        if self.position_clients > 0 && self.position_classes == 0 {
            return bad("position clients need at least one position class");
        }
        if self.position_classes > SYNTHETIC_POSITIONS.len() {
            return bad("at most 7 position classes are supported");
        }
        if self.position_clients > self.num_clients {
            return bad("position_clients exceeds num_clients");
        }
        if self.windows_per_class == 0 {
            return bad("windows_per_class must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut v = Vocabulary::default();
        v.classes.insert(
            Task::Activity,
            SYNTHETIC_ACTIVITIES[..self.activity_classes]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        if self.position_clients > 0 {
            v.classes.insert(
                Task::Position,
                SYNTHETIC_POSITIONS[..self.position_classes]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            );
        }
        v
    }

    /// Signature used by client `k` for activity class `a`.
    pub fn signature(&self, k: usize, a: usize) -> usize {
        let n = self.activity_classes;
        match self.skew {
            Skew::Swap if k >= 1 && n >= 2 => {
                let (x, y) = ((k - 1) % n, k % n);
                if a == x {
                    y
                } else if a == y {
                    x
                } else {
                    a
                }
            }
            _ => a,
        }
    }

    /// Raw 10 Hz streams per client. Segment length is chosen so windowing
    /// with `window_length`/`stride` yields exactly `windows_per_class`
    /// windows per segment.
    pub fn generate_streams(&self, window_length: usize, stride: usize, seed: u64) -> Result<Vec<SyntheticClient>> {
        self.validate()?;
        let seg_len = window_length + (self.windows_per_class - 1) * stride;
        let noise = Normal::new(0.0, self.noise_sigma).expect("validated sigma");
        let mut clients = Vec::with_capacity(self.num_clients);
        for k in 0..self.num_clients {
            let id = client_id(k);
            let mut rng = derived_rng(seed, &format!("synthetic/{id}"), &[]);
            let positions: Vec<Option<usize>> = if k < self.position_clients {
                (0..self.position_classes).map(Some).collect()
            } else {
                vec![None]
            };
            let mut segments = Vec::new();
            let mut t = 0i64;
            for a in 0..self.activity_classes {
                let sig = self.signature(k, a);
                for &p in &positions {
                    let phase0: f64 = rng.random_range(0.0..TAU);
                    let mut seg = Vec::with_capacity(seg_len);
                    for j in 0..seg_len {
                        let secs = j as f64 / 10.0;
                        let mut accel = [0.0; 3];
                        for (d, v) in accel.iter_mut().enumerate() {
                            *v = signature_value(sig, d, secs, phase0)
                                + p.map_or(0.0, |p| position_offset(p, self.position_classes, d));
                            if self.noise_sigma > 0.0 {
                                *v += noise.sample(&mut rng);
                            }
                        }
                        seg.push(SensorRecord {
                            user_id: id.clone(),
                            activity: Some(SYNTHETIC_ACTIVITIES[a].to_string()),
                            position: p.map(|p| SYNTHETIC_POSITIONS[p].to_string()),
                            timestamp_ms: t,
                            accel,
                        });
                        t += 100;
                    }
                    t += SEGMENT_GAP_MS;
                    segments.push(seg);
                }
            }
            clients.push(SyntheticClient { client_id: id, segments });
        }
        Ok(clients)
    }
}

/// Sinusoid of signature `sig` on axis `d`: frequency `0.4 + 0.55 * sig` Hz,
/// axis-dependent amplitude and phase.
fn signature_value(sig: usize, d: usize, secs: f64, phase0: f64) -> f64 {
    let freq = 0.4 + 0.55 * sig as f64;
    let amp = 1.0 + 0.5 * ((sig + d) % 3) as f64;
    let phase = phase0 + TAU * (0.37 * sig as f64 + 0.23 * d as f64);
    amp * (TAU * freq * secs + phase).sin()
}

/// Static orientation offset of position `p` on axis `d`.
fn position_offset(p: usize, count: usize, d: usize) -> f64 {
    let angle = TAU * p as f64 / count.max(1) as f64;
    1.5 * (angle + TAU * d as f64 / 3.0).cos()
}

/// Generates synthetic clients and runs them through the regular windowing
/// and splitting path.
pub fn generate_synthetic(spec: &SyntheticSpec, opts: &DataOptions, seed: u64) -> Result<Vec<ClientDataset>> {
    let vocab = spec.vocabulary();
    spec.generate_streams(opts.window_length, opts.stride, seed)?
        .iter()
        .map(|c| build_client_dataset(&c.client_id, &c.segments, &vocab, opts, seed))
        .collect()
}
