//! Sensor data ingestion and preparation: CSV ingest, 10 Hz consolidation,
//! label merging, windowing, train/test split and synthetic clients.

mod dataset;
mod ingest;
mod labels;
mod record;
mod resample;
mod sample;
mod split;
mod synthetic;
mod window;

pub use dataset::{
    build_client_dataset, label_windows, observed_vocabulary, ClientDataset, DataOptions,
};
pub use ingest::{ingest_csv, ingest_reader, write_csv, Ingested, CSV_HEADER};
pub use labels::{
    merge_labels, LabelMap, DEFAULT_ACTIVITIES, DEFAULT_POSITIONS, LEG_FOOT_VARIANTS,
    WALKING_VARIANTS,
};
pub use record::{SensorRecord, Stream};
pub use resample::{resample_to_10hz, BIN_MS};
pub use sample::{TaskLabels, Vocabulary, WindowedSample};
pub use split::{split_train_test, train_size, MIN_STRATUM};
pub use synthetic::{
    client_id, generate_synthetic, Skew, SyntheticClient, SyntheticSpec, SEGMENT_GAP_MS,
    SYNTHETIC_ACTIVITIES, SYNTHETIC_POSITIONS,
};
pub use window::{window, window_count, RawWindow};
