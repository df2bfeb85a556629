use super::record::SensorRecord;
use crate::error::{Error, Result};
use crate::model::Task;

pub const BIN_MS: i64 = 100;

/// Downsamples a stream to 10 Hz by averaging non-overlapping 100 ms bins
/// anchored at the first timestamp.
///
/// Each output record carries the bin start as timestamp and the most frequent
/// label per task within the bin (ties go to the earliest). An empty bin ends
/// the current segment, so the result is a list of gap-free segments.
pub fn resample_to_10hz(stream: &[SensorRecord], native_hz: f64) -> Result<Vec<Vec<SensorRecord>>> {
    if !(native_hz >= 10.0) {
        return Err(Error::UpsamplingUnsupported(native_hz));
    }
    let Some(first) = stream.first() else {
        return Ok(Vec::new());
    };
    let t0 = first.timestamp_ms;
    let mut segments: Vec<Vec<SensorRecord>> = Vec::new();
    let mut current: Vec<SensorRecord> = Vec::new();
    let mut prev_bin: Option<i64> = None;
    let mut i = 0;
    while i < stream.len() {
        let bin = (stream[i].timestamp_ms - t0).div_euclid(BIN_MS);
        let mut j = i + 1;
        while j < stream.len() && (stream[j].timestamp_ms - t0).div_euclid(BIN_MS) == bin {
            j += 1;
        }
        if prev_bin.is_some_and(|p| bin != p + 1) && !current.is_empty() {
            segments.push(std::mem::take(&mut current));
        }
        current.push(average_bin(&stream[i..j], t0 + bin * BIN_MS));
        prev_bin = Some(bin);
        i = j;
    }
    if !current.is_empty() {
        segments.push(current);
    }
    Ok(segments)
}

fn average_bin(bin: &[SensorRecord], timestamp_ms: i64) -> SensorRecord {
    let n = bin.len() as f64;
    let mut accel = [0.0; 3];
    for r in bin {
        for (a, v) in accel.iter_mut().zip(r.accel) {
            *a += v;
        }
    }
    accel.iter_mut().for_each(|a| *a /= n);
    SensorRecord {
        user_id: bin[0].user_id.clone(),
        activity: majority(bin, Task::Activity),
        position: majority(bin, Task::Position),
        timestamp_ms,
        accel,
    }
}

fn majority(bin: &[SensorRecord], task: Task) -> Option<String> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for label in bin.iter().filter_map(|r| r.label(task)) {
        match counts.iter_mut().find(|(l, _)| *l == label) {
            Some((_, c)) => *c += 1,
            None => counts.push((label, 1)),
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: i64, x: f64) -> SensorRecord {
        SensorRecord {
            user_id: "u".into(),
            activity: Some("Walking".into()),
            position: None,
            timestamp_ms: t,
            accel: [x, 2.0 * x, -x],
        }
    }

    #[test]
    fn ten_hz_is_identity() {
        let s: Vec<_> = (0..20).map(|i| rec(1000 + i * 100, i as f64 * 0.37)).collect();
        let out = resample_to_10hz(&s, 10.0).unwrap();
        assert_eq!(out, vec![s]);
    }

    #[test]
    fn constant_twenty_hz() {
        let s: Vec<_> = (0..40).map(|i| rec(i * 50, 1.0)).collect();
        let out = resample_to_10hz(&s, 20.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 20);
        assert!(out[0].iter().all(|r| r.accel[0] == 1.0));
    }

    #[test]
    fn fifty_hz_ramp_matches_binning_oracle() {
        let s: Vec<_> = (0..103).map(|i| rec(7 + i * 20, (7 + i * 20) as f64)).collect();
        let out = resample_to_10hz(&s, 50.0).unwrap();
        assert_eq!(out.len(), 1);
        // Oracle: collect values per bin by direct index arithmetic.
        let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
        for r in &s {
            bins.entry((r.timestamp_ms - 7) / 100).or_default().push(r.accel[0]);
        }
        assert_eq!(out[0].len(), bins.len());
        for (r, (b, vals)) in out[0].iter().zip(&bins) {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((r.accel[0] - mean).abs() < 1e-12);
            assert_eq!(r.timestamp_ms, 7 + b * 100);
            assert_eq!((r.timestamp_ms - 7) % 100, 0);
        }
    }

    #[test]
    fn empty_bin_splits_segment() {
        let mut s: Vec<_> = (0..5).map(|i| rec(i * 100, 1.0)).collect();
        s.extend((8..12).map(|i| rec(i * 100, 2.0)));
        let out = resample_to_10hz(&s, 10.0).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1][0].timestamp_ms, 800);
    }

    #[test]
    fn upsampling_rejected() {
        let err = resample_to_10hz(&[rec(0, 0.0)], 5.0).unwrap_err();
        assert!(err.to_string().contains("upsampling unsupported"));
    }

    #[test]
    fn bin_label_is_majority() {
        let mut s: Vec<_> = (0..4).map(|i| rec(i * 25, 0.0)).collect();
        s[0].activity = Some("Sitting".into());
        let out = resample_to_10hz(&s, 40.0).unwrap();
        assert_eq!(out[0][0].activity.as_deref(), Some("Walking"));
    }
}
