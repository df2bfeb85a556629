use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::sample::{TaskLabels, WindowedSample};
use crate::seed::rng;

/// Strata smaller than this are pooled rather than stratified.
pub const MIN_STRATUM: usize = 5;

/// Number of training samples for `n` items at `ratio`: `ceil(ratio * n)`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    (((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Seeded shuffle, then `ceil(ratio * n)` samples to train.
///
/// Samples are stratified by their label combination: every stratum with at
/// least [`MIN_STRATUM`] samples gets `floor` or `ceil` of its `ratio` share,
/// smaller strata are pooled into one, and leftover slots go to the largest
/// fractional remainders.
pub fn split_train_test(
    samples: Vec<WindowedSample>,
    ratio: f64,
    seed: u64,
) -> (Vec<WindowedSample>, Vec<WindowedSample>) {
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio must be in (0, 1)");
    let n = samples.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));

    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut by_key: BTreeMap<TaskLabels, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        by_key.entry(samples[i].labels).or_default().push(i);
    }
    let mut strata: Vec<Vec<usize>> = Vec::new();
    let mut pooled: Vec<usize> = Vec::new();
    for (_, members) in by_key {
        if members.len() >= MIN_STRATUM {
            strata.push(members);
        } else {
            pooled.extend(members);
        }
    }
    if !pooled.is_empty() {
        // keep shuffled order inside the pool
        pooled.sort_by_key(|&i| rank[i]);
        strata.push(pooled);
    }

    let total = train_size(n, ratio);
    let shares: Vec<f64> = strata.iter().map(|s| ratio * s.len() as f64).collect();
    let mut quota: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut remaining = total.saturating_sub(quota.iter().sum());
    let mut by_remainder: Vec<usize> = (0..strata.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &s in by_remainder.iter().cycle().take(strata.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[s] < strata[s].len() {
            quota[s] += 1;
            remaining -= 1;
        }
    }

    let mut is_train = vec![false; n];
    for (members, q) in strata.iter().zip(&quota) {
        for &i in &members[..*q] {
            is_train[i] = true;
        }
    }
    let mut slots: Vec<Option<WindowedSample>> = samples.into_iter().map(Some).collect();
    let mut train = Vec::with_capacity(total);
    let mut test = Vec::with_capacity(n - total);
    for &i in &order {
        let s = slots[i].take().expect("each index once");
        if is_train[i] {
            train.push(s);
        } else {
            test.push(s);
        }
    }
    (train, test)
}
