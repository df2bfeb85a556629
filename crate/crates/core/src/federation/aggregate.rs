use crate::error::{Error, Result};
use crate::params::{ParameterStore, TrainableMask};

use super::train::ClientUpdate;

/// Sample-weighted mean of client parameters.
///
/// Trainable tensors are averaged element-wise with weights `n_k / sum n`,
/// summed in ascending client-id order. Elements on which every update
/// agrees bit-for-bit are copied, so averaging equal values is exact.
/// Frozen tensors must be bit-identical across updates and are copied.
pub fn fedavg_aggregate(updates: &[ClientUpdate], mask: &TrainableMask) -> Result<ParameterStore> {
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let first = *sorted
        .first()
        .ok_or_else(|| Error::Aggregation("no updates".into()))?;
    if !mask.is_congruent(&first.params) {
        return Err(Error::Shape("mask is not congruent with updates".into()));
    }
    for u in &sorted {
        if u.n_k == 0 {
            return Err(Error::Aggregation(format!("client {} has n_k = 0", u.client_id)));
        }
        u.params.expect_congruent(&first.params, &format!("update from {}", u.client_id))?;
    }
    for pair in sorted.windows(2) {
        if pair[0].client_id == pair[1].client_id {
            return Err(Error::Aggregation(format!("duplicate client {}", pair[0].client_id)));
        }
    }
    let total: f64 = sorted.iter().map(|u| u.n_k as f64).sum();
    let weights: Vec<f64> = sorted.iter().map(|u| u.n_k as f64 / total).collect();

    let mut out = first.params.clone();
    for (name, p) in out.iter_mut() {
        let tensors: Vec<&[f64]> = sorted
            .iter()
            .map(|u| u.params.tensor(name).map(|t| t.data()))
            .collect::<Result<_>>()?;
        if !mask.is_trainable(name) {
            if tensors.iter().any(|t| !bits_equal(t, tensors[0])) {
                return Err(Error::FreezeViolation(name.to_string()));
            }
            continue;
        }
        for (i, v) in p.tensor.data_mut().iter_mut().enumerate() {
            let x0 = tensors[0][i];
            if tensors.iter().all(|t| t[i].to_bits() == x0.to_bits()) {
                *v = x0;
                continue;
            }
            let mut acc = 0.0;
            for (t, w) in tensors.iter().zip(&weights) {
                acc += w * t[i];
            }
            *v = acc;
        }
    }
    Ok(out)
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
