use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParameterStore};
use crate::seed::rng;

/// Coordinates sampled per tensor.
pub const MAX_COORDS_PER_TENSOR: usize = 200;

/// Compares analytic gradients against central differences.
///
/// Returns the largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`
/// over at most [`MAX_COORDS_PER_TENSOR`] coordinates of every tensor, sampled
/// uniformly without replacement using `seed`.
pub fn gradient_check<F>(mut loss_and_grad: F, params: &ParameterStore, eps: f64, seed: u64) -> Result<f64>
where
    F: FnMut(&ParameterStore) -> Result<(f64, Gradients)>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::Shape(format!("gradient check eps {eps} outside [1e-6, 1e-3]")));
    }
    let (loss, grads) = loss_and_grad(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("gradient check loss".into()));
    }
    if !grads.is_congruent(params) {
        return Err(Error::Shape("gradient check: gradients not congruent".into()));
    }
    let mut rng = rng(seed);
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let len = params.tensor(name)?.len();
        let picked = sample(&mut rng, len, len.min(MAX_COORDS_PER_TENSOR));
        let analytic = grads.get(name).expect("congruent").data().to_vec();
        for idx in picked.iter() {
            let orig = params.tensor(name)?.data()[idx];
            set(&mut probe, name, idx, orig + eps);
            let (plus, _) = loss_and_grad(&probe)?;
            set(&mut probe, name, idx, orig - eps);
            let (minus, _) = loss_and_grad(&probe)?;
            set(&mut probe, name, idx, orig);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("gradient check loss at {name}[{idx}]")));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn set(store: &mut ParameterStore, name: &str, idx: usize, value: f64) {
    store.get_mut(name).expect("known name").tensor.data_mut()[idx] = value;
}
