use rand::Rng;

use crate::seed::derived_rng;
use crate::tensor::Tensor;

/// Uniform initialization in `[-s, s]` with `s = gain/sqrt(fan_in)`, drawn
/// from a stream keyed by the experiment seed and the tensor name.
pub fn uniform_init(shape: &[usize], fan_in: usize, gain: f64, seed: u64, name: &str) -> Tensor {
    let scale = gain / (fan_in.max(1) as f64).sqrt();
    let mut rng = derived_rng(seed, &format!("init/{name}"), &[]);
    let mut t = Tensor::zeros(shape);
    t.data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-scale..=scale));
    t
}
