use rand::Rng;

use crate::seed::rng;
use crate::tensor::Tensor;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
    t
}

pub fn central_difference(t: &Tensor, eps: f64, f: impl Fn(&Tensor) -> f64) -> Vec<f64> {
    let mut probe = t.clone();
    (0..t.len())
        .map(|i| {
            let orig = t.data()[i];
            probe.data_mut()[i] = orig + eps;
            let plus = f(&probe);
            probe.data_mut()[i] = orig - eps;
            let minus = f(&probe);
            probe.data_mut()[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}
