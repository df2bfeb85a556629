use crate::error::{Error, Result};
use crate::params::{Gradients, ParameterStore, TrainableMask};

/// Plain SGD: `p <- p - lr * g` on trainable tensors. Frozen tensors are
/// returned untouched.
pub fn sgd_step(
    params: &ParameterStore,
    grads: &Gradients,
    mask: &TrainableMask,
    lr: f64,
) -> Result<ParameterStore> {
    let mut out = params.clone();
    sgd_step_in_place(&mut out, grads, mask, lr)?;
    Ok(out)
}

pub fn sgd_step_in_place(
    params: &mut ParameterStore,
    grads: &Gradients,
    mask: &TrainableMask,
    lr: f64,
) -> Result<()> {
    if !grads.is_congruent(params) {
        return Err(Error::Shape("sgd: gradients are not congruent with parameters".into()));
    }
    if !mask.is_congruent(params) {
        return Err(Error::Shape("sgd: mask is not congruent with parameters".into()));
    }
    for ((name, p), (_, g)) in params.iter_mut().zip(grads.iter()) {
        if mask.is_trainable(name) {
            p.tensor.add_scaled(-lr, g);
        }
    }
    Ok(())
}
