use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient through ReLU given the pre-activation input.
pub fn relu_backward(pre: &Tensor, d_out: &Tensor) -> Tensor {
    let mut g = d_out.clone();
    for (gv, &p) in g.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}
