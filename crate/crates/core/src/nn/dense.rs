use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    weights.expect_rank(2, "dense weights")?;
    let (c, d) = (weights.shape()[0], weights.shape()[1]);
    if x.len() != d {
        return Err(Error::Shape(format!(
            "dense: input has {} values, weights expect {d}",
            x.len()
        )));
    }
    bias.expect_shape(&[c], "dense bias")?;
    Ok((c, d))
}

/// `weights · x + bias` with `weights` of shape `[C, D]`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c, d) = check(x, weights, bias)?;
    let w = weights.data();
    let out = (0..c)
        .map(|r| {
            bias.data()[r]
                + w[r * d..(r + 1) * d]
                    .iter()
                    .zip(x.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect();
    Ok(Tensor::from_vec(out))
}

pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(
    x: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    d_out: &Tensor,
) -> Result<DenseGrads> {
    let (c, d) = check(x, weights, bias)?;
    if d_out.len() != c {
        return Err(Error::Shape(format!(
            "dense: output gradient has {} values, expected {c}",
            d_out.len()
        )));
    }
    let w = weights.data();
    let mut dx = vec![0.0; d];
    let mut dw = vec![0.0; c * d];
    for (r, &g) in d_out.data().iter().enumerate() {
        for k in 0..d {
            dw[r * d + k] = g * x.data()[k];
            dx[k] += g * w[r * d + k];
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(x.shape().to_vec(), dx)?,
        weights: Tensor::new(vec![c, d], dw)?,
        bias: Tensor::from_vec(d_out.data().to_vec()),
    })
}
