use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize)> {
    input.expect_rank(2, "conv1d input")?;
    weights.expect_rank(3, "conv1d weights")?;
    let (t, c_in) = (input.shape()[0], input.shape()[1]);
    let (c_out, w_in, k) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    if w_in != c_in {
        return Err(Error::Shape(format!(
            "conv1d: input has {c_in} channels, weights expect {w_in}"
        )));
    }
    bias.expect_shape(&[c_out], "conv1d bias")?;
    if t < k {
        return Err(Error::WindowShorterThanKernel { len: t, kernel: k });
    }
    Ok((t, c_in, c_out, k))
}

/// Valid (unpadded) cross-correlation along time.
///
/// `input` is `[T, C_in]`, `weights` is `[C_out, C_in, K]`, `bias` is
/// `[C_out]`; the result is `[T - K + 1, C_out]`.
pub fn conv1d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (t, c_in, c_out, k) = check(input, weights, bias)?;
    let t_out = t - k + 1;
    let x = input.data();
    let w = weights.data();
    let mut out = vec![0.0; t_out * c_out];
    for ti in 0..t_out {
        let row = &mut out[ti * c_out..(ti + 1) * c_out];
        for (o, slot) in row.iter_mut().enumerate() {
            let mut acc = bias.data()[o];
            let wo = &w[o * c_in * k..(o + 1) * c_in * k];
            for kk in 0..k {
                let xr = &x[(ti + kk) * c_in..(ti + kk + 1) * c_in];
                for (c, xv) in xr.iter().enumerate() {
                    acc += xv * wo[c * k + kk];
                }
            }
            *slot = acc;
        }
    }
    Tensor::new(vec![t_out, c_out], out)
}

pub struct Conv1dGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Gradients of a scalar loss given `d_out = dL/d(output)`.
pub fn conv1d_backward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    d_out: &Tensor,
) -> Result<Conv1dGrads> {
    let (t, c_in, c_out, k) = check(input, weights, bias)?;
    let t_out = t - k + 1;
    d_out.expect_shape(&[t_out, c_out], "conv1d output gradient")?;
    let x = input.data();
    let w = weights.data();
    let g = d_out.data();
    let mut dx = vec![0.0; t * c_in];
    let mut dw = vec![0.0; c_out * c_in * k];
    let mut db = vec![0.0; c_out];
    for ti in 0..t_out {
        for o in 0..c_out {
            let go = g[ti * c_out + o];
            if go == 0.0 {
                continue;
            }
            db[o] += go;
            let base = o * c_in * k;
            for kk in 0..k {
                let row = (ti + kk) * c_in;
                for c in 0..c_in {
                    dw[base + c * k + kk] += go * x[row + c];
                    dx[row + c] += go * w[base + c * k + kk];
                }
            }
        }
    }
    Ok(Conv1dGrads {
        input: Tensor::new(vec![t, c_in], dx)?,
        weights: Tensor::new(vec![c_out, c_in, k], dw)?,
        bias: Tensor::new(vec![c_out], db)?,
    })
}
