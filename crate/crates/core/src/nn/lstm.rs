//! Single LSTM layer with full backpropagation through time.
//!
//! Parameter layout: `w` is `[4H, D]`, `u` is `[4H, H]`, `b` is `[4H]`, with
//! gate blocks ordered (input, forget, cell candidate, output).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    pub w: &'a Tensor,
    pub u: &'a Tensor,
    pub b: &'a Tensor,
}

impl LstmParams<'_> {
    /// Returns `(input_size, hidden_size)`.
    fn dims(&self) -> Result<(usize, usize)> {
        self.w.expect_rank(2, "lstm w")?;
        let rows = self.w.shape()[0];
        if rows % 4 != 0 {
            return Err(Error::Shape(format!("lstm w has {rows} rows, not a multiple of 4")));
        }
        let h = rows / 4;
        let d = self.w.shape()[1];
        self.u.expect_shape(&[4 * h, h], "lstm u")?;
        self.b.expect_shape(&[4 * h], "lstm b")?;
        Ok((d, h))
    }
}

/// Activations retained by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    /// Post-nonlinearity gate values, `[T, 4H]`.
    gates: Vec<f64>,
    /// Cell states, `[T, H]`.
    cells: Vec<f64>,
    /// Hidden states, `[T, H]`.
    hidden: Tensor,
}

impl LstmCache {
    pub fn hidden(&self) -> &Tensor {
        &self.hidden
    }
}

/// Runs the recurrence from `h_0 = c_0 = 0` over `seq` (`[T, D]`) and returns
/// the hidden state sequence (`[T, H]`).
pub fn lstm_forward(seq: &Tensor, params: LstmParams<'_>) -> Result<Tensor> {
    Ok(lstm_forward_cached(seq, params)?.hidden)
}

pub fn lstm_forward_cached(seq: &Tensor, params: LstmParams<'_>) -> Result<LstmCache> {
    let (d, h) = params.dims()?;
    seq.expect_rank(2, "lstm input")?;
    if seq.shape()[1] != d {
        return Err(Error::Shape(format!(
            "lstm: input width {} does not match weight width {d}",
            seq.shape()[1]
        )));
    }
    let t_len = seq.shape()[0];
    let (w, u, b) = (params.w.data(), params.u.data(), params.b.data());
    let mut gates = vec![0.0; t_len * 4 * h];
    let mut cells = vec![0.0; t_len * h];
    let mut hidden = vec![0.0; t_len * h];
    let mut pre = vec![0.0; 4 * h];
    for t in 0..t_len {
        let x = seq.row(t);
        pre.copy_from_slice(b);
        for (r, p) in pre.iter_mut().enumerate() {
            let wr = &w[r * d..(r + 1) * d];
            *p += wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if t > 0 {
                let hp = &hidden[(t - 1) * h..t * h];
                let ur = &u[r * h..(r + 1) * h];
                *p += ur.iter().zip(hp).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            g[j] = sigmoid(pre[j]);
            g[h + j] = sigmoid(pre[h + j]);
            g[2 * h + j] = pre[2 * h + j].tanh();
            g[3 * h + j] = sigmoid(pre[3 * h + j]);
        }
        for j in 0..h {
            let c_prev = if t > 0 { cells[(t - 1) * h + j] } else { 0.0 };
            let c = g[h + j] * c_prev + g[j] * g[2 * h + j];
            cells[t * h + j] = c;
            hidden[t * h + j] = g[3 * h + j] * c.tanh();
        }
    }
    Ok(LstmCache {
        input: seq.clone(),
        gates,
        cells,
        hidden: Tensor::new(vec![t_len, h], hidden)?,
    })
}

pub struct LstmGrads {
    pub input: Tensor,
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

/// Backpropagation through time given `d_hidden = dL/dh_t` for every step.
pub fn lstm_backward(
    cache: &LstmCache,
    params: LstmParams<'_>,
    d_hidden: &Tensor,
) -> Result<LstmGrads> {
    let (d, h) = params.dims()?;
    let t_len = cache.input.shape()[0];
    d_hidden.expect_shape(&[t_len, h], "lstm hidden gradient")?;
    let (w, u) = (params.w.data(), params.u.data());
    let mut dx = vec![0.0; t_len * d];
    let mut dw = vec![0.0; 4 * h * d];
    let mut du = vec![0.0; 4 * h * h];
    let mut db = vec![0.0; 4 * h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..t_len).rev() {
        let g = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let c = cache.cells[t * h + j];
            let c_prev = if t > 0 { cache.cells[(t - 1) * h + j] } else { 0.0 };
            let tc = c.tanh();
            let dh = d_hidden.data()[t * h + j] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * cand * i * (1.0 - i);
            da[h + j] = dc * c_prev * f * (1.0 - f);
            da[2 * h + j] = dc * i * (1.0 - cand * cand);
            da[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let x = cache.input.row(t);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let dxt = &mut dx[t * d..(t + 1) * d];
        for (r, &a) in da.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            db[r] += a;
            let wr = &w[r * d..(r + 1) * d];
            let dwr = &mut dw[r * d..(r + 1) * d];
            for k in 0..d {
                dwr[k] += a * x[k];
                dxt[k] += a * wr[k];
            }
            if t > 0 {
                let hp = cache.hidden.row(t - 1);
                let ur = &u[r * h..(r + 1) * h];
                let dur = &mut du[r * h..(r + 1) * h];
                for k in 0..h {
                    dur[k] += a * hp[k];
                    dh_next[k] += a * ur[k];
                }
            }
        }
    }
    Ok(LstmGrads {
        input: Tensor::new(vec![t_len, d], dx)?,
        w: Tensor::new(vec![4 * h, d], dw)?,
        u: Tensor::new(vec![4 * h, h], du)?,
        b: Tensor::new(vec![4 * h], db)?,
    })
}
