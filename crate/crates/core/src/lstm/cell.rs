use super::LstmParams;
use crate::error::{invalid, Error, Result};
use crate::traffic::WindowSample;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate outputs of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct GateActivations {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything the backward pass needs from one step.
struct StepCache {
    z: Vec<f64>,
    gates: GateActivations,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn step(p: &LstmParams, x: &[f64], prev: &LstmState) -> (LstmState, StepCache) {
    let (h, cd) = (p.hidden(), p.concat_dim());
    let mut z = Vec::with_capacity(cd);
    z.extend_from_slice(&prev.h);
    z.extend_from_slice(x);
    let pre: Vec<f64> = p
        .weights()
        .chunks_exact(cd)
        .zip(p.biases())
        .map(|(row, b)| row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect();
    let gates = GateActivations {
        forget: pre[0..h].iter().map(|&v| sigmoid(v)).collect(),
        input: pre[h..2 * h].iter().map(|&v| sigmoid(v)).collect(),
        candidate: pre[2 * h..3 * h].iter().map(|&v| v.tanh()).collect(),
        output: pre[3 * h..4 * h].iter().map(|&v| sigmoid(v)).collect(),
    };
    let c: Vec<f64> = (0..h)
        .map(|k| gates.forget[k] * prev.c[k] + gates.input[k] * gates.candidate[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_new: Vec<f64> = (0..h).map(|k| gates.output[k] * tanh_c[k]).collect();
    (
        LstmState { h: h_new, c },
        StepCache {
            z,
            gates,
            c_prev: prev.c.clone(),
            tanh_c,
        },
    )
}

/// One LSTM step on `[h_{t-1}, x_t]`.
pub fn lstm_cell_forward(p: &LstmParams, x: &[f64], prev: &LstmState) -> Result<(LstmState, GateActivations)> {
    if x.len() != p.input_dim() {
        return Err(Error::DimensionMismatch { expected: p.input_dim(), got: x.len() });
    }
    if prev.h.len() != p.hidden() || prev.c.len() != p.hidden() {
        return Err(Error::DimensionMismatch { expected: p.hidden(), got: prev.h.len() });
    }
    if x.iter().chain(&prev.h).chain(&prev.c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM step input".into()));
    }
    let (state, cache) = step(p, x, prev);
    Ok((state, cache.gates))
}

fn check_window(p: &LstmParams, window: &[f64]) -> Result<()> {
    if window.is_empty() {
        return Err(Error::EmptyInput("LSTM input window"));
    }
    if p.input_dim() != 1 {
        return Err(invalid("scalar load windows need a model with input_dim = 1"));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM input window".into()));
    }
    Ok(())
}

fn unroll(p: &LstmParams, window: &[f64]) -> (LstmState, Vec<StepCache>) {
    let mut state = LstmState::zeros(p.hidden());
    let mut caches = Vec::with_capacity(window.len());
    for &x in window {
        let (next, cache) = step(p, &[x], &state);
        state = next;
        caches.push(cache);
    }
    (state, caches)
}

fn head(p: &LstmParams, h: &[f64]) -> f64 {
    p.head_weights().iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + p.head_bias()
}

/// Raw (unclamped) next-load prediction from zero initial state.
pub fn forward_sequence(p: &LstmParams, window: &[f64]) -> Result<f64> {
    check_window(p, window)?;
    let (state, _) = unroll(p, window);
    Ok(head(p, &state.h))
}

/// [`forward_sequence`] clamped to the valid load range.
pub fn predict(p: &LstmParams, window: &[f64]) -> Result<f64> {
    Ok(forward_sequence(p, window)?.clamp(0.0, 1.0))
}

/// Mean absolute error over `batch` and its exact gradient by BPTT.
/// The subgradient of `|r|` at `r = 0` is taken as 0.
pub fn backward_bptt(p: &LstmParams, batch: &[WindowSample]) -> Result<(f64, LstmParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("training batch"));
    }
    let (h, cd) = (p.hidden(), p.concat_dim());
    let mut grad = LstmParams::zeros(h, p.input_dim())?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut dpre = vec![0.0; 4 * h];
    for sample in batch {
        check_window(p, &sample.input)?;
        let (state, caches) = unroll(p, &sample.input);
        let residual = head(p, &state.h) - sample.target;
        loss += residual.abs() * scale;
        let dy = if residual > 0.0 {
            scale
        } else if residual < 0.0 {
            -scale
        } else {
            0.0
        };
        if dy == 0.0 {
            continue;
        }
        for (g, hv) in grad.head_weights_mut().iter_mut().zip(&state.h) {
            *g += dy * hv;
        }
        grad.set_head_bias(grad.head_bias() + dy);

        let mut dh: Vec<f64> = p.head_weights().iter().map(|w| dy * w).collect();
        let mut dc = vec![0.0; h];
        for cache in caches.iter().rev() {
            let g = &cache.gates;
            for k in 0..h {
                let t = cache.tanh_c[k];
                dc[k] += dh[k] * g.output[k] * (1.0 - t * t);
                dpre[3 * h + k] = dh[k] * t * g.output[k] * (1.0 - g.output[k]);
                dpre[k] = dc[k] * cache.c_prev[k] * g.forget[k] * (1.0 - g.forget[k]);
                dpre[h + k] = dc[k] * g.candidate[k] * g.input[k] * (1.0 - g.input[k]);
                dpre[2 * h + k] = dc[k] * g.input[k] * (1.0 - g.candidate[k] * g.candidate[k]);
                dc[k] *= g.forget[k];
            }
            dh.iter_mut().for_each(|v| *v = 0.0);
            for (&d, (w_row, gw_row)) in dpre
                .iter()
                .zip(p.weights().chunks_exact(cd).zip(grad.weights_mut().chunks_exact_mut(cd)))
            {
                for j in 0..cd {
                    gw_row[j] += d * cache.z[j];
                }
                for j in 0..h {
                    dh[j] += w_row[j] * d;
                }
            }
            grad.biases_mut().iter_mut().zip(&dpre).for_each(|(b, d)| *b += d);
        }
    }
    if let Some(i) = grad.values().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {}", p.describe_index(i))));
    }
    Ok((loss, grad))
}
