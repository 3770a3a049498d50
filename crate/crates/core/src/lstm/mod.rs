//! Single-layer LSTM with a linear output head, trained from scratch with
//! backpropagation through time and Adam.

mod cell;
mod train;

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use cell::{backward_bptt, forward_sequence, lstm_cell_forward, predict, GateActivations, LstmState};
pub use train::{evaluate_mae, loss_mae, train, TrainConfig, TrainOutcome};

/// Gate blocks, in the order they are stacked in [`LstmParams`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

/// All trainable parameters.
///
/// Gate weights are stacked gate-major into a `4H × (H + D)` row-major
/// matrix acting on `[h_{t-1}, x_t]`; biases likewise into `4H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    hidden: usize,
    input_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    head_weights: Vec<f64>,
    head_bias: f64,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input_dim: usize) -> Result<Self> {
        if hidden == 0 || input_dim == 0 {
            return Err(invalid("LSTM needs at least one hidden unit and one input"));
        }
        Ok(Self {
            hidden,
            input_dim,
            weights: vec![0.0; 4 * hidden * (hidden + input_dim)],
            biases: vec![0.0; 4 * hidden],
            head_weights: vec![0.0; hidden],
            head_bias: 0.0,
        })
    }

    /// Every parameter drawn uniformly from `[-scale, scale]`.
    pub fn random(hidden: usize, input_dim: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(hidden, input_dim)?;
        if scale > 0.0 {
            p.values_mut().for_each(|v| *v = rng.gen_range(-scale..=scale));
        }
        Ok(p)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Width of the concatenated `[h, x]` input.
    pub fn concat_dim(&self) -> usize {
        self.hidden + self.input_dim
    }

    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        let block = self.hidden * self.concat_dim();
        &self.weights[gate as usize * block..(gate as usize + 1) * block]
    }

    pub fn gate_weights_mut(&mut self, gate: Gate) -> &mut [f64] {
        let block = self.hidden * self.concat_dim();
        &mut self.weights[gate as usize * block..(gate as usize + 1) * block]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        &self.biases[gate as usize * self.hidden..(gate as usize + 1) * self.hidden]
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden;
        &mut self.biases[gate as usize * h..(gate as usize + 1) * h]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.head_weights
    }

    pub fn head_weights_mut(&mut self) -> &mut [f64] {
        &mut self.head_weights
    }

    pub fn head_bias(&self) -> f64 {
        self.head_bias
    }

    pub fn set_head_bias(&mut self, b: f64) {
        self.head_bias = b;
    }

    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len() + self.head_weights.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parameters in flat order: weights, biases, head weights, head bias.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .chain(&self.biases)
            .chain(&self.head_weights)
            .chain(std::iter::once(&self.head_bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .chain(self.head_weights.iter_mut())
            .chain(std::iter::once(&mut self.head_bias))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }

    pub fn from_flat(hidden: usize, input_dim: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(hidden, input_dim)?;
        if flat.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), got: flat.len() });
        }
        p.values_mut().zip(flat).for_each(|(d, s)| *d = *s);
        Ok(p)
    }

    /// Name of the block holding flat index `i`, for diagnostics.
    pub fn describe_index(&self, i: usize) -> String {
        let block = self.hidden * self.concat_dim();
        let names = ["W_f", "W_i", "W_c", "W_o"];
        let bias_names = ["b_f", "b_i", "b_c", "b_o"];
        if i < self.weights.len() {
            let (g, r) = (i / block, i % block);
            format!("{}[{}][{}]", names[g], r / self.concat_dim(), r % self.concat_dim())
        } else if i < self.weights.len() + self.biases.len() {
            let j = i - self.weights.len();
            format!("{}[{}]", bias_names[j / self.hidden], j % self.hidden)
        } else if i < self.len() - 1 {
            format!("W_y[{}]", i - self.weights.len() - self.biases.len())
        } else {
            "b_y".into()
        }
    }
}

/// On-disk model: shape header plus the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub hidden: usize,
    pub input_dim: usize,
    pub window_size: usize,
    pub params: Vec<f64>,
}

impl ModelFile {
    pub fn new(params: &LstmParams, window_size: usize) -> Self {
        Self {
            hidden: params.hidden,
            input_dim: params.input_dim,
            window_size,
            params: params.to_flat(),
        }
    }

    pub fn params(&self) -> Result<LstmParams> {
        LstmParams::from_flat(self.hidden, self.input_dim, &self.params)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: Self = serde_json::from_reader(r)?;
        file.params()?;
        Ok(file)
    }
}
