use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cell::{backward_bptt, forward_sequence};
use super::LstmParams;
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::traffic::WindowSample;

/// Training hyperparameters; defaults follow the reference setup
/// (Adam, lr 0.001, 50 epochs, batch 32, MAE loss).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 10,
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(invalid("epochs, batch size and hidden units must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(invalid("Adam needs beta1, beta2 in [0, 1) and positive epsilon"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(invalid("init scale must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: LstmParams,
    /// Training-set MAE of the initial parameters.
    pub initial_loss: f64,
    /// Mean mini-batch MAE of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn loss_mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: predictions.len(), got: targets.len() });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("MAE inputs"));
    }
    Ok(predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / predictions.len() as f64)
}

/// MAE of raw model outputs over `samples`.
pub fn evaluate_mae(p: &LstmParams, samples: &[WindowSample]) -> Result<f64> {
    let preds = samples
        .iter()
        .map(|s| forward_sequence(p, &s.input))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    loss_mae(&preds, &targets)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, p: &mut LstmParams, grad: &LstmParams, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((w, g), m), v) in p.values_mut().zip(grad.values()).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *w -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Mini-batch Adam on the MAE loss; each epoch visits the samples in a
/// fresh seeded order.
pub fn train(samples: &[WindowSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let mut params = LstmParams::random(cfg.hidden, 1, cfg.init_scale, &mut seed::rng_for(cfg.seed, 0))?;
    let initial_loss = evaluate_mae(&params, samples)?;
    let mut adam = Adam {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = seed::rng_for(cfg.seed, 1);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i].clone()));
            let (loss, grad) = backward_bptt(&params, &batch)?;
            adam.step(&mut params, &grad, cfg);
            total += loss;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(TrainOutcome {
        params,
        initial_loss,
        epoch_losses,
    })
}
