use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{rows, LayeredModel, Mode};
use crate::error::{Error, Result};
use crate::tasks::LabeledDataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_betas")]
    pub adam_betas: (f64, f64),
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_betas() -> (f64, f64) {
    (0.9, 0.999)
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 30,
            batch_size: 16,
            adam_betas: default_betas(),
            adam_eps: default_eps(),
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.adam_betas;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(Error::InvalidConfig(format!("adam betas {:?} must lie in [0, 1)", self.adam_betas)));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("adam eps must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("weight decay must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Adam with optional L2 weight decay folded into the gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, betas: (f64, f64), eps: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            weight_decay,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn from_config(len: usize, cfg: &TrainConfig) -> Self {
        Self::new(len, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps, cfg.weight_decay)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// Mean cross-entropy of softmax outputs against integer labels.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = probs
        .outer_iter()
        .zip(labels)
        .map(|(row, &y)| -row[y].max(PROB_FLOOR).ln())
        .sum();
    total / labels.len() as f64
}

/// Mean cross-entropy and its gradient with respect to the flat parameters.
pub fn cross_entropy_grad(
    model: &LayeredModel,
    x: &Array2<f64>,
    labels: &[usize],
    rng: Option<&mut (dyn RngCore + '_)>,
) -> Result<(f64, Vec<f64>)> {
    if !model.arch().ends_with_softmax() {
        return Err(Error::InvalidArch("cross-entropy training needs a softmax head".into()));
    }
    let tape = model.forward_tape(x.view(), rng)?;
    let probs = tape.output();
    let loss = cross_entropy(probs, labels);
    let n = labels.len() as f64;
    let mut grad = probs.clone();
    for (mut row, &y) in grad.outer_iter_mut().zip(labels) {
        row[y] -= 1.0;
    }
    grad /= n;
    let (grads, _) = model.backward_from_logits(&tape, &grad);
    Ok((loss, grads))
}

/// Mini-batch Adam on mean cross-entropy. Returns the trained model in eval
/// mode (parameters rounded to `f32`) and the per-epoch mean training loss.
pub fn train(model: &LayeredModel, data: &LabeledDataset, cfg: &TrainConfig) -> Result<(LayeredModel, Vec<f64>)> {
    cfg.validate()?;
    model.arch().validate_classifier()?;
    data.validate()?;
    if data.len() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if data.num_classes() > model.output_dim() {
        return Err(Error::InvalidData(format!(
            "dataset has {} classes but model outputs {}",
            data.num_classes(),
            model.output_dim()
        )));
    }
    if data.dim() != model.input_dim() {
        return Err(Error::shape("training data", model.input_dim(), data.dim()));
    }

    let mut model = model.clone();
    model.set_mode(Mode::Train);
    let mut opt = Adam::from_config(model.param_count(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = rows(data.features(), batch);
            let y: Vec<usize> = batch.iter().map(|&i| data.labels()[i]).collect();
            let (loss, grads) = cross_entropy_grad(&model, &x, &y, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            epoch_loss += loss * batch.len() as f64;
            opt.step(model.params_mut(), &grads);
        }
        history.push(epoch_loss / data.len() as f64);
    }

    model.round_to_f32();
    Ok((model.eval(), history))
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(model: &LayeredModel, data: &LabeledDataset) -> Result<f64> {
    let preds = model.predict_classes(data.features().view())?;
    let correct = preds.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}
