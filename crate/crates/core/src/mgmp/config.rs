use serde::{Deserialize, Serialize};

use crate::dna::AssemblyMode;
use crate::error::{Error, Result};

/// Which model output feeds DNA assembly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    #[default]
    Probabilities,
    Logits,
    /// Row-wise log-softmax of the logits.
    LogProbabilities,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// When false, fragments are the model outputs alone.
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_generator_hidden")]
    pub hidden: Vec<usize>,
    /// Latent size; defaults to the source class count.
    #[serde(default)]
    pub latent_dim: Option<usize>,
    /// Dropout rate after each hidden layer; 0 disables it.
    #[serde(default)]
    pub dropout: f64,
}

fn yes() -> bool {
    true
}

fn default_generator_hidden() -> Vec<usize> {
    vec![64, 64]
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            hidden: default_generator_hidden(),
            latent_dim: None,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub sim: f64,
    pub bce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { sim: 1.0, bce: 1.0 }
    }
}

/// How the similarity terms combine their per-fragment contributions.
///
/// `Sum` is the plain double sum. `Mean` divides the similarity term by `N`
/// and the intra-model term by its `N(N-1)` ordered pairs, so neither term
/// grows with the batch size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    #[default]
    Sum,
    Mean,
}

impl LossReduction {
    /// Multipliers applied to `(L_S, L_I)` for a batch of `n` fragments.
    pub fn scales(self, n: usize) -> (f64, f64) {
        match self {
            Self::Sum => (1.0, 1.0),
            Self::Mean => {
                let pairs = n * n.saturating_sub(1);
                (1.0 / n.max(1) as f64, if pairs == 0 { 1.0 } else { 1.0 / pairs as f64 })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MgmpConfig {
    /// Temperature of the similarity losses.
    pub tau: f64,
    /// Weight of the generator l2 penalty.
    pub lambda_reg: f64,
    /// Set-level decision threshold on the mean fragment score.
    pub delta: f64,
    pub assembly_mode: AssemblyMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub generator: GeneratorConfig,
    pub classifier_hidden: Vec<usize>,
    /// Dropout rate of the classifier hidden layers; 0 disables it.
    pub classifier_dropout: f64,
    pub loss_weights: LossWeights,
    /// Adds the positive pair to the contrastive denominator (InfoNCE form).
    pub include_positive_in_denominator: bool,
    pub loss_reduction: LossReduction,
    pub output_kind: OutputKind,
}

impl Default for MgmpConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            lambda_reg: 1e-4,
            delta: 0.9,
            assembly_mode: AssemblyMode::Addition,
            batch_size: 32,
            epochs: 60,
            seed: 0,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            generator: GeneratorConfig::default(),
            classifier_hidden: vec![64, 32],
            classifier_dropout: crate::nn::DEFAULT_DROPOUT,
            loss_weights: LossWeights::default(),
            include_positive_in_denominator: false,
            loss_reduction: LossReduction::Sum,
            output_kind: OutputKind::Probabilities,
        }
    }
}

pub fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} must lie in (0, 1]")));
    }
    Ok(())
}

impl MgmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau {} must be positive", self.tau)));
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(Error::InvalidConfig("lambda_reg must be nonnegative".into()));
        }
        validate_delta(self.delta)?;
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be at least 2".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.loss_weights.sim >= 0.0 && self.loss_weights.bce >= 0.0) {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        for (what, rate) in [("generator.dropout", self.generator.dropout), ("classifier_dropout", self.classifier_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!("{what} {rate} must lie in [0, 1)")));
            }
        }
        if self.generator.latent_dim == Some(0) {
            return Err(Error::InvalidConfig("latent_dim must be positive".into()));
        }
        Ok(())
    }

    /// Latent size for a source with `classes` outputs.
    pub fn latent_dim(&self, classes: usize) -> usize {
        self.generator.latent_dim.unwrap_or(classes)
    }

    /// Width of one fragment for a source with `classes` outputs.
    pub fn fragment_dim(&self, classes: usize) -> usize {
        if self.generator.enabled {
            self.assembly_mode.fragment_dim(self.latent_dim(classes), classes)
        } else {
            classes
        }
    }
}
