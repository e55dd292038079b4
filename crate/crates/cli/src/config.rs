//! Run configuration: one TOML document per experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use modeldna::mgmp::{validate_delta, MgmpConfig};
use modeldna::nn::{ArchDescriptor, TrainConfig};
use modeldna::seed::derive_seed;
use modeldna::tasks::RelationCounts;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// The desk experiment shipped with the binary.
pub const DESK_TOML: &str = include_str!("../configs/desk.toml");

/// Environment variable overriding the default output root.
pub const OUT_ENV: &str = "MODELDNA_OUT";
const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Run directory name under the output root.
    pub name: String,
    /// Every stage seed is derived from this value.
    pub seed: u64,
    pub data: DataSpec,
    pub tasks: TaskLayout,
    pub model: ModelSpec,
    pub training: Training,
    #[serde(default)]
    pub pool: PoolLayout,
    #[serde(default)]
    pub mgmp: MgmpConfig,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub ablation: AblationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Gaussian blobs; every task is a class subset of one parent set.
    Blobs {
        num_classes: usize,
        per_class: usize,
        dim: usize,
        spread: f64,
    },
    /// Feature columns followed by an integer label column.
    Csv { path: PathBuf, num_classes: Option<usize> },
}

/// Group layout: task 0 is the source, then pool tasks, then evaluation tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskLayout {
    pub classes_per_task: usize,
    pub pool_tasks: usize,
    pub eval_tasks: usize,
}

impl TaskLayout {
    pub fn group_sizes(&self) -> Vec<usize> {
        vec![self.classes_per_task; 1 + self.pool_tasks + self.eval_tasks]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
}

/// A training schedule without its seed, which comes from the global seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Schedule {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Training {
    pub source: Schedule,
    /// Homologous models: initialized from the source.
    pub finetune: Schedule,
    /// Non-homologous models: random initialization.
    pub scratch: Schedule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolLayout {
    #[serde(default)]
    pub pool_counts: RelationCounts,
    #[serde(default)]
    pub eval_counts: RelationCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    /// Thresholds swept over the pool models before the held-out verdicts.
    pub sweep_deltas: Vec<f64>,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            sweep_deltas: vec![0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Fine-tune of the source on the first pool task used by the
    /// forgetting and layer-replacement probes.
    pub finetune: Schedule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    /// Concatenation latent sizes as multiples of the source class count.
    pub latent_multipliers: Vec<usize>,
    /// Adds a row with fragments made of model outputs only.
    pub include_no_generator: bool,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            latent_multipliers: vec![1, 3, 6],
            include_no_generator: true,
        }
    }
}

/// Stage names used for seed derivation.
pub mod stage {
    pub const SPLIT: &str = "split";
    pub const DATA: &str = "data";
    pub const SOURCE: &str = "source";
    pub const POOL: &str = "pool";
    pub const MGMP: &str = "mgmp";
    pub const DIAGNOSTIC: &str = "diagnostic";
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid run config")?;
        cfg.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn desk() -> Result<Self> {
        Self::parse(DESK_TOML)
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    pub fn source_classes(&self) -> usize {
        self.tasks.classes_per_task
    }

    pub fn input_dim(&self) -> Option<usize> {
        match &self.data {
            DataSpec::Blobs { dim, .. } => Some(*dim),
            DataSpec::Csv { .. } => None,
        }
    }

    pub fn arch(&self, input_dim: usize) -> Result<ArchDescriptor> {
        Ok(ArchDescriptor::mlp_classifier(input_dim, &self.model.hidden, self.tasks.classes_per_task)?)
    }

    /// Replaces the global seed and re-derives the MGMP seed.
    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.seed = seed;
        self.mgmp.seed = 0;
        self.resolve()
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        validate_delta(delta)?;
        self.mgmp.delta = delta;
        Ok(self)
    }

    /// Checks the document and expands every derived default.
    pub fn resolve(mut self) -> Result<Self> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version);
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name must be a plain directory name");
        }
        if let DataSpec::Blobs { num_classes, per_class, dim, spread } = &self.data {
            if *num_classes == 0 || *per_class == 0 || *dim == 0 || !(*spread >= 0.0) {
                bail!("blob sizes must be positive and spread nonnegative");
            }
        }
        let t = &self.tasks;
        if t.classes_per_task < 2 || t.pool_tasks == 0 || t.eval_tasks == 0 {
            bail!("tasks need at least two classes, one pool task and one evaluation task");
        }
        if self.model.hidden.iter().any(|&w| w == 0) {
            bail!("hidden widths must be positive");
        }
        for (what, s) in [
            ("training.source", &self.training.source),
            ("training.finetune", &self.training.finetune),
            ("training.scratch", &self.training.scratch),
            ("diagnostics.finetune", &self.diagnostics.finetune),
        ] {
            s.with_seed(0).validate().with_context(|| what.to_string())?;
        }
        for &d in &self.evaluation.sweep_deltas {
            validate_delta(d)?;
        }
        if self.ablation.latent_multipliers.iter().any(|&m| m == 0) {
            bail!("ablation latent multipliers must be positive");
        }

        let derived = self.stage_seed(stage::MGMP);
        if self.mgmp.seed != 0 && self.mgmp.seed != derived {
            bail!("mgmp.seed is derived from the global seed; remove it from the config");
        }
        self.mgmp.seed = derived;
        let classes = self.source_classes();
        self.mgmp.generator.latent_dim.get_or_insert(classes);
        self.mgmp.validate()?;
        self.mgmp.assembly_mode.check(self.mgmp.latent_dim(classes), classes)?;
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// `--out` wins, then `$MODELDNA_OUT/<name>`, then `runs/<name>`.
pub fn run_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    match out {
        Some(dir) => dir.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
            root.join(&cfg.name)
        }
    }
}
