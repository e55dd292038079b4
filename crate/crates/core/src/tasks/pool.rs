use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{self, ArchDescriptor, Checkpoint, LayerSpec, LayeredModel, Lineage, Metrics, TrainConfig};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Homologous,
    NonHomologous,
}

impl Relation {
    /// Relation implied by a lineage record, or `None` when the model was
    /// initialized from some other checkpoint.
    pub fn from_lineage(lineage: &Lineage, source_id: &str) -> Option<Self> {
        match lineage.init_from.as_deref() {
            None => Some(Relation::NonHomologous),
            Some(id) if id == source_id => Some(Relation::Homologous),
            Some(_) => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Homologous => "homologous",
            Relation::NonHomologous => "non-homologous",
        }
    }

    /// Ground-truth provenance bit.
    pub fn label(self) -> u8 {
        u8::from(self == Relation::Homologous)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRole {
    Pool,
    Evaluation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PoolEntry {
    pub checkpoint_id: String,
    pub relation: Relation,
    pub task_id: String,
    pub split_role: SplitRole,
    /// SHA-256 of the persisted checkpoint, filled in when the pool is saved.
    #[serde(default)]
    pub content_hash: Option<String>,
}

/// Number of models trained per task for each relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationCounts {
    pub homologous: usize,
    pub non_homologous: usize,
}

impl Default for RelationCounts {
    fn default() -> Self {
        Self {
            homologous: 1,
            non_homologous: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    /// Training schedule for models initialized from the source.
    pub finetune: TrainConfig,
    /// Training schedule for randomly initialized models.
    pub scratch: TrainConfig,
    #[serde(default)]
    pub pool_counts: RelationCounts,
    #[serde(default)]
    pub eval_counts: RelationCounts,
    pub seed: u64,
}

/// Registry of target models relative to one source checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelPool {
    pub source_checkpoint_id: String,
    pub entries: Vec<PoolEntry>,
    pub config: PoolConfig,
}

impl ModelPool {
    pub fn entries_with(&self, role: SplitRole, relation: Relation) -> impl Iterator<Item = &PoolEntry> {
        self.entries
            .iter()
            .filter(move |e| e.split_role == role && e.relation == relation)
    }

    pub fn role_entries(&self, role: SplitRole) -> impl Iterator<Item = &PoolEntry> {
        self.entries.iter().filter(move |e| e.split_role == role)
    }

    /// One uniformly drawn homologous and one uniformly drawn non-homologous
    /// pool-role entry.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(&PoolEntry, &PoolEntry)> {
        let hom: Vec<_> = self.entries_with(SplitRole::Pool, Relation::Homologous).collect();
        let non: Vec<_> = self.entries_with(SplitRole::Pool, Relation::NonHomologous).collect();
        if hom.is_empty() {
            return Err(Error::MissingRelation("homologous"));
        }
        if non.is_empty() {
            return Err(Error::MissingRelation("non-homologous"));
        }
        let h = hom[rng.random_range(0..hom.len())];
        let n = non[rng.random_range(0..non.len())];
        Ok((h, n))
    }

    /// Structural invariants that do not need the checkpoints themselves.
    pub fn validate(&self) -> Result<()> {
        for rel in [Relation::Homologous, Relation::NonHomologous] {
            if self.entries_with(SplitRole::Pool, rel).next().is_none() {
                return Err(Error::MissingRelation(rel.as_str()));
            }
        }
        let pool_tasks: BTreeSet<_> = self.role_entries(SplitRole::Pool).map(|e| e.task_id.as_str()).collect();
        if let Some(e) = self
            .role_entries(SplitRole::Evaluation)
            .find(|e| pool_tasks.contains(e.task_id.as_str()))
        {
            return Err(Error::InvalidConfig(format!(
                "evaluation task {} also appears in the pool",
                e.task_id
            )));
        }
        let mut ids = BTreeSet::new();
        if let Some(e) = self.entries.iter().find(|e| !ids.insert(e.checkpoint_id.as_str())) {
            return Err(Error::InvalidConfig(format!("duplicate checkpoint id {}", e.checkpoint_id)));
        }
        Ok(())
    }
}

/// A pool registry together with its in-memory checkpoints.
#[derive(Clone, Debug)]
pub struct TrainedPool {
    pub pool: ModelPool,
    pub checkpoints: BTreeMap<String, Checkpoint>,
}

impl TrainedPool {
    pub fn checkpoint(&self, id: &str) -> Result<&Checkpoint> {
        self.checkpoints
            .get(id)
            .ok_or_else(|| Error::InvalidData(format!("pool has no checkpoint {id}")))
    }

    pub fn model(&self, id: &str) -> Result<&LayeredModel> {
        Ok(&self.checkpoint(id)?.model)
    }

    /// Samples a (homologous, non-homologous) pair of eval-mode models.
    pub fn sample_models<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(&LayeredModel, &LayeredModel)> {
        let (h, n) = self.pool.sample_pair(rng)?;
        Ok((self.model(&h.checkpoint_id)?, self.model(&n.checkpoint_id)?))
    }

    /// Full invariant check including relation/lineage agreement.
    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        for e in &self.pool.entries {
            let ck = self.checkpoint(&e.checkpoint_id)?;
            let implied = Relation::from_lineage(&ck.lineage, &self.pool.source_checkpoint_id);
            if implied != Some(e.relation) {
                return Err(Error::InvalidData(format!(
                    "entry {} is labelled {} but its lineage says {:?}",
                    e.checkpoint_id, e.relation, ck.lineage.init_from
                )));
            }
        }
        Ok(())
    }
}

fn metrics_for(model: &LayeredModel, data: &LabeledDataset) -> Result<Metrics> {
    Ok(Metrics {
        train_accuracy: Some(nn::accuracy(model, data)?),
        test_accuracy: None,
    })
}

/// Trains a randomly initialized source model.
pub fn train_source(id: &str, data: &LabeledDataset, arch: &ArchDescriptor, cfg: &TrainConfig) -> Result<Checkpoint> {
    train_from_scratch(id, data, arch, cfg)
}

/// Fine-tunes a copy of `source` on `data`. The output head is reused when the
/// class counts agree and re-drawn otherwise.
pub fn train_homologous(id: &str, source: &Checkpoint, data: &LabeledDataset, cfg: &TrainConfig) -> Result<Checkpoint> {
    let mut start = source.model.clone();
    if data.num_classes() != source.arch().num_classes() {
        start = with_new_head(&source.model, data.num_classes(), derive_seed(cfg.seed, "head"))?;
    }
    if data.dim() != start.input_dim() {
        return Err(Error::ArchMismatch(format!(
            "source expects {} features, task {} has {}",
            start.input_dim(),
            data.task_id(),
            data.dim()
        )));
    }
    let (model, _) = nn::train(&start, data, cfg)?;
    let metrics = metrics_for(&model, data)?;
    Ok(Checkpoint::new(
        id,
        model,
        Lineage {
            init_from: Some(source.id.clone()),
            trained_on_task_id: data.task_id().to_string(),
            seed: cfg.seed,
        },
        metrics,
    ))
}

/// Trains a model of the source architecture from random initialization.
pub fn train_non_homologous(id: &str, data: &LabeledDataset, arch: &ArchDescriptor, cfg: &TrainConfig) -> Result<Checkpoint> {
    train_from_scratch(id, data, arch, cfg)
}

fn train_from_scratch(id: &str, data: &LabeledDataset, arch: &ArchDescriptor, cfg: &TrainConfig) -> Result<Checkpoint> {
    arch.validate_classifier()?;
    let init = LayeredModel::build(arch.clone(), cfg.seed)?;
    let (model, _) = nn::train(&init, data, cfg)?;
    let metrics = metrics_for(&model, data)?;
    Ok(Checkpoint::new(
        id,
        model,
        Lineage {
            init_from: None,
            trained_on_task_id: data.task_id().to_string(),
            seed: cfg.seed,
        },
        metrics,
    ))
}

/// Copy of `model` with the final dense layer resized to `classes` outputs
/// and freshly initialized; every other layer keeps its parameters.
fn with_new_head(model: &LayeredModel, classes: usize, seed: u64) -> Result<LayeredModel> {
    let mut arch = model.arch().clone();
    let last = arch
        .layers
        .iter()
        .rposition(LayerSpec::is_parameterized)
        .expect("validated arch");
    match &mut arch.layers[last] {
        LayerSpec::Dense { outputs, .. } => *outputs = classes,
        other => return Err(Error::ArchMismatch(format!("cannot resize head layer {other:?}"))),
    }
    let mut fresh = LayeredModel::build(arch, seed)?;
    let keep = model.head_offset();
    fresh.params_mut()[..keep].copy_from_slice(&model.params()[..keep]);
    Ok(fresh)
}

struct Job {
    id: String,
    role: SplitRole,
    relation: Relation,
    task: usize,
    seed: u64,
}

/// Trains homologous and non-homologous models for every pool and evaluation
/// task. Training runs in parallel; results are gathered in job order.
pub fn build_pool(
    source: &Checkpoint,
    pool_tasks: &[LabeledDataset],
    eval_tasks: &[LabeledDataset],
    cfg: &PoolConfig,
) -> Result<TrainedPool> {
    if pool_tasks.is_empty() {
        return Err(Error::InvalidConfig("no pool tasks".into()));
    }
    if cfg.pool_counts.homologous < 1 || cfg.pool_counts.non_homologous < 1 {
        return Err(Error::InvalidConfig("pool needs at least one model per relation".into()));
    }
    cfg.finetune.validate()?;
    cfg.scratch.validate()?;

    let tasks: Vec<(SplitRole, &LabeledDataset)> = pool_tasks
        .iter()
        .map(|t| (SplitRole::Pool, t))
        .chain(eval_tasks.iter().map(|t| (SplitRole::Evaluation, t)))
        .collect();

    let mut jobs = Vec::new();
    for (t, (role, task)) in tasks.iter().enumerate() {
        let counts = match role {
            SplitRole::Pool => cfg.pool_counts,
            SplitRole::Evaluation => cfg.eval_counts,
        };
        let role_tag = match role {
            SplitRole::Pool => "pool",
            SplitRole::Evaluation => "eval",
        };
        for (relation, n, rel_tag) in [
            (Relation::Homologous, counts.homologous, "hom"),
            (Relation::NonHomologous, counts.non_homologous, "non"),
        ] {
            for r in 0..n {
                let id = format!("{role_tag}-{rel_tag}-t{t}-r{r}");
                let seed = derive_seed(cfg.seed, &format!("{id}/{}", task.task_id()));
                jobs.push(Job {
                    id,
                    role: *role,
                    relation,
                    task: t,
                    seed,
                });
            }
        }
    }

    let arch = source.arch().clone();
    let trained: Vec<Result<Checkpoint>> = jobs
        .par_iter()
        .map(|job| {
            let data = tasks[job.task].1;
            match job.relation {
                Relation::Homologous => train_homologous(&job.id, source, data, &cfg.finetune.with_seed(job.seed)),
                Relation::NonHomologous => train_non_homologous(&job.id, data, &arch, &cfg.scratch.with_seed(job.seed)),
            }
        })
        .collect();

    let mut entries = Vec::with_capacity(jobs.len());
    let mut checkpoints = BTreeMap::new();
    for (job, ck) in jobs.iter().zip(trained) {
        let ck = ck?;
        entries.push(PoolEntry {
            checkpoint_id: job.id.clone(),
            relation: job.relation,
            task_id: tasks[job.task].1.task_id().to_string(),
            split_role: job.role,
            content_hash: None,
        });
        checkpoints.insert(job.id.clone(), ck);
    }
    let pool = TrainedPool {
        pool: ModelPool {
            source_checkpoint_id: source.id.clone(),
            entries,
            config: cfg.clone(),
        },
        checkpoints,
    };
    pool.validate()?;
    Ok(pool)
}
