//! The experiment stages. Each reads its prerequisites from the run
//! directory, writes its artifacts there, and is skipped when a stamp shows
//! its inputs are unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use modeldna::diagnostics::{baseline_classify, forgetting_probe, layer_replacement_curve, BaselineReport, ForgettingProbe, ReplacementCurve};
use modeldna::dna::AssemblyMode;
use modeldna::mgmp::{delta_sweep, evaluate, train_mgmp, EvalReport, MgmpModel, ProvenanceVerdict};
use modeldna::nn::Checkpoint;
use modeldna::tasks::{
    build_pool, make_synthetic_blobs, partition_classes, train_homologous, train_source, LabeledDataset, ModelPool, PoolConfig,
    Relation, SplitRole, TrainedPool,
};
use serde::{Deserialize, Serialize};

use crate::config::{stage, DataSpec};
use crate::run::{Outcome, Run};
use crate::viz::{self, LabeledFragments, VizSummary};

pub const TRAIN_SOURCE: &str = "train-source";
pub const BUILD_POOL: &str = "build-pool";
pub const TRAIN_MGMP: &str = "train-mgmp";
pub const EVALUATE: &str = "evaluate";
pub const BASELINE: &str = "baseline";
pub const REPLACE_DIAGNOSTIC: &str = "replace-diagnostic";
pub const EXPORT_VIZ: &str = "export-viz";
pub const ABLATION: &str = "ablation";

pub const SPLIT_JSON: &str = "split.json";
pub const SOURCE_CKPT: &str = "checkpoints/source.ckpt";
pub const POOL_JSON: &str = "pool.json";
pub const MGMP_DIR: &str = "mgmp";
pub const EVAL_JSON: &str = "reports/eval.json";
pub const SWEEP_JSON: &str = "reports/delta-sweep.json";
pub const SWEEP_CSV: &str = "reports/delta-sweep.csv";
pub const BASELINE_JSON: &str = "reports/baseline.json";
pub const BASELINE_CSV: &str = "reports/baseline.csv";
pub const REPLACEMENT_JSON: &str = "reports/replacement.json";
pub const REPLACEMENT_CSV: &str = "reports/replacement.csv";
pub const FORGETTING_JSON: &str = "reports/forgetting.json";
pub const VIZ_JSON: &str = "reports/viz.json";
pub const FRAGMENTS_CSV: &str = "viz/fragments.csv";
pub const PROJECTION_CSV: &str = "viz/projection.csv";
pub const ABLATION_JSON: &str = "reports/ablation.json";
pub const ABLATION_CSV: &str = "reports/ablation.csv";

/// Diagnostic fine-tune of the source on the first pool task.
pub const DIAGNOSTIC_ID: &str = "diag-hom-t0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRecord {
    pub group: usize,
    /// `source`, `pool` or `evaluation`.
    pub role: String,
    pub task_id: String,
    /// Parent class ids, e.g. `(3 6 8 9)`.
    pub classes: String,
    pub num_classes: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitRecord {
    pub parent_task_id: String,
    pub tasks: Vec<TaskRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplacementReport {
    /// Parameterized layer count of the shared architecture.
    pub layers: usize,
    pub curves: Vec<ReplacementCurve>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationRow {
    pub variant: String,
    pub generator: bool,
    pub assembly_mode: AssemblyMode,
    pub latent_dim: Option<usize>,
    pub fragment_dim: usize,
    pub classifier_input: usize,
    pub accuracy: f64,
    pub set_level_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

fn json_of<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

fn checkpoint_rel(id: &str) -> String {
    format!("checkpoints/{id}.ckpt")
}

impl Run {
    // ----- artifact loading -------------------------------------------------

    pub fn load_split(&self) -> Result<SplitRecord> {
        self.require(SPLIT_JSON, TRAIN_SOURCE)?;
        self.read_json(SPLIT_JSON)
    }

    pub fn load_task(&self, record: &TaskRecord) -> Result<LabeledDataset> {
        let path = self.require(&record.file, TRAIN_SOURCE)?;
        Ok(LabeledDataset::read_csv(&path, &record.task_id, Some(record.num_classes))?)
    }

    /// The source model's training data.
    pub fn source_data(&self) -> Result<LabeledDataset> {
        let split = self.load_split()?;
        self.load_task(&split.tasks[0])
    }

    pub fn tasks_with_role(&self, role: &str) -> Result<Vec<LabeledDataset>> {
        let split = self.load_split()?;
        split.tasks.iter().filter(|t| t.role == role).map(|t| self.load_task(t)).collect()
    }

    pub fn load_source(&self) -> Result<Checkpoint> {
        Ok(Checkpoint::load(&self.require(SOURCE_CKPT, TRAIN_SOURCE)?)?)
    }

    /// Loads the registry and every checkpoint it names, checking each file
    /// against its recorded content hash.
    pub fn load_pool(&self) -> Result<TrainedPool> {
        self.require(POOL_JSON, BUILD_POOL)?;
        let pool: ModelPool = self.read_json(POOL_JSON)?;
        let mut checkpoints = BTreeMap::new();
        for entry in &pool.entries {
            let rel = checkpoint_rel(&entry.checkpoint_id);
            let bytes = std::fs::read(self.path(&rel)).with_context(|| format!("pool.json names missing {rel}"))?;
            let hash = modeldna::content_hash(&bytes);
            if entry.content_hash.as_deref() != Some(hash.as_str()) {
                bail!("{rel} does not match the content hash recorded in pool.json");
            }
            checkpoints.insert(entry.checkpoint_id.clone(), Checkpoint::from_bytes(&bytes)?);
        }
        let trained = TrainedPool { pool, checkpoints };
        trained.validate()?;
        Ok(trained)
    }

    pub fn load_mgmp(&self) -> Result<MgmpModel> {
        self.require(&format!("{MGMP_DIR}/mgmp.json"), TRAIN_MGMP)?;
        Ok(MgmpModel::load(&self.path(MGMP_DIR))?)
    }

    fn targets<'a>(&self, pool: &'a TrainedPool, role: SplitRole) -> Result<Vec<(&'a Checkpoint, Relation)>> {
        pool.pool
            .role_entries(role)
            .map(|e| Ok((pool.checkpoint(&e.checkpoint_id)?, e.relation)))
            .collect()
    }

    // ----- stages -------------------------------------------------------------

    pub fn train_source(&self) -> Result<Outcome> {
        let cfg = &self.cfg;
        let inputs = [
            ("seed", cfg.seed.to_string()),
            ("data", json_of(&cfg.data)?),
            ("tasks", json_of(&cfg.tasks)?),
            ("model", json_of(&cfg.model)?),
            ("training.source", json_of(&cfg.training.source)?),
        ];
        self.stage(TRAIN_SOURCE, &inputs, || {
            let parent = match &cfg.data {
                DataSpec::Blobs {
                    num_classes,
                    per_class,
                    dim,
                    spread,
                } => make_synthetic_blobs(*num_classes, *per_class, *dim, *spread, cfg.stage_seed(stage::DATA))?,
                DataSpec::Csv { path, num_classes } => {
                    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    LabeledDataset::read_csv(path, &format!("csv:{name}"), *num_classes)?
                }
            };
            let (split, tasks) = partition_classes(&parent, &cfg.tasks.group_sizes(), cfg.stage_seed(stage::SPLIT))?;
            let mut written = Vec::new();
            let mut records = Vec::new();
            for (g, task) in tasks.iter().enumerate() {
                let role = if g == 0 {
                    "source"
                } else if g <= cfg.tasks.pool_tasks {
                    "pool"
                } else {
                    "evaluation"
                };
                let file = format!("data/task-{g}.csv");
                task.write_csv(&self.prepare(&file)?)?;
                written.push(file.clone());
                records.push(TaskRecord {
                    group: g,
                    role: role.into(),
                    task_id: task.task_id().into(),
                    classes: split.describe(g),
                    num_classes: task.num_classes(),
                    file,
                });
                self.log(&format!("task {g} ({role}): classes {}", split.describe(g)));
            }
            written.push(self.write_json(
                SPLIT_JSON,
                &SplitRecord {
                    parent_task_id: parent.task_id().into(),
                    tasks: records,
                },
            )?);

            let arch = cfg.arch(parent.dim())?;
            let schedule = cfg.training.source.with_seed(cfg.stage_seed(stage::SOURCE));
            let source = train_source("source", &tasks[0], &arch, &schedule)?;
            source.save(&self.prepare(SOURCE_CKPT)?)?;
            written.push(SOURCE_CKPT.into());
            self.notice(&format!(
                "train-source: source model reaches {:.4} training accuracy on {}",
                source.metrics.train_accuracy.unwrap_or(f64::NAN),
                tasks[0].task_id()
            ));
            Ok(written)
        })
    }

    pub fn build_pool(&self) -> Result<Outcome> {
        self.require(SOURCE_CKPT, TRAIN_SOURCE)?;
        let cfg = &self.cfg;
        let inputs = [
            ("after", self.stamp_hash(TRAIN_SOURCE)?),
            ("seed", cfg.seed.to_string()),
            ("pool", json_of(&cfg.pool)?),
            ("training.finetune", json_of(&cfg.training.finetune)?),
            ("training.scratch", json_of(&cfg.training.scratch)?),
        ];
        self.stage(BUILD_POOL, &inputs, || {
            let source = self.load_source()?;
            let pool_cfg = PoolConfig {
                finetune: cfg.training.finetune.with_seed(0),
                scratch: cfg.training.scratch.with_seed(0),
                pool_counts: cfg.pool.pool_counts,
                eval_counts: cfg.pool.eval_counts,
                seed: cfg.stage_seed(stage::POOL),
            };
            let trained = build_pool(&source, &self.tasks_with_role("pool")?, &self.tasks_with_role("evaluation")?, &pool_cfg)?;
            let mut pool = trained.pool.clone();
            let mut written = Vec::new();
            for entry in &mut pool.entries {
                let rel = checkpoint_rel(&entry.checkpoint_id);
                let hash = trained.checkpoint(&entry.checkpoint_id)?.save(&self.prepare(&rel)?)?;
                entry.content_hash = Some(hash);
                written.push(rel);
            }
            written.push(self.write_json(POOL_JSON, &pool)?);
            for role in [SplitRole::Pool, SplitRole::Evaluation] {
                for relation in [Relation::Homologous, Relation::NonHomologous] {
                    let n = pool.entries_with(role, relation).count();
                    self.log(&format!("pool: {n} {relation} models with role {role:?}"));
                }
            }
            self.notice(&format!("build-pool: trained {} target models", pool.entries.len()));
            Ok(written)
        })
    }

    pub fn train_mgmp(&self) -> Result<Outcome> {
        self.require(POOL_JSON, BUILD_POOL)?;
        let cfg = &self.cfg;
        // Delta only affects decisions, not training.
        let mut mgmp_cfg = cfg.mgmp.clone();
        mgmp_cfg.delta = 1.0;
        let inputs = [("after", self.stamp_hash(BUILD_POOL)?), ("mgmp", json_of(&mgmp_cfg)?)];
        self.stage(TRAIN_MGMP, &inputs, || {
            let source = self.load_source()?;
            let pool = self.load_pool()?;
            let data = self.source_data()?;
            let model = train_mgmp(&source, &pool, &data, &cfg.mgmp)?;
            let dir = self.path(MGMP_DIR);
            model.save(&dir)?;
            let mut written = vec![format!("{MGMP_DIR}/mgmp.json"), format!("{MGMP_DIR}/classifier.ckpt")];
            if model.generator.is_some() {
                written.push(format!("{MGMP_DIR}/generator.ckpt"));
            }
            if let (Some(first), Some(last)) = (model.training_log.first(), model.training_log.last()) {
                self.notice(&format!(
                    "train-mgmp: objective {:.4} -> {:.4} over {} epochs",
                    first.total,
                    last.total,
                    model.training_log.len()
                ));
            }
            Ok(written)
        })
    }

    pub fn evaluate(&self) -> Result<Outcome> {
        self.require(&format!("{MGMP_DIR}/mgmp.json"), TRAIN_MGMP)?;
        let cfg = &self.cfg;
        let inputs = [
            ("after", self.stamp_hash(TRAIN_MGMP)?),
            ("delta", cfg.mgmp.delta.to_string()),
            ("evaluation", json_of(&cfg.evaluation)?),
        ];
        self.stage(EVALUATE, &inputs, || {
            let mgmp = self.load_mgmp()?;
            let source = self.load_source()?;
            let pool = self.load_pool()?;
            let data = self.source_data()?;
            let delta = cfg.mgmp.delta;

            let validation = evaluate(&mgmp, &source, &self.targets(&pool, SplitRole::Pool)?, &data, delta)?;
            let sweep = delta_sweep(&validation, &cfg.evaluation.sweep_deltas)?;
            let mut written = vec![self.write_json(SWEEP_JSON, &sweep)?];
            let mut w = csv::Writer::from_path(self.prepare(SWEEP_CSV)?)?;
            w.write_record(["delta", "set_level_accuracy", "correct_verdicts", "models"])?;
            for row in &sweep {
                w.write_record([row.delta.to_string(), row.set_level_accuracy.to_string(), row.correct_verdicts.to_string(), row.models.to_string()])?;
                self.log(&format!("validation sweep: delta {} -> set-level accuracy {}", row.delta, row.set_level_accuracy));
            }
            w.flush()?;
            written.push(SWEEP_CSV.into());

            let report = evaluate(&mgmp, &source, &self.targets(&pool, SplitRole::Evaluation)?, &data, delta)?;
            written.push(self.write_json(EVAL_JSON, &report)?);
            for m in &report.per_model {
                written.push(self.write_json(&format!("verdicts/{}.json", m.model_id), &m.verdict)?);
                self.notice(&format!(
                    "evaluate: {} ({}) mean score {:.4} -> decision {} ({})",
                    m.model_id,
                    m.relation,
                    m.verdict.mean_score,
                    m.verdict.decision,
                    if m.verdict_correct { "correct" } else { "wrong" }
                ));
            }
            self.notice(&format!(
                "evaluate: fragment accuracy {:.4}, set-level accuracy {:.4} at delta {}",
                report.accuracy, report.set_level_accuracy, delta
            ));
            Ok(written)
        })
    }

    pub fn baseline(&self) -> Result<Outcome> {
        self.require(POOL_JSON, BUILD_POOL)?;
        let inputs = [("after", self.stamp_hash(BUILD_POOL)?)];
        self.stage(BASELINE, &inputs, || {
            let report = baseline_classify(&self.load_source()?, &self.load_pool()?)?;
            let written = vec![self.write_json(BASELINE_JSON, &report)?, {
                report.write_csv(&self.prepare(BASELINE_CSV)?)?;
                BASELINE_CSV.to_string()
            }];
            self.notice(&format!(
                "baseline: threshold {:.4}, pool accuracy {:.4}, evaluation accuracy {:.4}",
                report.threshold, report.pool_accuracy, report.baseline_accuracy
            ));
            Ok(written)
        })
    }

    pub fn replace_diagnostic(&self) -> Result<Outcome> {
        self.require(POOL_JSON, BUILD_POOL)?;
        let cfg = &self.cfg;
        let inputs = [
            ("after", self.stamp_hash(BUILD_POOL)?),
            ("seed", cfg.seed.to_string()),
            ("diagnostics", json_of(&cfg.diagnostics)?),
        ];
        self.stage(REPLACE_DIAGNOSTIC, &inputs, || {
            let source = self.load_source()?;
            let pool = self.load_pool()?;
            let data = self.source_data()?;
            let split = self.load_split()?;
            let first_pool = split.tasks.iter().find(|t| t.role == "pool").context("no pool task")?;
            let task = self.load_task(first_pool)?;

            let schedule = cfg.diagnostics.finetune.with_seed(cfg.stage_seed(stage::DIAGNOSTIC));
            let tuned = train_homologous(DIAGNOSTIC_ID, &source, &task, &schedule)?;
            let diag_rel = checkpoint_rel(DIAGNOSTIC_ID);
            tuned.save(&self.prepare(&diag_rel)?)?;

            let scratch = pool
                .pool
                .entries_with(SplitRole::Pool, Relation::NonHomologous)
                .find(|e| e.task_id == task.task_id())
                .context("no non-homologous pool model for the first pool task")?;
            let scratch = pool.checkpoint(&scratch.checkpoint_id)?;

            let layers = source.arch().num_parameterized();
            let ks: Vec<usize> = (0..=layers).collect();
            let curves = vec![
                layer_replacement_curve(&source, &tuned, &data, &ks)?,
                layer_replacement_curve(&source, scratch, &data, &ks)?,
            ];
            let mut w = csv::Writer::from_path(self.prepare(REPLACEMENT_CSV)?)?;
            w.write_record(["target_id", "relation", "k", "source_task_accuracy"])?;
            for c in &curves {
                for (k, acc) in c.ks.iter().zip(&c.source_task_accuracy) {
                    w.write_record([c.target_id.as_str(), c.target_relation.as_str(), &k.to_string(), &acc.to_string()])?;
                }
                self.notice(&format!(
                    "replace-diagnostic: {} ({}) source-task accuracy by k: {}",
                    c.target_id,
                    c.target_relation,
                    c.source_task_accuracy.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
                ));
            }
            w.flush()?;

            let probe = forgetting_probe(&source, &tuned, &data)?;
            self.notice(&format!(
                "replace-diagnostic: forgetting {:.4} -> {:.4} after fine-tuning on {}",
                probe.acc_before,
                probe.acc_after,
                task.task_id()
            ));
            Ok(vec![
                diag_rel,
                self.write_json(REPLACEMENT_JSON, &ReplacementReport { layers, curves })?,
                REPLACEMENT_CSV.into(),
                self.write_json(FORGETTING_JSON, &probe)?,
            ])
        })
    }

    pub fn export_viz(&self) -> Result<Outcome> {
        self.require(&format!("{MGMP_DIR}/mgmp.json"), TRAIN_MGMP)?;
        let inputs = [("after", self.stamp_hash(TRAIN_MGMP)?)];
        self.stage(EXPORT_VIZ, &inputs, || {
            let mgmp = self.load_mgmp()?;
            let source = self.load_source()?;
            let pool = self.load_pool()?;
            let x = self.source_data()?.features().clone();
            let pick = |relation| {
                pool.pool
                    .entries_with(SplitRole::Evaluation, relation)
                    .next()
                    .with_context(|| format!("no {relation} evaluation model"))
            };
            let hom = pool.checkpoint(&pick(Relation::Homologous)?.checkpoint_id)?;
            let non = pool.checkpoint(&pick(Relation::NonHomologous)?.checkpoint_id)?;
            let frags = [
                mgmp.model_fragments(&source.model, x.view())?,
                mgmp.model_fragments(&hom.model, x.view())?,
                mgmp.model_fragments(&non.model, x.view())?,
            ];
            let sets = [
                LabeledFragments {
                    model_id: &source.id,
                    label: "source",
                    fragments: &frags[0],
                },
                LabeledFragments {
                    model_id: &hom.id,
                    label: Relation::Homologous.as_str(),
                    fragments: &frags[1],
                },
                LabeledFragments {
                    model_id: &non.id,
                    label: Relation::NonHomologous.as_str(),
                    fragments: &frags[2],
                },
            ];
            let summary = viz::export(&sets, &self.prepare(FRAGMENTS_CSV)?, &self.prepare(PROJECTION_CSV)?)?;
            self.notice(&format!(
                "export-viz: {} fragments projected; Spearman rho vs cosine distance {:.4}",
                summary.rows, summary.spearman_rho
            ));
            Ok(vec![FRAGMENTS_CSV.into(), PROJECTION_CSV.into(), self.write_json(VIZ_JSON, &summary)?])
        })
    }

    pub fn ablation(&self) -> Result<Outcome> {
        self.require(POOL_JSON, BUILD_POOL)?;
        let cfg = &self.cfg;
        let mut mgmp_cfg = cfg.mgmp.clone();
        mgmp_cfg.delta = 1.0;
        let inputs = [
            ("after", self.stamp_hash(BUILD_POOL)?),
            ("mgmp", json_of(&mgmp_cfg)?),
            ("delta", cfg.mgmp.delta.to_string()),
            ("ablation", json_of(&cfg.ablation)?),
        ];
        self.stage(ABLATION, &inputs, || {
            let source = self.load_source()?;
            let pool = self.load_pool()?;
            let data = self.source_data()?;
            let targets = self.targets(&pool, SplitRole::Evaluation)?;
            let classes = cfg.source_classes();

            let mut variants = vec![(format!("addition-z{classes}"), true, AssemblyMode::Addition, classes)];
            for &m in &cfg.ablation.latent_multipliers {
                variants.push((format!("concatenation-z{}", m * classes), true, AssemblyMode::Concatenation, m * classes));
            }
            if cfg.ablation.include_no_generator {
                variants.push(("no-generator".into(), false, cfg.mgmp.assembly_mode, classes));
            }

            let mut rows = Vec::with_capacity(variants.len());
            for (name, generator, mode, latent) in variants {
                let mut v = cfg.mgmp.clone();
                v.generator.enabled = generator;
                v.assembly_mode = mode;
                v.generator.latent_dim = Some(latent);
                let model = train_mgmp(&source, &pool, &data, &v)?;
                let report = evaluate(&model, &source, &targets, &data, v.delta)?;
                self.notice(&format!(
                    "ablation: {name} fragment accuracy {:.4}, set-level {:.4}",
                    report.accuracy, report.set_level_accuracy
                ));
                rows.push(AblationRow {
                    variant: name,
                    generator,
                    assembly_mode: mode,
                    latent_dim: generator.then_some(latent),
                    fragment_dim: model.fragment_dim(),
                    classifier_input: model.classifier.input_dim(),
                    accuracy: report.accuracy,
                    set_level_accuracy: report.set_level_accuracy,
                });
            }
            let mut w = csv::Writer::from_path(self.prepare(ABLATION_CSV)?)?;
            w.write_record([
                "variant",
                "generator",
                "assembly_mode",
                "latent_dim",
                "fragment_dim",
                "classifier_input",
                "accuracy",
                "set_level_accuracy",
            ])?;
            for r in &rows {
                w.write_record([
                    r.variant.clone(),
                    r.generator.to_string(),
                    r.assembly_mode.as_str().to_string(),
                    r.latent_dim.map(|d| d.to_string()).unwrap_or_default(),
                    r.fragment_dim.to_string(),
                    r.classifier_input.to_string(),
                    r.accuracy.to_string(),
                    r.set_level_accuracy.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(vec![self.write_json(ABLATION_JSON, &AblationReport { rows })?, ABLATION_CSV.into()])
        })
    }

    /// Every stage in dependency order.
    pub fn run_all(&self) -> Result<()> {
        self.train_source()?;
        self.build_pool()?;
        self.train_mgmp()?;
        self.evaluate()?;
        self.baseline()?;
        self.replace_diagnostic()?;
        self.export_viz()?;
        self.ablation()?;
        Ok(())
    }

    // ----- report accessors ---------------------------------------------------

    pub fn eval_report(&self) -> Result<EvalReport> {
        self.read_json(EVAL_JSON)
    }

    pub fn baseline_report(&self) -> Result<BaselineReport> {
        self.read_json(BASELINE_JSON)
    }

    pub fn replacement_report(&self) -> Result<ReplacementReport> {
        self.read_json(REPLACEMENT_JSON)
    }

    pub fn forgetting_report(&self) -> Result<ForgettingProbe> {
        self.read_json(FORGETTING_JSON)
    }

    pub fn viz_summary(&self) -> Result<VizSummary> {
        self.read_json(VIZ_JSON)
    }

    pub fn ablation_report(&self) -> Result<AblationReport> {
        self.read_json(ABLATION_JSON)
    }
}

/// Scores `target` against `source` with a trained MGMP model.
pub fn verify(source: &Checkpoint, target: &Checkpoint, mgmp: &MgmpModel, data: &LabeledDataset, delta: f64) -> Result<ProvenanceVerdict> {
    let scores = mgmp.fragment_scores(data, &source.model, &target.model)?;
    Ok(ProvenanceVerdict::from_scores(scores, delta, &source.id, &target.id)?)
}

/// Resolves a checkpoint argument: an existing file, or an id inside the run.
pub fn resolve_checkpoint(run: &Run, arg: &str) -> Result<Checkpoint> {
    let path = Path::new(arg);
    let path = if path.is_file() { path.to_path_buf() } else { run.require(&checkpoint_rel(arg), BUILD_POOL)? };
    Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))
}
