use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{validate_delta, MgmpConfig, OutputKind};
use super::eval::ProvenanceVerdict;
use crate::dna::{assemble_batch, GeneratorNet, ModelDna};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, LayeredModel, Lineage, Metrics};
use crate::tasks::LabeledDataset;

pub const MGMP_FORMAT_VERSION: u32 = 1;

/// Fragment-level decision threshold on the classifier's sigmoid output.
pub const FRAGMENT_THRESHOLD: f64 = 0.5;

/// Mean losses over the mini-batches of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochLog {
    pub epoch: usize,
    pub total: f64,
    pub similarity: f64,
    pub intra: f64,
    pub regularization: f64,
    pub bce: f64,
    /// Number of mini-batches; each batch's `N` is its row count.
    pub batches: usize,
}

/// Trained generator and provenance classifier.
#[derive(Clone, Debug)]
pub struct MgmpModel {
    pub generator: Option<GeneratorNet>,
    pub classifier: LayeredModel,
    pub config: MgmpConfig,
    pub training_log: Vec<EpochLog>,
    pub source_checkpoint_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Record {
    format_version: u32,
    source_checkpoint_id: String,
    config: MgmpConfig,
    generator_hash: Option<String>,
    classifier_hash: String,
    training_log: Vec<EpochLog>,
}

/// Model outputs of the kind selected by the config.
pub fn model_outputs(model: &LayeredModel, x: ArrayView2<f64>, kind: OutputKind) -> Result<Array2<f64>> {
    match kind {
        OutputKind::Probabilities => model.forward(x),
        OutputKind::Logits => model.forward_logits(x),
        OutputKind::LogProbabilities => {
            let mut out = model.forward_logits(x)?;
            for mut row in out.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                row.mapv_inplace(|v| v - lse);
            }
            Ok(out)
        }
    }
}

/// Row-wise `[a; b]`.
pub(crate) fn pair_rows(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("equal row counts")
}

impl MgmpModel {
    pub fn fragment_dim(&self) -> usize {
        self.classifier.input_dim() / 2
    }

    pub fn generator_hash(&self) -> String {
        self.generator
            .as_ref()
            .map_or_else(|| "none".to_string(), GeneratorNet::version_hash)
    }

    /// Fragments for inputs `x` given the matching model outputs `y`.
    pub fn fragments(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.generator {
            Some(g) => {
                let z = g.latents(x)?;
                assemble_batch(z.view(), y, self.config.assembly_mode)
            }
            None => Ok(y.to_owned()),
        }
    }

    pub fn model_fragments(&self, model: &LayeredModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let y = model_outputs(model, x, self.config.output_kind)?;
        self.fragments(x, y.view())
    }

    /// `f_p([o_s; o_t])` per row.
    pub fn score_fragments(&self, source: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<Vec<f64>> {
        if source.dim() != target.dim() {
            return Err(Error::shape("fragment pairs", format!("{:?}", source.dim()), format!("{:?}", target.dim())));
        }
        let out = self.classifier.forward(pair_rows(source, target).view())?;
        Ok(out.column(0).to_vec())
    }

    /// Fragment-level provenance score and bit for one input.
    pub fn predict_fragment(&self, x: &[f64], source: &LayeredModel, target: &LayeredModel) -> Result<(f64, u8)> {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("single row");
        let os = self.model_fragments(source, row)?;
        let ot = self.model_fragments(target, row)?;
        let score = self.score_fragments(os.view(), ot.view())?[0];
        Ok((score, u8::from(score > FRAGMENT_THRESHOLD)))
    }

    /// Fragment scores for every source sample.
    pub fn fragment_scores(&self, data: &LabeledDataset, source: &LayeredModel, target: &LayeredModel) -> Result<Vec<f64>> {
        let x = data.features().view();
        let os = self.model_fragments(source, x)?;
        let ot = self.model_fragments(target, x)?;
        self.score_fragments(os.view(), ot.view())
    }

    /// Set-level verdict: homologous iff the mean fragment score reaches `delta`.
    pub fn predict_model(
        &self,
        data: &LabeledDataset,
        source: &Checkpoint,
        target: &Checkpoint,
        delta: f64,
    ) -> Result<ProvenanceVerdict> {
        validate_delta(delta)?;
        let scores = self.fragment_scores(data, &source.model, &target.model)?;
        ProvenanceVerdict::from_scores(scores, delta, &source.id, &target.id)
    }

    pub fn model_dna(&self, model: &LayeredModel, model_id: &str, data: &LabeledDataset) -> Result<ModelDna> {
        let o = self.model_fragments(model, data.features().view())?;
        ModelDna::from_matrix(&o, model_id, self.config.assembly_mode, &self.generator_hash())
    }

    /// Writes `generator.ckpt` (when present), `classifier.ckpt`, and `mgmp.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let lineage = |what: &str| Lineage {
            init_from: None,
            trained_on_task_id: format!("mgmp-{what}:{}", self.source_checkpoint_id),
            seed: self.config.seed,
        };
        let generator_hash = match &self.generator {
            Some(g) => Some(
                Checkpoint::new("mgmp-generator", g.model().clone(), lineage("generator"), Metrics::default())
                    .save(&dir.join("generator.ckpt"))?,
            ),
            None => None,
        };
        let classifier_hash = Checkpoint::new("mgmp-classifier", self.classifier.clone(), lineage("classifier"), Metrics::default())
            .save(&dir.join("classifier.ckpt"))?;
        let record = Record {
            format_version: MGMP_FORMAT_VERSION,
            source_checkpoint_id: self.source_checkpoint_id.clone(),
            config: self.config.clone(),
            generator_hash,
            classifier_hash,
            training_log: self.training_log.clone(),
        };
        std::fs::write(dir.join("mgmp.json"), serde_json::to_vec_pretty(&record)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let bytes = std::fs::read(dir.join("mgmp.json"))?;
        let record: Record = serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt(format!("mgmp.json: {e}")))?;
        if record.format_version != MGMP_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: record.format_version,
                supported: MGMP_FORMAT_VERSION,
            });
        }
        let generator = match record.generator_hash {
            Some(_) => Some(GeneratorNet::from_model(Checkpoint::load(&dir.join("generator.ckpt"))?.model.eval())?),
            None => None,
        };
        let classifier = Checkpoint::load(&dir.join("classifier.ckpt"))?.model.eval();
        Ok(Self {
            generator,
            classifier,
            config: record.config,
            training_log: record.training_log,
            source_checkpoint_id: record.source_checkpoint_id,
        })
    }
}
