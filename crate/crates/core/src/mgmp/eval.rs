use serde::{Deserialize, Serialize};

use super::config::validate_delta;
use super::model::{MgmpModel, FRAGMENT_THRESHOLD};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::tasks::{LabeledDataset, Relation};

/// Set-level provenance decision for one (source, target) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProvenanceVerdict {
    pub source_id: String,
    pub target_id: String,
    pub fragment_scores: Vec<f64>,
    pub mean_score: f64,
    pub decision: u8,
    pub delta_used: f64,
}

impl ProvenanceVerdict {
    pub fn from_scores(scores: Vec<f64>, delta: f64, source_id: &str, target_id: &str) -> Result<Self> {
        validate_delta(delta)?;
        if scores.is_empty() {
            return Err(Error::InvalidData("no fragment scores".into()));
        }
        let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
        Ok(Self {
            source_id: source_id.to_string(),
            target_id: target_id.to_string(),
            fragment_scores: scores,
            mean_score,
            decision: u8::from(mean_score >= delta),
            delta_used: delta,
        })
    }

    /// Fragments whose bit is 1.
    pub fn positive_fragments(&self) -> usize {
        self.fragment_scores.iter().filter(|&&s| s > FRAGMENT_THRESHOLD).count()
    }
}

/// Fragment scores of one evaluated target model.
#[derive(Clone, Debug)]
pub struct ScoredModel {
    pub model_id: String,
    pub relation: Relation,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelEvaluation {
    pub model_id: String,
    pub relation: Relation,
    /// Fragments whose bit matches the ground truth.
    pub correct_fragments: usize,
    pub fragment_accuracy: f64,
    pub verdict_correct: bool,
    pub verdict: ProvenanceVerdict,
}

/// Fragment- and set-level accuracy over a set of evaluation models.
///
/// `a_n` and `a_o` are correct-fragment counts averaged over the homologous
/// and non-homologous models respectively, so each model weighs equally and
/// `accuracy = (a_n + a_o) / (2 n)` with `n` the source sample count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub a_n: f64,
    pub a_o: f64,
    pub n: usize,
    pub accuracy: f64,
    pub homologous_models: usize,
    pub non_homologous_models: usize,
    pub delta: f64,
    /// Mean over relations of the fraction of correct set-level verdicts.
    pub set_level_accuracy: f64,
    pub per_model: Vec<ModelEvaluation>,
}

pub fn accuracy_from_counts(a_n: f64, a_o: f64, n: usize) -> f64 {
    (a_n + a_o) / (2.0 * n as f64)
}

fn balanced(hits: &[(Relation, bool)]) -> f64 {
    let rate = |rel| {
        let v: Vec<bool> = hits.iter().filter(|(r, _)| *r == rel).map(|&(_, ok)| ok).collect();
        v.iter().filter(|&&ok| ok).count() as f64 / v.len() as f64
    };
    (rate(Relation::Homologous) + rate(Relation::NonHomologous)) / 2.0
}

/// Aggregates per-model fragment scores into an [`EvalReport`].
pub fn evaluate_scores(source_id: &str, models: Vec<ScoredModel>, delta: f64) -> Result<EvalReport> {
    validate_delta(delta)?;
    let n = models.first().map(|m| m.scores.len()).unwrap_or(0);
    if n == 0 || models.iter().any(|m| m.scores.len() != n) {
        return Err(Error::InvalidData("every evaluated model needs the same non-zero fragment count".into()));
    }
    let count = |rel| models.iter().filter(|m| m.relation == rel).count();
    let (hom, non) = (count(Relation::Homologous), count(Relation::NonHomologous));
    if hom == 0 || non == 0 {
        return Err(Error::InvalidData("evaluation needs both homologous and non-homologous models".into()));
    }

    let mut per_model = Vec::with_capacity(models.len());
    let (mut sum_n, mut sum_o) = (0usize, 0usize);
    for m in models {
        let truth = m.relation.label();
        let correct = m
            .scores
            .iter()
            .filter(|&&s| u8::from(s > FRAGMENT_THRESHOLD) == truth)
            .count();
        match m.relation {
            Relation::Homologous => sum_n += correct,
            Relation::NonHomologous => sum_o += correct,
        }
        let verdict = ProvenanceVerdict::from_scores(m.scores, delta, source_id, &m.model_id)?;
        per_model.push(ModelEvaluation {
            verdict_correct: verdict.decision == truth,
            fragment_accuracy: correct as f64 / n as f64,
            correct_fragments: correct,
            model_id: m.model_id,
            relation: m.relation,
            verdict,
        });
    }
    let a_n = sum_n as f64 / hom as f64;
    let a_o = sum_o as f64 / non as f64;
    let hits: Vec<(Relation, bool)> = per_model.iter().map(|m| (m.relation, m.verdict_correct)).collect();
    Ok(EvalReport {
        a_n,
        a_o,
        n,
        accuracy: accuracy_from_counts(a_n, a_o, n),
        homologous_models: hom,
        non_homologous_models: non,
        delta,
        set_level_accuracy: balanced(&hits),
        per_model,
    })
}

/// Scores every `(target, relation)` pair against `source` on `data`.
pub fn evaluate(
    mgmp: &MgmpModel,
    source: &Checkpoint,
    targets: &[(&Checkpoint, Relation)],
    data: &LabeledDataset,
    delta: f64,
) -> Result<EvalReport> {
    let scored = targets
        .iter()
        .map(|(ck, relation)| {
            Ok(ScoredModel {
                model_id: ck.id.clone(),
                relation: *relation,
                scores: mgmp.fragment_scores(data, &source.model, &ck.model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_scores(&source.id, scored, delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeltaSweepRow {
    pub delta: f64,
    pub set_level_accuracy: f64,
    pub correct_verdicts: usize,
    pub models: usize,
}

/// Set-level accuracy of the report's models at each threshold.
pub fn delta_sweep(report: &EvalReport, deltas: &[f64]) -> Result<Vec<DeltaSweepRow>> {
    deltas
        .iter()
        .map(|&delta| {
            validate_delta(delta)?;
            let hits: Vec<(Relation, bool)> = report
                .per_model
                .iter()
                .map(|m| (m.relation, u8::from(m.verdict.mean_score >= delta) == m.relation.label()))
                .collect();
            Ok(DeltaSweepRow {
                delta,
                set_level_accuracy: balanced(&hits),
                correct_verdicts: hits.iter().filter(|(_, ok)| *ok).count(),
                models: hits.len(),
            })
        })
        .collect()
}
