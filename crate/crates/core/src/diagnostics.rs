//! Parameter-distance baseline and layer-replacement / forgetting probes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, replace_last_layers, Checkpoint};
use crate::tasks::{LabeledDataset, Relation, SplitRole, TrainedPool};

/// `||w_b - w_a||_2` over the flattened parameters.
pub fn delta_w_norm(a: &Checkpoint, b: &Checkpoint) -> Result<f64> {
    if a.arch() != b.arch() {
        return Err(Error::ArchMismatch(format!("{} and {} differ in architecture", a.id, b.id)));
    }
    Ok(a.model
        .params()
        .iter()
        .zip(b.model.params())
        .map(|(x, y)| (y - x) * (y - x))
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineEntry {
    pub checkpoint_id: String,
    pub relation: Relation,
    pub split_role: SplitRole,
    pub delta_w_norm: f64,
    /// Homologous iff the norm is below the threshold.
    pub predicted: Relation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineReport {
    pub per_entry: Vec<BaselineEntry>,
    pub threshold: f64,
    /// Balanced accuracy of the pool-role entries at the chosen threshold.
    pub pool_accuracy: f64,
    /// Balanced accuracy on evaluation-role entries.
    pub baseline_accuracy: f64,
}

fn predict(norm: f64, threshold: f64) -> Relation {
    if norm < threshold {
        Relation::Homologous
    } else {
        Relation::NonHomologous
    }
}

/// Mean over relations of the fraction predicted correctly.
fn balanced_accuracy<'a>(rows: impl Iterator<Item = (Relation, Relation)> + Clone + 'a) -> f64 {
    let rate = |rel: Relation| {
        let (hit, total) = rows
            .clone()
            .filter(|(truth, _)| *truth == rel)
            .fold((0usize, 0usize), |(h, t), (truth, p)| (h + usize::from(truth == p), t + 1));
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    };
    (rate(Relation::Homologous) + rate(Relation::NonHomologous)) / 2.0
}

/// Fits a norm threshold on the pool-role entries and scores it on the
/// evaluation-role entries.
pub fn baseline_classify(source: &Checkpoint, pool: &TrainedPool) -> Result<BaselineReport> {
    if pool.pool.entries.is_empty() {
        return Err(Error::InvalidData("empty pool".into()));
    }
    let mut norms = Vec::with_capacity(pool.pool.entries.len());
    for e in &pool.pool.entries {
        norms.push((e, delta_w_norm(source, pool.checkpoint(&e.checkpoint_id)?)?));
    }
    let fit: Vec<(Relation, f64)> = norms
        .iter()
        .filter(|(e, _)| e.split_role == SplitRole::Pool)
        .map(|(e, n)| (e.relation, *n))
        .collect();
    if fit.is_empty() {
        return Err(Error::InvalidData("no pool-role entries to fit the threshold".into()));
    }
    if !norms.iter().any(|(e, _)| e.split_role == SplitRole::Evaluation) {
        return Err(Error::InvalidData("no evaluation-role entries".into()));
    }

    let mut sorted: Vec<f64> = fit.iter().map(|(_, n)| *n).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(sorted[sorted.len() - 1] + 1.0);

    let (mut threshold, mut best) = (candidates[0], f64::NEG_INFINITY);
    for &c in &candidates {
        let acc = balanced_accuracy(fit.iter().map(|&(rel, n)| (rel, predict(n, c))));
        if acc > best {
            best = acc;
            threshold = c;
        }
    }

    let per_entry: Vec<BaselineEntry> = norms
        .iter()
        .map(|(e, n)| BaselineEntry {
            checkpoint_id: e.checkpoint_id.clone(),
            relation: e.relation,
            split_role: e.split_role,
            delta_w_norm: *n,
            predicted: predict(*n, threshold),
        })
        .collect();
    let baseline_accuracy = balanced_accuracy(
        per_entry
            .iter()
            .filter(|e| e.split_role == SplitRole::Evaluation)
            .map(|e| (e.relation, e.predicted)),
    );
    Ok(BaselineReport {
        per_entry,
        threshold,
        pool_accuracy: best,
        baseline_accuracy,
    })
}

impl BaselineReport {
    /// One row per entry: `checkpoint_id,relation,split_role,delta_w_norm,predicted`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["checkpoint_id", "relation", "split_role", "delta_w_norm", "predicted"])?;
        for e in &self.per_entry {
            let role = match e.split_role {
                SplitRole::Pool => "pool",
                SplitRole::Evaluation => "evaluation",
            };
            w.write_record([
                e.checkpoint_id.as_str(),
                e.relation.as_str(),
                role,
                &e.delta_w_norm.to_string(),
                e.predicted.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplacementCurve {
    pub target_id: String,
    pub target_relation: Relation,
    pub ks: Vec<usize>,
    pub source_task_accuracy: Vec<f64>,
}

/// Source-task accuracy of `target` with its last `k` parameterized layers
/// taken from `source`, for each `k`.
pub fn layer_replacement_curve(
    source: &Checkpoint,
    target: &Checkpoint,
    source_data: &LabeledDataset,
    ks: &[usize],
) -> Result<ReplacementCurve> {
    let relation = Relation::from_lineage(&target.lineage, &source.id).ok_or_else(|| {
        Error::InvalidData(format!("{} descends from an unrelated checkpoint", target.id))
    })?;
    let source_task_accuracy = ks
        .iter()
        .map(|&k| nn::accuracy(&replace_last_layers(&target.model, &source.model, k)?, source_data))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplacementCurve {
        target_id: target.id.clone(),
        target_relation: relation,
        ks: ks.to_vec(),
        source_task_accuracy,
    })
}

impl ReplacementCurve {
    /// One row per k: `target_id,relation,k,source_task_accuracy`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["target_id", "relation", "k", "source_task_accuracy"])?;
        for (k, acc) in self.ks.iter().zip(&self.source_task_accuracy) {
            w.write_record([self.target_id.as_str(), self.target_relation.as_str(), &k.to_string(), &acc.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForgettingProbe {
    pub acc_before: f64,
    pub acc_after: f64,
}

/// Source-task accuracy of the source model versus its fine-tuned descendant.
pub fn forgetting_probe(source: &Checkpoint, homologous: &Checkpoint, source_data: &LabeledDataset) -> Result<ForgettingProbe> {
    Ok(ForgettingProbe {
        acc_before: nn::accuracy(&source.model, source_data)?,
        acc_after: nn::accuracy(&homologous.model, source_data)?,
    })
}
