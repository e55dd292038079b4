use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Disjoint class groups drawn from a parent dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplit {
    /// Original class ids per group, in the order they were drawn.
    pub groups: Vec<Vec<usize>>,
    /// Per group: original class id -> new label in `[0, group size)`.
    pub remap: Vec<BTreeMap<usize, usize>>,
}

impl TaskSplit {
    /// Human-readable group listing such as `(3 6 8 9)`.
    pub fn describe(&self, group: usize) -> String {
        let ids: Vec<String> = self.groups[group].iter().map(ToString::to_string).collect();
        format!("({})", ids.join(" "))
    }
}

/// Splits the classes of `parent` into disjoint groups chosen by a seeded
/// shuffle and returns one relabelled dataset per group.
pub fn partition_classes(parent: &LabeledDataset, group_sizes: &[usize], seed: u64) -> Result<(TaskSplit, Vec<LabeledDataset>)> {
    let total: usize = group_sizes.iter().sum();
    if total > parent.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "groups need {total} classes but the parent has {}",
            parent.num_classes()
        )));
    }
    if group_sizes.iter().any(|&g| g == 0) {
        return Err(Error::InvalidConfig("group sizes must be positive".into()));
    }
    let mut classes: Vec<usize> = (0..parent.num_classes()).collect();
    classes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut groups = Vec::with_capacity(group_sizes.len());
    let mut remaps = Vec::with_capacity(group_sizes.len());
    let mut start = 0;
    for &size in group_sizes {
        let group = classes[start..start + size].to_vec();
        start += size;
        remaps.push(group.iter().enumerate().map(|(new, &old)| (old, new)).collect::<BTreeMap<_, _>>());
        groups.push(group);
    }
    let split = TaskSplit { groups, remap: remaps };

    let mut datasets = Vec::with_capacity(split.groups.len());
    for (g, remap) in split.remap.iter().enumerate() {
        let idx: Vec<usize> = parent
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, y)| remap.contains_key(y))
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::InvalidData(format!("group {} has no samples", split.describe(g))));
        }
        let mut features = Array2::zeros((idx.len(), parent.dim()));
        for (dst, &i) in idx.iter().enumerate() {
            features.row_mut(dst).assign(&parent.features().row(i));
        }
        let labels = idx.iter().map(|&i| remap[&parent.labels()[i]]).collect();
        let task_id = format!("{}{}", parent.task_id(), split.describe(g));
        datasets.push(LabeledDataset::new(features, labels, remap.len(), task_id)?);
    }
    Ok((split, datasets))
}
