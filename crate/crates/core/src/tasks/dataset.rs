use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Half-width of the cube synthetic class centers are drawn from.
const CENTER_RANGE: f64 = 2.0;

/// Feature matrix with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    task_id: String,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize, task_id: impl Into<String>) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            num_classes,
            task_id: task_id.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::InvalidData("dataset has no samples".into()));
        }
        if self.features.nrows() != self.labels.len() {
            return Err(Error::shape("dataset labels", self.features.nrows(), self.labels.len()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::InvalidData(format!("label {bad} outside [0, {})", self.num_classes)));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(())
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// First `n` samples (all of them when `n >= len`).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            features: self.features.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            num_classes: self.num_classes,
            task_id: self.task_id.clone(),
        }
    }

    /// Writes `x0,...,x{d-1},label` rows with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, y) in self.features.outer_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`write_csv`](Self::write_csv). The class
    /// count is `max(label) + 1` unless given.
    pub fn read_csv(path: &Path, task_id: &str, num_classes: Option<usize>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidData("csv rows need at least one feature and a label".into()));
            }
            let d = rec.len() - 1;
            if *dim.get_or_insert(d) != d {
                return Err(Error::InvalidData("ragged csv rows".into()));
            }
            for field in rec.iter().take(d) {
                feats.push(field.trim().parse::<f64>().map_err(|e| Error::InvalidData(format!("feature {field:?}: {e}")))?);
            }
            let label = &rec[d];
            labels.push(label.trim().parse::<usize>().map_err(|e| Error::InvalidData(format!("label {label:?}: {e}")))?);
        }
        let dim = dim.ok_or_else(|| Error::InvalidData("csv has no rows".into()))?;
        let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let features = Array2::from_shape_vec((labels.len(), dim), feats).expect("row lengths checked");
        Self::new(features, labels, classes, task_id)
    }
}

/// Balanced Gaussian clusters around seeded random centers, class-major order.
pub fn make_synthetic_blobs(num_classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> Result<LabeledDataset> {
    if num_classes < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 classes, got {num_classes}")));
    }
    if per_class == 0 || dim == 0 {
        return Err(Error::InvalidConfig("samples per class and dimension must be positive".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidConfig(format!("spread {spread} must be finite and nonnegative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-CENTER_RANGE..CENTER_RANGE)).collect())
        .collect();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let n = num_classes * per_class;
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for s in 0..per_class {
            let mut row = features.row_mut(c * per_class + s);
            for (j, mu) in center.iter().enumerate() {
                row[j] = mu + spread * noise.sample(&mut rng);
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(features, labels, num_classes, format!("blobs-{num_classes}x{per_class}-d{dim}-s{seed}"))
}
