//! Plot-ready fragment tables: raw fragments and a 2-D principal-component
//! projection.

use std::path::Path;

use anyhow::{bail, Result};
use modeldna::dna::cosine_sim;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Fragments of one model with the label written to the CSV.
pub struct LabeledFragments<'a> {
    pub model_id: &'a str,
    /// `source`, `homologous` or `non-homologous`.
    pub label: &'a str,
    pub fragments: &'a Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// One `(pc1, pc2)` row per input row.
    pub coords: Vec<[f64; 2]>,
    /// Variance captured by each component.
    pub explained_variance: [f64; 2],
}

/// Projects the rows of `data` onto their two leading principal axes.
///
/// Each axis is oriented so its largest-magnitude loading is positive, which
/// makes the result independent of the eigensolver's sign choice.
pub fn pca_2d(data: &Array2<f64>) -> Result<Projection> {
    let (n, d) = data.dim();
    if n < 2 || d == 0 {
        bail!("projection needs at least two fragments of positive width");
    }
    let mean = data.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let centered = DMatrix::from_fn(n, d, |i, j| data[[i, j]] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut coords = vec![[0.0; 2]; n];
    let mut explained_variance = [0.0; 2];
    for (c, &axis) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(axis).into_owned();
        let lead = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.neg_mut();
        }
        explained_variance[c] = eig.eigenvalues[axis].max(0.0);
        let proj = &centered * v;
        for (row, p) in coords.iter_mut().zip(proj.iter()) {
            row[c] = *p;
        }
    }
    Ok(Projection {
        coords,
        explained_variance,
    })
}

/// Ranks with ties sharing their average position (1-based).
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. Returns 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Spearman correlation between pairwise 2-D Euclidean distances and
/// full-dimensional cosine distances `1 - cos`.
pub fn distance_agreement(full: &Array2<f64>, projection: &Projection) -> Result<f64> {
    let n = full.nrows();
    let mut cosine = Vec::with_capacity(n * (n - 1) / 2);
    let mut planar = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let fi = full.row(i).to_vec();
        for j in i + 1..n {
            let fj = full.row(j).to_vec();
            cosine.push(1.0 - cosine_sim(&fi, &fj)?);
            let (p, q) = (projection.coords[i], projection.coords[j]);
            planar.push(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    Ok(spearman(&planar, &cosine))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VizSummary {
    pub rows: usize,
    pub fragment_dim: usize,
    pub labels: Vec<String>,
    pub explained_variance: [f64; 2],
    /// Rank agreement of 2-D distances with full-dimensional cosine distances.
    pub spearman_rho: f64,
}

/// Writes `fragments.csv` and `projection.csv` and summarizes the projection.
///
/// fragments.csv: `model_id,label,index,f0..f{d-1}`.
/// projection.csv: `model_id,label,index,pc1,pc2`.
pub fn export(sets: &[LabeledFragments<'_>], fragments_csv: &Path, projection_csv: &Path) -> Result<VizSummary> {
    if sets.is_empty() || sets.iter().all(|s| s.fragments.nrows() == 0) {
        bail!("no fragments to export");
    }
    let dim = sets[0].fragments.ncols();
    if sets.iter().any(|s| s.fragments.ncols() != dim) {
        bail!("fragment widths differ between models");
    }
    let views: Vec<_> = sets.iter().map(|s| s.fragments.view()).collect();
    let pooled = ndarray::concatenate(ndarray::Axis(0), &views)?;
    let projection = pca_2d(&pooled)?;

    let mut frag = csv::Writer::from_path(fragments_csv)?;
    let mut header = vec!["model_id".to_string(), "label".into(), "index".into()];
    header.extend((0..dim).map(|k| format!("f{k}")));
    frag.write_record(&header)?;
    let mut proj = csv::Writer::from_path(projection_csv)?;
    proj.write_record(["model_id", "label", "index", "pc1", "pc2"])?;

    let mut row = 0;
    let mut labels: Vec<String> = Vec::new();
    for set in sets {
        if !labels.iter().any(|l| l == set.label) {
            labels.push(set.label.to_string());
        }
        for (i, f) in set.fragments.rows().into_iter().enumerate() {
            let mut rec = vec![set.model_id.to_string(), set.label.to_string(), i.to_string()];
            rec.extend(f.iter().map(|v| v.to_string()));
            frag.write_record(&rec)?;
            let [a, b] = projection.coords[row];
            proj.write_record([set.model_id, set.label, &i.to_string(), &a.to_string(), &b.to_string()])?;
            row += 1;
        }
    }
    frag.flush()?;
    proj.flush()?;

    Ok(VizSummary {
        rows: row,
        fragment_dim: dim,
        labels,
        explained_variance: projection.explained_variance,
        spearman_rho: distance_agreement(&pooled, &projection)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_of_monotone_maps_is_one() {
        let a = [0.1, 0.5, 0.2, 0.9];
        let b: Vec<f64> = a.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((spearman(&a, &c) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pca_recovers_a_dominant_axis() {
        // Points on the line y = 2x with a tiny orthogonal wobble.
        let data = array![[0.0, 0.0, 0.0], [1.0, 2.0, 0.01], [2.0, 4.0, -0.01], [3.0, 6.0, 0.0]];
        let p = pca_2d(&data).unwrap();
        assert!(p.explained_variance[0] > 1e3 * p.explained_variance[1]);
        let first: Vec<f64> = p.coords.iter().map(|c| c[0]).collect();
        assert!(first.windows(2).all(|w| w[1] > w[0]));
        let spacing = first[1] - first[0];
        assert!((spacing - 5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn pca_is_invariant_to_row_sign_flips_of_the_solver() {
        let data = array![[1.0, 0.0], [-1.0, 0.1], [0.5, -0.2], [-0.3, 0.4]];
        let negated = data.mapv(|v| -v);
        let a = pca_2d(&data).unwrap();
        let b = pca_2d(&negated).unwrap();
        // Negating the data negates projections but leaves the axes fixed.
        for (p, q) in a.coords.iter().zip(&b.coords) {
            assert!((p[0] + q[0]).abs() < 1e-9 && (p[1] + q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        assert!(pca_2d(&array![[1.0, 2.0]]).is_err());
    }
}
