//! Model DNA: generator latents assembled with model outputs into per-sample
//! fragments, plus cosine similarity and fingerprint persistence.

mod fingerprint;
mod generator;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use fingerprint::FINGERPRINT_FORMAT_VERSION;
pub use generator::GeneratorNet;

use crate::error::{Error, Result};
use crate::nn::LayeredModel;
use crate::tasks::LabeledDataset;

/// How a latent `z` and a model output `y` merge into a fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyMode {
    /// `o = z + y`; needs `|z| = |y|`.
    Addition,
    /// `o = [z; y]`.
    Concatenation,
}

impl AssemblyMode {
    pub fn fragment_dim(self, latent_dim: usize, output_dim: usize) -> usize {
        match self {
            AssemblyMode::Addition => latent_dim,
            AssemblyMode::Concatenation => latent_dim + output_dim,
        }
    }

    pub fn check(self, latent_dim: usize, output_dim: usize) -> Result<()> {
        if self == AssemblyMode::Addition && latent_dim != output_dim {
            return Err(Error::shape("addition assembly", format!("|y| = |z| = {latent_dim}"), output_dim));
        }
        Ok(())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AssemblyMode::Addition => "addition",
            AssemblyMode::Concatenation => "concatenation",
        }
    }
}

/// Single-sample assembly.
pub fn assemble_fragment(z: &[f64], y: &[f64], mode: AssemblyMode) -> Result<Vec<f64>> {
    mode.check(z.len(), y.len())?;
    Ok(match mode {
        AssemblyMode::Addition => z.iter().zip(y).map(|(a, b)| a + b).collect(),
        AssemblyMode::Concatenation => z.iter().chain(y).copied().collect(),
    })
}

/// Row-wise assembly of latent and output matrices.
pub fn assemble_batch(z: ArrayView2<f64>, y: ArrayView2<f64>, mode: AssemblyMode) -> Result<Array2<f64>> {
    if z.nrows() != y.nrows() {
        return Err(Error::shape("assembly rows", z.nrows(), y.nrows()));
    }
    mode.check(z.ncols(), y.ncols())?;
    Ok(match mode {
        AssemblyMode::Addition => &z + &y,
        AssemblyMode::Concatenation => concatenate(Axis(1), &[z, y]).expect("row counts checked"),
    })
}

/// Cosine similarity `u.v / (|u| |v|)`, clamped to `[-1, 1]`.
///
/// Zero-norm inputs are an error rather than a silent zero.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("cosine similarity", u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if !(dot.is_finite() && nu.is_finite() && nv.is_finite()) {
        return Err(Error::NonFinite("cosine similarity"));
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// One DNA fragment, tied to the source-data row that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DnaFragment {
    pub vector: Vec<f32>,
    pub source_input_index: usize,
    pub model_id: String,
    pub assembly_mode: AssemblyMode,
}

/// The DNA of one model: one fragment per source sample, in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDna {
    pub fragments: Vec<DnaFragment>,
    pub model_id: String,
    pub assembly_mode: AssemblyMode,
    /// Hash of the generator that produced the fragments, or `"none"`.
    pub generator_version_hash: String,
}

impl ModelDna {
    /// Wraps a fragment matrix whose row `i` came from source sample `i`.
    pub fn from_matrix(matrix: &Array2<f64>, model_id: &str, mode: AssemblyMode, generator_version_hash: &str) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DNA fragments"));
        }
        let fragments = matrix
            .outer_iter()
            .enumerate()
            .map(|(i, row)| DnaFragment {
                vector: row.iter().map(|&v| v as f32).collect(),
                source_input_index: i,
                model_id: model_id.to_string(),
                assembly_mode: mode,
            })
            .collect();
        Ok(Self {
            fragments,
            model_id: model_id.to_string(),
            assembly_mode: mode,
            generator_version_hash: generator_version_hash.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn fragment_dim(&self) -> usize {
        self.fragments.first().map_or(0, |f| f.vector.len())
    }

    /// Fragments as an `N x |o|` matrix.
    pub fn to_matrix(&self) -> Array2<f64> {
        let d = self.fragment_dim();
        Array2::from_shape_fn((self.len(), d), |(i, j)| f64::from(self.fragments[i].vector[j]))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        fingerprint::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        fingerprint::load(path)
    }
}

/// Fragment `i` is `assemble(g(x_i), model(x_i))` for every row of `data`.
pub fn generate_model_dna(
    generator: &GeneratorNet,
    model: &LayeredModel,
    model_id: &str,
    data: &LabeledDataset,
    mode: AssemblyMode,
) -> Result<ModelDna> {
    let z = generator.latents(data.features().view())?;
    let y = model.forward(data.features().view())?;
    let o = assemble_batch(z.view(), y.view(), mode)?;
    ModelDna::from_matrix(&o, model_id, mode, &generator.version_hash())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_examples() {
        assert_eq!(assemble_fragment(&[1.0, 2.0], &[3.0, 4.0], AssemblyMode::Addition).unwrap(), vec![4.0, 6.0]);
        assert_eq!(
            assemble_fragment(&[1.0, 2.0], &[3.0, 4.0], AssemblyMode::Concatenation).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert!(assemble_fragment(&[1.0, 2.0], &[3.0, 4.0, 5.0], AssemblyMode::Addition).is_err());
    }

    #[test]
    fn addition_commutes_concatenation_does_not() {
        let (a, b) = ([1.0, -2.0], [0.5, 3.0]);
        assert_eq!(
            assemble_fragment(&a, &b, AssemblyMode::Addition).unwrap(),
            assemble_fragment(&b, &a, AssemblyMode::Addition).unwrap()
        );
        assert_ne!(
            assemble_fragment(&a, &b, AssemblyMode::Concatenation).unwrap(),
            assemble_fragment(&b, &a, AssemblyMode::Concatenation).unwrap()
        );
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim(&[3.0, 4.0], &[4.0, 3.0]).unwrap() - 24.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_zero_norm_errors() {
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(matches!(cosine_sim(&[1.0], &[f64::NAN]), Err(Error::NonFinite(_))));
    }
}
