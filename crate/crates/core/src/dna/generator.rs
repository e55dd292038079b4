use ndarray::{Array2, ArrayView2};

use crate::container::hash_bytes;
use crate::error::{Error, Result};
use crate::nn::{ArchDescriptor, LayerSpec, LayeredModel};

/// Feed-forward network mapping an input sample to a latent vector `z`.
#[derive(Clone, Debug)]
pub struct GeneratorNet {
    net: LayeredModel,
}

impl GeneratorNet {
    /// MLP with ReLU hidden layers and a linear `latent_dim` output.
    pub fn mlp(input_dim: usize, hidden: &[usize], latent_dim: usize, dropout: Option<f64>, seed: u64) -> Result<Self> {
        let arch = ArchDescriptor::mlp_regressor(input_dim, hidden, latent_dim, dropout)?;
        Self::from_model(LayeredModel::build(arch, seed)?)
    }

    pub fn from_model(net: LayeredModel) -> Result<Self> {
        if matches!(net.arch().layers.last(), Some(LayerSpec::Softmax | LayerSpec::Sigmoid)) {
            return Err(Error::InvalidArch("generator output must be linear".into()));
        }
        Ok(Self { net })
    }

    pub fn latent_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn model(&self) -> &LayeredModel {
        &self.net
    }

    pub fn model_mut(&mut self) -> &mut LayeredModel {
        &mut self.net
    }

    pub fn into_model(self) -> LayeredModel {
        self.net
    }

    /// `z = g(x)` for one sample.
    pub fn generate_latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("single row");
        Ok(self.net.forward(row)?.into_raw_vec_and_offset().0)
    }

    /// Latents for every row of `x`.
    pub fn latents(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.forward(x)
    }

    /// SHA-256 over the architecture and the `f32` parameters.
    pub fn version_hash(&self) -> String {
        let mut bytes = serde_json::to_vec(self.net.arch()).expect("arch serializes");
        for p in self.net.params() {
            bytes.extend_from_slice(&(*p as f32).to_le_bytes());
        }
        hash_bytes(&bytes)
    }
}
