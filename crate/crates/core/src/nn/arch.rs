use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dropout rate used by the convenience builders when dropout is requested.
pub const DEFAULT_DROPOUT: f64 = 0.1;

/// One layer of a feed-forward stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Affine map `y = W x + b`, `W` stored row-major as `(outputs, inputs)`.
    Dense { inputs: usize, outputs: usize },
    /// Valid 1-D convolution, stride 1. Input is read as `(in_channels, length)`
    /// row-major, output is `(out_channels, length - kernel + 1)`.
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        length: usize,
    },
    Relu,
    Dropout { rate: f64 },
    Softmax,
    Sigmoid,
}

impl LayerSpec {
    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv1d { .. })
    }

    /// (weight count, bias count) for parameterized layers.
    pub fn param_counts(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some((inputs * outputs, outputs)),
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((out_channels * in_channels * kernel, out_channels)),
            _ => None,
        }
    }

    fn is_head(&self) -> bool {
        matches!(self, LayerSpec::Softmax | LayerSpec::Sigmoid)
    }
}

/// Layer stack plus input shape. The output width is the class count for
/// classifiers and the latent size for generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchDescriptor {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl ArchDescriptor {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let arch = Self { input_shape, layers };
        arch.validate()?;
        Ok(arch)
    }

    /// `dense -> relu [-> dropout]` for every hidden width, then `dense -> head`.
    fn mlp(input_dim: usize, hidden: &[usize], outputs: usize, dropout: Option<f64>, head: Option<LayerSpec>) -> Result<Self> {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for &h in hidden {
            layers.push(LayerSpec::Dense { inputs: width, outputs: h });
            layers.push(LayerSpec::Relu);
            if let Some(rate) = dropout {
                layers.push(LayerSpec::Dropout { rate });
            }
            width = h;
        }
        layers.push(LayerSpec::Dense { inputs: width, outputs });
        layers.extend(head);
        Self::new(vec![input_dim], layers)
    }

    /// Softmax classifier used for source and target models.
    pub fn mlp_classifier(input_dim: usize, hidden: &[usize], num_classes: usize) -> Result<Self> {
        let arch = Self::mlp(input_dim, hidden, num_classes, None, Some(LayerSpec::Softmax))?;
        arch.validate_classifier()?;
        Ok(arch)
    }

    /// Linear-output network, as used for the DNA generator.
    pub fn mlp_regressor(input_dim: usize, hidden: &[usize], outputs: usize, dropout: Option<f64>) -> Result<Self> {
        Self::mlp(input_dim, hidden, outputs, dropout, None)
    }

    /// Single-probability network with a sigmoid head.
    pub fn mlp_binary(input_dim: usize, hidden: &[usize], dropout: Option<f64>) -> Result<Self> {
        Self::mlp(input_dim, hidden, 1, dropout, Some(LayerSpec::Sigmoid))
    }

    pub fn input_dim(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Width of the final layer output.
    pub fn output_dim(&self) -> usize {
        self.widths().last().copied().unwrap_or(0)
    }

    /// Output class count of a softmax classifier; same as `output_dim`.
    pub fn num_classes(&self) -> usize {
        self.output_dim()
    }

    pub fn num_parameterized(&self) -> usize {
        self.layers.iter().filter(|l| l.is_parameterized()).count()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(LayerSpec::param_counts)
            .map(|(w, b)| w + b)
            .sum()
    }

    pub fn ends_with_softmax(&self) -> bool {
        matches!(self.layers.last(), Some(LayerSpec::Softmax))
    }

    /// Input width of every layer followed by the final output width.
    pub(crate) fn widths(&self) -> Vec<usize> {
        let mut widths = vec![self.input_dim()];
        let mut w = self.input_dim();
        for layer in &self.layers {
            w = match *layer {
                LayerSpec::Dense { outputs, .. } => outputs,
                LayerSpec::Conv1d {
                    out_channels,
                    kernel,
                    length,
                    ..
                } => out_channels * (length + 1).saturating_sub(kernel),
                _ => w,
            };
            widths.push(w);
        }
        widths
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.is_empty() || self.input_shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArch(format!("input shape {:?} must be non-empty and positive", self.input_shape)));
        }
        if self.num_parameterized() == 0 {
            return Err(Error::InvalidArch("architecture has no dense or conv layer".into()));
        }
        let mut width = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    if inputs != width {
                        return Err(Error::InvalidArch(format!(
                            "layer {i}: dense expects {inputs} inputs but previous layer produces {width}"
                        )));
                    }
                    if outputs == 0 {
                        return Err(Error::InvalidArch(format!("layer {i}: dense with zero outputs")));
                    }
                    width = outputs;
                }
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    length,
                } => {
                    if in_channels * length != width {
                        return Err(Error::InvalidArch(format!(
                            "layer {i}: conv1d expects {in_channels}x{length} = {} inputs but previous layer produces {width}",
                            in_channels * length
                        )));
                    }
                    if kernel == 0 || kernel > length || out_channels == 0 {
                        return Err(Error::InvalidArch(format!(
                            "layer {i}: conv1d kernel {kernel} invalid for length {length} with {out_channels} output channels"
                        )));
                    }
                    width = out_channels * (length - kernel + 1);
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::InvalidArch(format!("layer {i}: dropout rate {rate} outside [0, 1)")));
                    }
                }
                LayerSpec::Softmax | LayerSpec::Sigmoid => {
                    if i + 1 != self.layers.len() {
                        return Err(Error::InvalidArch(format!("layer {i}: {layer:?} must be the final layer")));
                    }
                }
                LayerSpec::Relu => {}
            }
        }
        if self.layers.iter().any(LayerSpec::is_head) && self.layers.last().is_some_and(|l| !l.is_head()) {
            return Err(Error::InvalidArch("normalization layer must be last".into()));
        }
        Ok(())
    }

    /// Classifier contract: dimensionally valid and ends in softmax.
    pub fn validate_classifier(&self) -> Result<()> {
        self.validate()?;
        if !self.ends_with_softmax() {
            return Err(Error::InvalidArch("classifier must end with a softmax layer".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_dense_chain_is_rejected() {
        let err = ArchDescriptor::new(
            vec![4],
            vec![
                LayerSpec::Dense { inputs: 4, outputs: 3 },
                LayerSpec::Dense { inputs: 5, outputs: 2 },
                LayerSpec::Softmax,
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("expects 5 inputs"), "{err}");
    }

    #[test]
    fn softmax_must_be_last() {
        let err = ArchDescriptor::new(
            vec![2],
            vec![LayerSpec::Dense { inputs: 2, outputs: 2 }, LayerSpec::Softmax, LayerSpec::Relu],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArch(_)));
    }

    #[test]
    fn conv_widths() {
        let arch = ArchDescriptor::new(
            vec![2, 6],
            vec![
                LayerSpec::Conv1d {
                    in_channels: 2,
                    out_channels: 3,
                    kernel: 3,
                    length: 6,
                },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 12, outputs: 4 },
                LayerSpec::Softmax,
            ],
        )
        .unwrap();
        assert_eq!(arch.output_dim(), 4);
        assert_eq!(arch.param_count(), 3 * 2 * 3 + 3 + 12 * 4 + 4);
        assert_eq!(arch.num_parameterized(), 2);
    }

    #[test]
    fn classifier_builder_counts() {
        let arch = ArchDescriptor::mlp_classifier(8, &[32, 32], 4).unwrap();
        assert_eq!(arch.param_count(), 8 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4);
        assert_eq!(arch.num_parameterized(), 3);
        assert!(ArchDescriptor::mlp_regressor(8, &[16], 4, None).unwrap().validate_classifier().is_err());
    }
}
