use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchDescriptor, LayerSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Location of one parameterized layer's weights and bias in the flat buffer.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ParamSlot {
    pub layer: usize,
    pub offset: usize,
    pub weights: usize,
    pub bias: usize,
}

impl ParamSlot {
    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.weights + self.bias
    }
}

/// A feed-forward network whose parameters live in one flat `f64` buffer.
///
/// Flat order: parameterized layers in stack order; for each, the weight
/// tensor row-major followed by the bias vector. Freshly built and trained
/// models hold only `f32`-representable values so checkpoints round-trip
/// bit-exactly.
#[derive(Clone, Debug)]
pub struct LayeredModel {
    arch: ArchDescriptor,
    params: Vec<f64>,
    slots: Vec<ParamSlot>,
    mode: Mode,
}

/// Activations recorded by [`LayeredModel::forward_tape`] for backpropagation.
#[derive(Debug)]
pub struct Tape {
    inputs: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Pre-head activations (logits) when the final layer is softmax/sigmoid.
    pub fn last_input(&self) -> &Array2<f64> {
        self.inputs.last().expect("tape of a non-empty network")
    }
}

fn slots_for(arch: &ArchDescriptor) -> Vec<ParamSlot> {
    let mut offset = 0;
    let mut slots = Vec::new();
    for (layer, spec) in arch.layers.iter().enumerate() {
        if let Some((weights, bias)) = spec.param_counts() {
            slots.push(ParamSlot {
                layer,
                offset,
                weights,
                bias,
            });
            offset += weights + bias;
        }
    }
    slots
}

pub(crate) fn fan_in(spec: &LayerSpec) -> usize {
    match *spec {
        LayerSpec::Dense { inputs, .. } => inputs,
        LayerSpec::Conv1d { in_channels, kernel, .. } => in_channels * kernel,
        _ => 0,
    }
}

/// He-uniform weights and zero biases, sampled in `f32`.
pub(crate) fn init_slot(params: &mut [f64], slot: &ParamSlot, spec: &LayerSpec, rng: &mut impl Rng) {
    let limit = (6.0 / fan_in(spec) as f32).sqrt();
    for w in &mut params[slot.offset..slot.offset + slot.weights] {
        *w = f64::from(rng.random_range(-limit..limit));
    }
    for b in &mut params[slot.offset + slot.weights..slot.offset + slot.weights + slot.bias] {
        *b = 0.0;
    }
}

impl LayeredModel {
    /// Builds a model with seeded random parameters, in train mode.
    pub fn build(arch: ArchDescriptor, seed: u64) -> Result<Self> {
        arch.validate()?;
        let slots = slots_for(&arch);
        let mut params = vec![0.0; arch.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in &slots {
            init_slot(&mut params, slot, &arch.layers[slot.layer], &mut rng);
        }
        Ok(Self {
            arch,
            params,
            slots,
            mode: Mode::Train,
        })
    }

    /// Builds a model from an explicit flat parameter vector.
    pub fn from_params(arch: ArchDescriptor, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::shape("parameter vector", arch.param_count(), params.len()));
        }
        let slots = slots_for(&arch);
        Ok(Self {
            arch,
            params,
            slots,
            mode: Mode::Eval,
        })
    }

    pub fn arch(&self) -> &ArchDescriptor {
        &self.arch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn eval(mut self) -> Self {
        self.mode = Mode::Eval;
        self
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        self.params.clone()
    }

    /// Inverse of [`flatten_params`](Self::flatten_params).
    pub fn unflatten_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::shape("unflatten", self.params.len(), flat.len()));
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = f64::from(*p as f32);
        }
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    /// Named tensors in flat order: `(name, shape, values)`.
    pub fn named_params(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::with_capacity(self.slots.len() * 2);
        for slot in &self.slots {
            let shape = match self.arch.layers[slot.layer] {
                LayerSpec::Dense { inputs, outputs } => vec![outputs, inputs],
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => vec![out_channels, in_channels, kernel],
                _ => unreachable!("slots only cover parameterized layers"),
            };
            let w_end = slot.offset + slot.weights;
            out.push((format!("layers.{}.weight", slot.layer), shape, &self.params[slot.offset..w_end]));
            out.push((
                format!("layers.{}.bias", slot.layer),
                vec![slot.bias],
                &self.params[w_end..w_end + slot.bias],
            ));
        }
        out
    }

    /// Index range in the flat buffer of the `i`-th parameterized layer.
    pub fn layer_param_range(&self, i: usize) -> Option<std::ops::Range<usize>> {
        self.slots.get(i).map(ParamSlot::range)
    }

    /// Flat offset where the final parameterized layer begins.
    pub(crate) fn head_offset(&self) -> usize {
        self.slots.last().expect("validated arch has a parameterized layer").offset
    }

    /// Re-draws the parameters of the final parameterized layer.
    pub fn reinit_last_layer(&mut self, seed: u64) {
        let slot = *self.slots.last().expect("validated arch has a parameterized layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_slot(&mut self.params, &slot, &self.arch.layers[slot.layer], &mut rng);
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(
                "forward input",
                format!("B x {}", self.input_dim()),
                format!("{} x {}", x.nrows(), x.ncols()),
            ));
        }
        Ok(())
    }

    /// Inference pass: dropout disabled, pure in `(params, x)`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for (i, spec) in self.arch.layers.iter().enumerate() {
            h = self.apply_layer(i, spec, h.view(), None).0;
        }
        Ok(h)
    }

    /// Inference pass that stops before a final softmax/sigmoid layer.
    pub fn forward_logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let layers = &self.arch.layers;
        let n = match layers.last() {
            Some(LayerSpec::Softmax | LayerSpec::Sigmoid) => layers.len() - 1,
            _ => layers.len(),
        };
        let mut h = x.to_owned();
        for (i, spec) in layers[..n].iter().enumerate() {
            h = self.apply_layer(i, spec, h.view(), None).0;
        }
        Ok(h)
    }

    /// Forward pass recording activations. Dropout is sampled from `rng` only
    /// when the model is in train mode and an rng is supplied.
    pub fn forward_tape(&self, x: ArrayView2<f64>, mut rng: Option<&mut (dyn RngCore + '_)>) -> Result<Tape> {
        self.check_input(&x)?;
        let n = self.arch.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        let mut h = x.to_owned();
        for (i, spec) in self.arch.layers.iter().enumerate() {
            let rng = if self.mode == Mode::Train { rng.as_deref_mut() } else { None };
            let (next, mask) = self.apply_layer(i, spec, h.view(), rng);
            inputs.push(h);
            masks.push(mask);
            h = next;
        }
        Ok(Tape {
            inputs,
            masks,
            output: h,
        })
    }

    fn slot_of(&self, layer: usize) -> &ParamSlot {
        self.slots
            .iter()
            .find(|s| s.layer == layer)
            .expect("parameterized layer has a slot")
    }

    fn apply_layer(
        &self,
        layer: usize,
        spec: &LayerSpec,
        x: ArrayView2<f64>,
        rng: Option<&mut (dyn RngCore + '_)>,
    ) -> (Array2<f64>, Option<Array2<f64>>) {
        match *spec {
            LayerSpec::Dense { inputs, outputs } => {
                let slot = self.slot_of(layer);
                let w = ArrayView2::from_shape((outputs, inputs), &self.params[slot.offset..slot.offset + slot.weights])
                    .expect("slot sized from arch");
                let b = &self.params[slot.offset + slot.weights..slot.offset + slot.weights + slot.bias];
                let mut out = x.dot(&w.t());
                out += &ArrayView2::from_shape((1, outputs), b).expect("bias row");
                (out, None)
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                length,
            } => {
                let slot = self.slot_of(layer);
                let w = &self.params[slot.offset..slot.offset + slot.weights];
                let b = &self.params[slot.offset + slot.weights..slot.offset + slot.weights + slot.bias];
                let out_len = length - kernel + 1;
                let mut out = Array2::zeros((x.nrows(), out_channels * out_len));
                for (row, mut orow) in x.outer_iter().zip(out.outer_iter_mut()) {
                    for o in 0..out_channels {
                        for t in 0..out_len {
                            let mut acc = b[o];
                            for c in 0..in_channels {
                                for j in 0..kernel {
                                    acc += w[(o * in_channels + c) * kernel + j] * row[c * length + t + j];
                                }
                            }
                            orow[o * out_len + t] = acc;
                        }
                    }
                }
                (out, None)
            }
            LayerSpec::Relu => (x.mapv(|v| v.max(0.0)), None),
            LayerSpec::Dropout { rate } => match rng {
                Some(rng) if rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
                        if rng.random::<f64>() < rate {
                            0.0
                        } else {
                            1.0 / keep
                        }
                    });
                    (&x * &mask, Some(mask))
                }
                _ => (x.to_owned(), None),
            },
            LayerSpec::Softmax => {
                let mut out = x.to_owned();
                for mut row in out.outer_iter_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row /= sum;
                }
                (out, None)
            }
            LayerSpec::Sigmoid => (x.mapv(sigmoid), None),
        }
    }

    /// Backpropagates `grad_output` (gradient w.r.t. the network output).
    /// Returns the flat parameter gradient and the gradient w.r.t. the input.
    pub fn backward(&self, tape: &Tape, grad_output: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        self.backward_range(tape, grad_output.clone(), self.arch.layers.len())
    }

    /// Like [`backward`](Self::backward) but starts from the gradient w.r.t.
    /// the input of the final (head) layer, skipping the head itself.
    pub fn backward_from_logits(&self, tape: &Tape, grad_logits: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        let n = self.arch.layers.len();
        let skip = usize::from(matches!(self.arch.layers.last(), Some(LayerSpec::Softmax | LayerSpec::Sigmoid)));
        self.backward_range(tape, grad_logits.clone(), n - skip)
    }

    fn backward_range(&self, tape: &Tape, mut grad: Array2<f64>, upto: usize) -> (Vec<f64>, Array2<f64>) {
        let mut grads = vec![0.0; self.params.len()];
        for i in (0..upto).rev() {
            let x = &tape.inputs[i];
            grad = match self.arch.layers[i] {
                LayerSpec::Dense { inputs, outputs } => {
                    let slot = self.slot_of(i);
                    let w = ArrayView2::from_shape((outputs, inputs), &self.params[slot.offset..slot.offset + slot.weights])
                        .expect("slot sized from arch");
                    let dw = grad.t().dot(x);
                    let db: Array1<f64> = grad.sum_axis(Axis(0));
                    let (gw, gb) = grads[slot.offset..slot.offset + slot.weights + slot.bias].split_at_mut(slot.weights);
                    for (g, v) in gw.iter_mut().zip(dw.iter()) {
                        *g += v;
                    }
                    for (g, v) in gb.iter_mut().zip(db.iter()) {
                        *g += v;
                    }
                    grad.dot(&w)
                }
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    length,
                } => {
                    let slot = *self.slot_of(i);
                    let w = &self.params[slot.offset..slot.offset + slot.weights];
                    let out_len = length - kernel + 1;
                    let mut dx = Array2::zeros(x.raw_dim());
                    for ((row, grow), mut dxrow) in x.outer_iter().zip(grad.outer_iter()).zip(dx.outer_iter_mut()) {
                        for o in 0..out_channels {
                            for t in 0..out_len {
                                let g = grow[o * out_len + t];
                                grads[slot.offset + slot.weights + o] += g;
                                for c in 0..in_channels {
                                    for j in 0..kernel {
                                        let wi = (o * in_channels + c) * kernel + j;
                                        grads[slot.offset + wi] += g * row[c * length + t + j];
                                        dxrow[c * length + t + j] += g * w[wi];
                                    }
                                }
                            }
                        }
                    }
                    dx
                }
                LayerSpec::Relu => {
                    let mut g = grad;
                    g.zip_mut_with(x, |g, &v| {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    g
                }
                LayerSpec::Dropout { .. } => match &tape.masks[i] {
                    Some(mask) => grad * mask,
                    None => grad,
                },
                LayerSpec::Softmax => {
                    let p = if i + 1 < tape.inputs.len() { &tape.inputs[i + 1] } else { &tape.output };
                    let mut g = grad;
                    for (mut grow, prow) in g.outer_iter_mut().zip(p.outer_iter()) {
                        let dot: f64 = grow.iter().zip(prow.iter()).map(|(a, b)| a * b).sum();
                        grow.zip_mut_with(&prow, |gv, &pv| *gv = pv * (*gv - dot));
                    }
                    g
                }
                LayerSpec::Sigmoid => {
                    let s = if i + 1 < tape.inputs.len() { &tape.inputs[i + 1] } else { &tape.output };
                    let mut g = grad;
                    g.zip_mut_with(s, |gv, &sv| *gv *= sv * (1.0 - sv));
                    g
                }
            };
        }
        (grads, grad)
    }

    /// Argmax class per row.
    pub fn predict_classes(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let probs = self.forward(x)?;
        Ok(probs.outer_iter().map(|row| argmax(row.as_slice().expect("contiguous row"))).collect())
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// New model whose last `k` parameterized layers carry `source`'s parameters
/// and whose earlier layers carry `target`'s. Neither input is modified.
pub fn replace_last_layers(target: &LayeredModel, source: &LayeredModel, k: usize) -> Result<LayeredModel> {
    if target.arch != source.arch {
        return Err(Error::ArchMismatch("layer replacement needs identical architectures".into()));
    }
    let total = target.slots.len();
    if k > total {
        return Err(Error::InvalidConfig(format!(
            "cannot replace {k} layers of a network with {total} parameterized layers"
        )));
    }
    let mut out = target.clone();
    for slot in &target.slots[total - k..] {
        let r = slot.range();
        out.params[r.clone()].copy_from_slice(&source.params[r]);
    }
    Ok(out)
}

/// Gathers the rows listed in `idx`.
pub(crate) fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (dst, &i) in idx.iter().enumerate() {
        out.slice_mut(s![dst, ..]).assign(&x.row(i));
    }
    out
}
