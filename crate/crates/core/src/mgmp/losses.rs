//! DNA similarity losses and the provenance BCE, each with analytic
//! gradients with respect to the fragments.
//!
//! Batches are `N x |o|` matrices; row `i` of the three matrices comes from
//! the same source sample `x_i`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Lower/upper clamp applied to classifier probabilities inside the BCE.
pub const BCE_EPS: f64 = 1e-7;

/// A loss value with its gradient for each of the three fragment batches.
#[derive(Clone, Debug)]
pub struct FragmentLoss {
    pub value: f64,
    pub d_source: Array2<f64>,
    pub d_homologous: Array2<f64>,
    pub d_non_homologous: Array2<f64>,
}

impl FragmentLoss {
    /// Multiplies the value and every gradient by `factor`.
    pub fn scale(&mut self, factor: f64) {
        if factor == 1.0 {
            return;
        }
        self.value *= factor;
        self.d_source *= factor;
        self.d_homologous *= factor;
        self.d_non_homologous *= factor;
    }
}

/// Unit-normalized rows plus the original norms.
struct Normalized {
    unit: Array2<f64>,
    norms: Array1<f64>,
}

fn normalize(x: ArrayView2<f64>, what: &'static str) -> Result<Normalized> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    let norms: Array1<f64> = x.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut unit = x.to_owned();
    for (mut row, &n) in unit.outer_iter_mut().zip(norms.iter()) {
        row /= n;
    }
    Ok(Normalized { unit, norms })
}

impl Normalized {
    fn sim(&self, i: usize, other: &Normalized, k: usize) -> f64 {
        self.unit.row(i).dot(&other.unit.row(k)).clamp(-1.0, 1.0)
    }

    /// Adds `scale * d sim(a_i, b_k) / d a_i` into `grad` row `i`.
    fn accumulate(&self, i: usize, other: &Normalized, k: usize, sim: f64, scale: f64, grad: &mut Array2<f64>) {
        let inv = scale / self.norms[i];
        let mut row = grad.row_mut(i);
        for ((g, &b), &a) in row.iter_mut().zip(other.unit.row(k)).zip(self.unit.row(i)) {
            *g += inv * (b - sim * a);
        }
    }
}

fn check_batches(source: ArrayView2<f64>, hom: ArrayView2<f64>, non: ArrayView2<f64>, tau: f64) -> Result<()> {
    if source.nrows() == 0 {
        return Err(Error::InvalidData("empty fragment batch".into()));
    }
    if hom.dim() != source.dim() || non.dim() != source.dim() {
        return Err(Error::shape(
            "fragment batches",
            format!("{:?}", source.dim()),
            format!("{:?} / {:?}", hom.dim(), non.dim()),
        ));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConfig(format!("temperature {tau} must be positive")));
    }
    Ok(())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Cross-model contrastive loss
///
/// `L_S = -sum_i log( exp(sim(s_i, t_i)/tau) / sum_k exp(sim(s_i, u_k)/tau) )`
///
/// with `s`, `t`, `u` the source, homologous, and non-homologous fragments.
/// The denominator holds only the non-homologous terms unless
/// `include_positive` is set, so the default form can go negative.
pub fn loss_similarity_grad(
    source: ArrayView2<f64>,
    hom: ArrayView2<f64>,
    non: ArrayView2<f64>,
    tau: f64,
    include_positive: bool,
) -> Result<FragmentLoss> {
    check_batches(source, hom, non, tau)?;
    let (s, t, u) = (normalize(source, "source fragments")?, normalize(hom, "homologous fragments")?, normalize(non, "non-homologous fragments")?);
    let n = source.nrows();
    let mut ds = Array2::zeros(source.raw_dim());
    let mut dt = Array2::zeros(source.raw_dim());
    let mut du = Array2::zeros(source.raw_dim());
    let mut value = 0.0;
    let mut logits = Vec::with_capacity(n + 1);
    for i in 0..n {
        let pos = s.sim(i, &t, i);
        let negs: Vec<f64> = (0..n).map(|k| s.sim(i, &u, k)).collect();
        logits.clear();
        logits.extend(negs.iter().map(|v| v / tau));
        if include_positive {
            logits.push(pos / tau);
        }
        let lse = log_sum_exp(&logits);
        value += lse - pos / tau;

        let mut d_pos = -1.0 / tau;
        if include_positive {
            d_pos += (pos / tau - lse).exp() / tau;
        }
        s.accumulate(i, &t, i, pos, d_pos, &mut ds);
        t.accumulate(i, &s, i, pos, d_pos, &mut dt);
        for (k, &neg) in negs.iter().enumerate() {
            let w = (neg / tau - lse).exp() / tau;
            s.accumulate(i, &u, k, neg, w, &mut ds);
            u.accumulate(k, &s, i, neg, w, &mut du);
        }
    }
    Ok(FragmentLoss {
        value,
        d_source: ds,
        d_homologous: dt,
        d_non_homologous: du,
    })
}

pub fn loss_similarity(source: ArrayView2<f64>, hom: ArrayView2<f64>, non: ArrayView2<f64>, tau: f64) -> Result<f64> {
    Ok(loss_similarity_grad(source, hom, non, tau, false)?.value)
}

/// Within-model loss over all ordered pairs `i != k`:
///
/// `L_I = -sum_{i != k} log( exp(sim(s_i,s_k)/tau) + exp(sim(t_i,t_k)/tau) + exp(sim(u_i,u_k)/tau) )`
///
/// A single-row batch has no pairs and yields 0.
pub fn loss_intra_grad(source: ArrayView2<f64>, hom: ArrayView2<f64>, non: ArrayView2<f64>, tau: f64) -> Result<FragmentLoss> {
    check_batches(source, hom, non, tau)?;
    let sets = [
        normalize(source, "source fragments")?,
        normalize(hom, "homologous fragments")?,
        normalize(non, "non-homologous fragments")?,
    ];
    let n = source.nrows();
    let mut grads = [
        Array2::zeros(source.raw_dim()),
        Array2::zeros(source.raw_dim()),
        Array2::zeros(source.raw_dim()),
    ];
    let mut value = 0.0;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let sims = [sets[0].sim(i, &sets[0], k), sets[1].sim(i, &sets[1], k), sets[2].sim(i, &sets[2], k)];
            let scaled = [sims[0] / tau, sims[1] / tau, sims[2] / tau];
            let lse = log_sum_exp(&scaled);
            value -= lse;
            for m in 0..3 {
                let w = -(scaled[m] - lse).exp() / tau;
                sets[m].accumulate(i, &sets[m], k, sims[m], w, &mut grads[m]);
                sets[m].accumulate(k, &sets[m], i, sims[m], w, &mut grads[m]);
            }
        }
    }
    let [ds, dt, du] = grads;
    Ok(FragmentLoss {
        value,
        d_source: ds,
        d_homologous: dt,
        d_non_homologous: du,
    })
}

pub fn loss_intra(source: ArrayView2<f64>, hom: ArrayView2<f64>, non: ArrayView2<f64>, tau: f64) -> Result<f64> {
    Ok(loss_intra_grad(source, hom, non, tau)?.value)
}

/// l2 norm of the generator parameters.
pub fn l2_norm(params: &[f64]) -> f64 {
    params.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `L = L_S + L_I + lambda * ||w_g||_2`.
pub fn loss_total(l_s: f64, l_i: f64, generator_params: &[f64], lambda: f64) -> f64 {
    l_s + l_i + lambda * l2_norm(generator_params)
}

/// Gradient of `lambda * ||w||_2`; zero at the origin.
pub fn l2_norm_grad(params: &[f64], lambda: f64) -> Vec<f64> {
    let norm = l2_norm(params);
    if norm == 0.0 {
        return vec![0.0; params.len()];
    }
    params.iter().map(|v| lambda * v / norm).collect()
}

fn check_bce(labels: &[f64], probs: &[f64]) -> Result<()> {
    if labels.len() != probs.len() {
        return Err(Error::shape("bce inputs", labels.len(), probs.len()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidData("empty bce batch".into()));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("bce probabilities"));
    }
    Ok(())
}

/// Mean binary cross-entropy with probabilities clamped to `[eps, 1 - eps]`.
pub fn loss_bce(labels: &[f64], probs: &[f64]) -> Result<f64> {
    check_bce(labels, probs)?;
    let total: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&h, &p)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(h * p.ln() + (1.0 - h) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Derivative of [`loss_bce`] with respect to each probability (zero where
/// the clamp is active).
pub fn loss_bce_grad(labels: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    check_bce(labels, probs)?;
    let m = labels.len() as f64;
    Ok(labels
        .iter()
        .zip(probs)
        .map(|(&h, &p)| {
            if p < BCE_EPS || p > 1.0 - BCE_EPS {
                0.0
            } else {
                (-h / p + (1.0 - h) / (1.0 - p)) / m
            }
        })
        .collect())
}
