use std::collections::BTreeMap;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::MgmpConfig;
use super::losses::{l2_norm, l2_norm_grad, loss_bce, loss_bce_grad, loss_intra_grad, loss_similarity_grad};
use super::model::{model_outputs, pair_rows, EpochLog, MgmpModel};
use crate::dna::{assemble_batch, AssemblyMode, GeneratorNet};
use crate::error::{Error, Result};
use crate::nn::{rows, Adam, ArchDescriptor, Checkpoint, LayeredModel, Mode};
use crate::seed::derive_seed;
use crate::tasks::{LabeledDataset, SplitRole, TrainedPool};

/// Inputs and frozen model outputs for one mini-batch.
#[derive(Clone, Debug)]
pub struct TrainingBatch {
    pub x: Array2<f64>,
    pub y_source: Array2<f64>,
    pub y_homologous: Array2<f64>,
    pub y_non_homologous: Array2<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveParts {
    pub total: f64,
    pub similarity: f64,
    pub intra: f64,
    pub regularization: f64,
    pub bce: f64,
}

/// Objective value with flat gradients for the generator (empty when there is
/// none) and the classifier.
#[derive(Clone, Debug)]
pub struct ObjectiveGrad {
    pub parts: ObjectiveParts,
    pub generator: Vec<f64>,
    pub classifier: Vec<f64>,
}

/// `w_sim * (L_S + L_I + lambda ||w_g||) + w_bce * L_BCE` on one batch.
///
/// The classifier sees `[o_s; o_t]` rows labelled 1 followed by `[o_s; ō_t]`
/// rows labelled 0. Dropout masks come from `dropout_seed`; the same seed
/// reproduces the same masks.
pub fn mgmp_objective(
    generator: Option<&LayeredModel>,
    classifier: &LayeredModel,
    batch: &TrainingBatch,
    cfg: &MgmpConfig,
    dropout_seed: Option<u64>,
) -> Result<ObjectiveGrad> {
    let n = batch.x.nrows();
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);

    let (gen_tape, frags) = match generator {
        Some(g) => {
            let tape = g.forward_tape(batch.x.view(), rng.as_mut().map(|r| r as &mut dyn RngCore))?;
            let z = tape.output();
            let mode = cfg.assembly_mode;
            let frags = [
                assemble_batch(z.view(), batch.y_source.view(), mode)?,
                assemble_batch(z.view(), batch.y_homologous.view(), mode)?,
                assemble_batch(z.view(), batch.y_non_homologous.view(), mode)?,
            ];
            (Some(tape), frags)
        }
        None => (
            None,
            [batch.y_source.clone(), batch.y_homologous.clone(), batch.y_non_homologous.clone()],
        ),
    };
    let [os, ot, obt] = &frags;
    let dim = os.ncols();

    let mut sim = loss_similarity_grad(os.view(), ot.view(), obt.view(), cfg.tau, cfg.include_positive_in_denominator)?;
    let mut intra = loss_intra_grad(os.view(), ot.view(), obt.view(), cfg.tau)?;
    let (sim_scale, intra_scale) = cfg.loss_reduction.scales(n);
    sim.scale(sim_scale);
    intra.scale(intra_scale);
    let reg = generator.map_or(0.0, |g| cfg.lambda_reg * l2_norm(g.params()));

    let cls_input = ndarray::concatenate(Axis(0), &[pair_rows(os.view(), ot.view()).view(), pair_rows(os.view(), obt.view()).view()])
        .expect("equal widths");
    let labels: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
    let cls_tape = classifier.forward_tape(cls_input.view(), rng.as_mut().map(|r| r as &mut dyn RngCore))?;
    let probs = cls_tape.output().column(0).to_vec();
    let bce = loss_bce(&labels, &probs)?;
    let d_probs = loss_bce_grad(&labels, &probs)?;
    let grad_out = Array2::from_shape_vec((2 * n, 1), d_probs).expect("column");
    let (mut cls_grads, d_input) = classifier.backward(&cls_tape, &grad_out);

    let (ws, wb) = (cfg.loss_weights.sim, cfg.loss_weights.bce);
    for g in &mut cls_grads {
        *g *= wb;
    }
    let parts = ObjectiveParts {
        total: ws * (sim.value + intra.value + reg) + wb * bce,
        similarity: sim.value,
        intra: intra.value,
        regularization: reg,
        bce,
    };

    let gen_grads = match (generator, gen_tape) {
        (Some(g), Some(tape)) => {
            let pos = d_input.slice(s![..n, ..]);
            let neg = d_input.slice(s![n.., ..]);
            let d_os = ws * (&sim.d_source + &intra.d_source) + wb * (&pos.slice(s![.., ..dim]) + &neg.slice(s![.., ..dim]));
            let d_ot = ws * (&sim.d_homologous + &intra.d_homologous) + wb * &pos.slice(s![.., dim..]);
            let d_obt = ws * (&sim.d_non_homologous + &intra.d_non_homologous) + wb * &neg.slice(s![.., dim..]);
            let d_frag = d_os + d_ot + d_obt;
            let d_z = match cfg.assembly_mode {
                AssemblyMode::Addition => d_frag,
                AssemblyMode::Concatenation => d_frag.slice(s![.., ..g.output_dim()]).to_owned(),
            };
            let (mut grads, _) = g.backward(&tape, &d_z);
            for (gv, r) in grads.iter_mut().zip(l2_norm_grad(g.params(), cfg.lambda_reg)) {
                *gv += ws * r;
            }
            grads
        }
        _ => Vec::new(),
    };

    Ok(ObjectiveGrad {
        parts,
        generator: gen_grads,
        classifier: cls_grads,
    })
}

fn optional_rate(rate: f64) -> Option<f64> {
    (rate > 0.0).then_some(rate)
}

/// Freshly initialized generator and classifier for a source with the given
/// input width and class count.
pub fn init_networks(input_dim: usize, classes: usize, cfg: &MgmpConfig) -> Result<(Option<GeneratorNet>, LayeredModel)> {
    cfg.validate()?;
    let generator = if cfg.generator.enabled {
        let latent = cfg.latent_dim(classes);
        cfg.assembly_mode.check(latent, classes)?;
        Some(GeneratorNet::mlp(
            input_dim,
            &cfg.generator.hidden,
            latent,
            optional_rate(cfg.generator.dropout),
            derive_seed(cfg.seed, "generator"),
        )?)
    } else {
        None
    };
    let arch = ArchDescriptor::mlp_binary(2 * cfg.fragment_dim(classes), &cfg.classifier_hidden, optional_rate(cfg.classifier_dropout))?;
    let classifier = LayeredModel::build(arch, derive_seed(cfg.seed, "classifier"))?;
    Ok((generator, classifier))
}

/// Jointly trains the generator and the provenance classifier against the
/// pool-role models. Source and pool models are only read.
pub fn train_mgmp(source: &Checkpoint, pool: &TrainedPool, data: &LabeledDataset, cfg: &MgmpConfig) -> Result<MgmpModel> {
    cfg.validate()?;
    pool.validate()?;
    if pool.pool.source_checkpoint_id != source.id {
        return Err(Error::InvalidData(format!(
            "pool was built from {} but the source is {}",
            pool.pool.source_checkpoint_id, source.id
        )));
    }
    if data.len() < 2 {
        return Err(Error::InvalidData("need at least two source samples".into()));
    }
    let x = data.features();
    let classes = source.arch().output_dim();
    let y_source = model_outputs(&source.model, x.view(), cfg.output_kind)?;
    let mut y_pool = BTreeMap::new();
    for e in pool.pool.role_entries(SplitRole::Pool) {
        let m = pool.model(&e.checkpoint_id)?;
        if m.output_dim() != classes {
            return Err(Error::ArchMismatch(format!(
                "pool model {} outputs {} values, source outputs {classes}",
                e.checkpoint_id,
                m.output_dim()
            )));
        }
        y_pool.insert(e.checkpoint_id.as_str(), model_outputs(m, x.view(), cfg.output_kind)?);
    }

    let (mut generator, mut classifier) = init_networks(data.dim(), classes, cfg)?;
    if let Some(g) = generator.as_mut() {
        g.model_mut().set_mode(Mode::Train);
    }
    classifier.set_mode(Mode::Train);
    let new_adam = |len| Adam::new(len, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps, 0.0);
    let mut gen_opt = generator.as_ref().map(|g| new_adam(g.model().param_count()));
    let mut cls_opt = new_adam(classifier.param_count());

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "mgmp-train"));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut acc = ObjectiveParts::default();
        let mut batches = 0;
        for idx in order.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            let (hom, non) = pool.pool.sample_pair(&mut rng)?;
            let batch = TrainingBatch {
                x: rows(x, idx),
                y_source: rows(&y_source, idx),
                y_homologous: rows(&y_pool[hom.checkpoint_id.as_str()], idx),
                y_non_homologous: rows(&y_pool[non.checkpoint_id.as_str()], idx),
            };
            let dropout_seed = rng.next_u64();
            let out = mgmp_objective(generator.as_ref().map(GeneratorNet::model), &classifier, &batch, cfg, Some(dropout_seed))?;
            if !out.parts.total.is_finite() {
                return Err(Error::NonFinite("mgmp objective"));
            }
            if let (Some(g), Some(opt)) = (generator.as_mut(), gen_opt.as_mut()) {
                opt.step(g.model_mut().params_mut(), &out.generator);
            }
            cls_opt.step(classifier.params_mut(), &out.classifier);
            acc.total += out.parts.total;
            acc.similarity += out.parts.similarity;
            acc.intra += out.parts.intra;
            acc.regularization += out.parts.regularization;
            acc.bce += out.parts.bce;
            batches += 1;
        }
        let b = batches.max(1) as f64;
        log.push(EpochLog {
            epoch,
            total: acc.total / b,
            similarity: acc.similarity / b,
            intra: acc.intra / b,
            regularization: acc.regularization / b,
            bce: acc.bce / b,
            batches,
        });
    }

    let generator = generator.map(|g| {
        let mut m = g.into_model();
        m.round_to_f32();
        GeneratorNet::from_model(m.eval()).expect("generator arch unchanged")
    });
    classifier.round_to_f32();
    Ok(MgmpModel {
        generator,
        classifier: classifier.eval(),
        config: cfg.clone(),
        training_log: log,
        source_checkpoint_id: source.id.clone(),
    })
}
