use approx::assert_abs_diff_eq;
use modeldna::nn::{
    accuracy, cross_entropy_grad, replace_last_layers, train, ArchDescriptor, Checkpoint, LayerSpec, LayeredModel, Lineage,
    Metrics, TrainConfig, CHECKPOINT_FORMAT_VERSION,
};
use modeldna::tasks::{make_synthetic_blobs, LabeledDataset};
use modeldna::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;

/// Dense + ReLU + Dense + softmax evaluated with plain loops.
fn naive_mlp(params: &[f64], x: &[f64], dims: (usize, usize, usize)) -> Vec<f64> {
    let (d, h, c) = dims;
    let (w1, rest) = params.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(c * h);
    let hidden: Vec<f64> = (0..h)
        .map(|j| (b1[j] + (0..d).map(|i| w1[j * d + i] * x[i]).sum::<f64>()).max(0.0))
        .collect();
    let logits: Vec<f64> = (0..c)
        .map(|k| b2[k] + (0..h).map(|j| w2[k * h + j] * hidden[j]).sum::<f64>())
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    logits.iter().map(|l| (l - max).exp() / z).collect()
}

#[test]
fn forward_matches_loop_oracle() {
    let arch = ArchDescriptor::mlp_classifier(3, &[5], 4).unwrap();
    let model = LayeredModel::build(arch, 11).unwrap().eval();
    let x = array![[0.3, -1.2, 2.0], [0.0, 0.0, 0.0], [-0.7, 0.4, 0.1]];
    let out = model.forward(x.view()).unwrap();
    for (i, row) in x.outer_iter().enumerate() {
        let want = naive_mlp(model.params(), &row.to_vec(), (3, 5, 4));
        for (a, b) in out.row(i).iter().zip(&want) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}

#[test]
fn conv_forward_matches_loop_oracle() {
    // One input channel of length 5, two filters of width 3, then a dense head.
    let layers = vec![
        LayerSpec::Conv1d {
            in_channels: 1,
            out_channels: 2,
            kernel: 3,
            length: 5,
        },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 6, outputs: 2 },
    ];
    let arch = ArchDescriptor::new(vec![5], layers).unwrap();
    let model = LayeredModel::build(arch, 3).unwrap().eval();
    let p = model.params();
    let (w, rest) = p.split_at(6);
    let (b, rest) = rest.split_at(2);
    let (w2, b2) = rest.split_at(12);
    let x = [0.5, -1.0, 2.0, 0.25, -0.5];
    let mut hidden = Vec::new();
    for o in 0..2 {
        for t in 0..3 {
            let v: f64 = b[o] + (0..3).map(|k| w[o * 3 + k] * x[t + k]).sum::<f64>();
            hidden.push(v.max(0.0));
        }
    }
    let want: Vec<f64> = (0..2).map(|k| b2[k] + (0..6).map(|j| w2[k * 6 + j] * hidden[j]).sum::<f64>()).collect();
    let got = model.forward(array![x].view()).unwrap();
    for (a, b) in got.iter().zip(&want) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
    }
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(seed in 0u64..1000, rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 1..6)) {
        let arch = ArchDescriptor::mlp_classifier(4, &[6], 3).unwrap();
        let model = LayeredModel::build(arch, seed).unwrap().eval();
        let x = Array2::from_shape_vec((rows.len(), 4), rows.concat()).unwrap();
        let out = model.forward(x.view()).unwrap();
        for row in out.outer_iter() {
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn flatten_unflatten_round_trips(seed in 0u64..1000) {
        let arch = ArchDescriptor::mlp_classifier(3, &[4, 4], 2).unwrap();
        let a = LayeredModel::build(arch.clone(), seed).unwrap();
        let mut b = LayeredModel::build(arch, seed + 1).unwrap();
        b.unflatten_params(&a.flatten_params()).unwrap();
        prop_assert_eq!(a.params(), b.params());
    }
}

#[test]
fn unflatten_rejects_wrong_length() {
    let arch = ArchDescriptor::mlp_classifier(3, &[4], 2).unwrap();
    let mut m = LayeredModel::build(arch, 0).unwrap();
    let n = m.param_count();
    assert!(m.unflatten_params(&vec![0.0; n + 1]).is_err());
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let arch = ArchDescriptor::mlp_classifier(3, &[6], 3).unwrap();
    let model = LayeredModel::build(arch, 5).unwrap().eval();
    let x = array![[0.2, -0.4, 1.1], [1.5, 0.3, -0.2], [-0.9, 0.8, 0.05], [0.4, 0.4, 0.4]];
    let y = [0, 2, 1, 2];
    let (_, grad) = cross_entropy_grad(&model, &x, &y, None).unwrap();
    let h = 1e-4;
    let mut checked = 0;
    for i in (0..model.param_count()).step_by(3) {
        let loss_at = |delta: f64| {
            let mut m = model.clone();
            m.params_mut()[i] += delta;
            cross_entropy_grad(&m, &x, &y, None).unwrap().0
        };
        let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        if fd.abs().max(grad[i].abs()) < 1e-7 {
            continue;
        }
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs());
        assert!(rel < 1e-3, "param {i}: analytic {} vs fd {fd}", grad[i]);
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} parameters had a usable gradient");
}

fn logistic_oracle_accuracy(data: &LabeledDataset) -> f64 {
    // Multinomial logistic regression by full-batch gradient descent.
    let (n, d) = data.features().dim();
    let c = data.num_classes();
    let mut w = Array2::<f64>::zeros((d + 1, c));
    let mut xb = Array2::<f64>::ones((n, d + 1));
    xb.slice_mut(ndarray::s![.., ..d]).assign(data.features());
    for _ in 0..500 {
        let mut p = xb.dot(&w);
        for mut row in p.outer_iter_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
        }
        for (i, &y) in data.labels().iter().enumerate() {
            p[[i, y]] -= 1.0;
        }
        w -= &(xb.t().dot(&p) * (0.5 / n as f64));
    }
    let pred = xb.dot(&w);
    let hits = pred
        .outer_iter()
        .zip(data.labels())
        .filter(|(row, &y)| row.iter().enumerate().all(|(k, &v)| k == y || v < row[y]))
        .count();
    hits as f64 / n as f64
}

#[test]
fn training_reaches_the_linear_oracle_on_blobs() {
    let data = make_synthetic_blobs(4, 40, 6, 0.8, 21).unwrap();
    let oracle = logistic_oracle_accuracy(&data);
    assert!(oracle > 0.9, "blobs should be nearly linearly separable, oracle {oracle}");
    let arch = ArchDescriptor::mlp_classifier(6, &[16], 4).unwrap();
    let model = LayeredModel::build(arch, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let (trained, history) = train(&model, &data, &cfg).unwrap();
    assert!(history.last().unwrap() < &history[0]);
    assert!(accuracy(&trained, &data).unwrap() >= oracle - 0.02);
}

#[test]
fn zero_epochs_return_the_initial_parameters() {
    let data = make_synthetic_blobs(3, 10, 4, 0.5, 2).unwrap();
    let arch = ArchDescriptor::mlp_classifier(4, &[8], 3).unwrap();
    let model = LayeredModel::build(arch, 9).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let (out, history) = train(&model, &data, &cfg).unwrap();
    assert!(history.is_empty());
    assert_eq!(out.params(), model.params());
}

#[test]
fn training_is_deterministic_under_seed() {
    let data = make_synthetic_blobs(3, 20, 4, 0.5, 2).unwrap();
    let arch = ArchDescriptor::new(
        vec![4],
        vec![
            LayerSpec::Dense { inputs: 4, outputs: 8 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.2 },
            LayerSpec::Dense { inputs: 8, outputs: 3 },
            LayerSpec::Softmax,
        ],
    )
    .unwrap();
    let model = LayeredModel::build(arch, 4).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        seed: 17,
        ..TrainConfig::default()
    };
    let a = train(&model, &data, &cfg).unwrap().0;
    let b = train(&model, &data, &cfg).unwrap().0;
    assert_eq!(a.params(), b.params());
    let c = train(&model, &data, &cfg.with_seed(18)).unwrap().0;
    assert_ne!(a.params(), c.params());
}

#[test]
fn layer_replacement_endpoints_and_purity() {
    let arch = ArchDescriptor::mlp_classifier(3, &[4, 4], 2).unwrap();
    let target = LayeredModel::build(arch.clone(), 1).unwrap();
    let source = LayeredModel::build(arch, 2).unwrap();
    let (t0, s0) = (target.params().to_vec(), source.params().to_vec());

    assert_eq!(replace_last_layers(&target, &source, 0).unwrap().params(), target.params());
    assert_eq!(replace_last_layers(&target, &source, 3).unwrap().params(), source.params());
    let mixed = replace_last_layers(&target, &source, 1).unwrap();
    let head = target.layer_param_range(2).unwrap();
    assert_eq!(&mixed.params()[head.clone()], &source.params()[head.clone()]);
    assert_eq!(&mixed.params()[..head.start], &target.params()[..head.start]);
    assert!(replace_last_layers(&target, &source, 4).is_err());
    assert_eq!((target.params(), source.params()), (&t0[..], &s0[..]));

    let other = LayeredModel::build(ArchDescriptor::mlp_classifier(3, &[5, 4], 2).unwrap(), 0).unwrap();
    assert!(matches!(replace_last_layers(&target, &other, 1), Err(Error::ArchMismatch(_))));
}

fn sample_checkpoint() -> Checkpoint {
    let arch = ArchDescriptor::mlp_classifier(5, &[7], 3).unwrap();
    let lineage = Lineage {
        init_from: Some("src".into()),
        trained_on_task_id: "task-1".into(),
        seed: 99,
    };
    let metrics = Metrics {
        train_accuracy: Some(0.75),
        test_accuracy: None,
    };
    Checkpoint::new("ck", LayeredModel::build(arch, 8).unwrap().eval(), lineage, metrics)
}

#[test]
fn checkpoint_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ckpt");
    let ck = sample_checkpoint();
    let hash = ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let bits = |m: &LayeredModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&ck.model), bits(&back.model));
    assert_eq!((&back.id, &back.lineage, &back.metrics), (&ck.id, &ck.lineage, &ck.metrics));
    assert_eq!(back.arch(), ck.arch());
    assert_eq!(hash, back.content_hash().unwrap());
    assert_eq!(hash, modeldna::content_hash(&std::fs::read(&path).unwrap()));
}

#[test]
fn checkpoint_with_future_version_is_rejected() {
    let bytes = sample_checkpoint().to_bytes().unwrap();
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[16..16 + header_len]).unwrap();
    let tag = format!("\"formatVersion\":{CHECKPOINT_FORMAT_VERSION}");
    assert!(header.contains(&tag));
    let patched = header.replacen(&tag, "\"formatVersion\":999", 1);
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(patched.len() as u64).to_le_bytes());
    out.extend_from_slice(patched.as_bytes());
    out.extend_from_slice(&bytes[16 + header_len..]);
    match Checkpoint::from_bytes(&out) {
        Err(Error::UnsupportedVersion { found: 999, supported }) => assert_eq!(supported, CHECKPOINT_FORMAT_VERSION),
        other => panic!("expected a version error, got {other:?}"),
    }
}
