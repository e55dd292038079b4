//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use modeldna::dna::{AssemblyMode, ModelDna};
use modeldna::mgmp::{
    init_networks, loss_bce, loss_intra, loss_similarity, loss_total, mgmp_objective, train_mgmp, GeneratorConfig,
    LossReduction, MgmpConfig, MgmpModel, TrainingBatch,
};
use modeldna::nn::{accuracy, Checkpoint, LayeredModel};
use modeldna::tasks::{Relation, SplitRole};
use modeldna::Error;
use modeldna_cli::pipeline::{self, DIAGNOSTIC_ID};
use modeldna_cli::{Run, RunConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-6;
const ORACLE_BATCHES: usize = 200;
const SPOT_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-4;
const FD_REL_TOL: f64 = 1e-3;
const FD_MIN_PARAMS: usize = 10;
const MIN_FRAGMENT_ACCURACY: f64 = 0.75;
const DESK_DELTA: f64 = 0.9;
const LOSS_BUDGET: Duration = Duration::from_secs(10);
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const DESK_BUDGET: Duration = Duration::from_secs(300);

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("{e:#}")
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
}

fn rows_of(a: &Array2<f64>) -> oracle::Rows {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_BATCHES {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=16);
        let tau = rng.random_range(0.05..2.0);
        let (s, t, u) = (random_rows(&mut rng, n, d), random_rows(&mut rng, n, d), random_rows(&mut rng, n, d));
        let (rs, rt, ru) = (rows_of(&s), rows_of(&t), rows_of(&u));
        let ls = loss_similarity(s.view(), t.view(), u.view(), tau).map_err(err)?;
        let li = loss_intra(s.view(), t.view(), u.view(), tau).map_err(err)?;
        let w: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = rng.random_range(0.0..0.1);
        let m = rng.random_range(1..=2 * n);
        let h: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.001..0.999)).collect();
        let diffs = [
            ls - oracle::similarity(&rs, &rt, &ru, tau),
            li - oracle::intra(&rs, &rt, &ru, tau),
            loss_total(ls, li, &w, lambda) - oracle::total(oracle::similarity(&rs, &rt, &ru, tau), oracle::intra(&rs, &rt, &ru, tau), &w, lambda),
            loss_bce(&h, &p).map_err(err)? - oracle::bce(&h, &p),
        ];
        worst = diffs.iter().fold(worst, |a, d| a.max(d.abs()));
    }
    let elapsed = start.elapsed();
    ensure!(worst < ORACLE_TOL, "max |library - oracle| = {worst:.3e} exceeds {ORACLE_TOL:e}");
    ensure!(elapsed < LOSS_BUDGET, "took {elapsed:?}");
    Ok(format!("{ORACLE_BATCHES} random batches, max |diff| {worst:.2e} < {ORACLE_TOL:e}, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let pos_neg = Array2::from_shape_vec((1, 3), vec![0.4, -1.0, 2.0]).unwrap();
    let ls = loss_similarity(pos_neg.view(), pos_neg.view(), pos_neg.view(), 0.5).map_err(err)?;
    let parallel = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 2.5, 0.0]).unwrap();
    let li = loss_intra(parallel.view(), parallel.view(), parallel.view(), 1.0).map_err(err)?;
    let want_li = -2.0 * (1.0 + 3f64.ln());
    let bce = loss_bce(&[1.0, 0.0], &[0.5, 0.5]).map_err(err)?;
    ensure!(ls.abs() <= SPOT_TOL, "L_S = {ls}");
    ensure!((li - want_li).abs() <= SPOT_TOL, "L_I = {li}, want {want_li}");
    ensure!((bce - 2f64.ln()).abs() <= SPOT_TOL, "BCE = {bce}");
    Ok(format!("L_S = {ls:.1e}, L_I = {li:.12} = -2(1+ln 3), BCE(0.5) = {bce:.12} = ln 2"))
}

fn fd_compare(base: &LayeredModel, analytic: &[f64], eval: impl Fn(&LayeredModel) -> f64) -> Result<(usize, f64), String> {
    let stride = (base.param_count() / 40).max(1);
    let (mut compared, mut worst) = (0, 0.0f64);
    for i in (0..base.param_count()).step_by(stride) {
        let shifted = |d: f64| {
            let mut m = base.clone();
            m.params_mut()[i] += d;
            eval(&m)
        };
        let fd = (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP);
        let scale = fd.abs().max(analytic[i].abs());
        if scale < 1e-6 {
            continue;
        }
        worst = worst.max((fd - analytic[i]).abs() / scale);
        compared += 1;
    }
    Ok((compared, worst))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for (mode, reduction) in [
        (AssemblyMode::Addition, LossReduction::Sum),
        (AssemblyMode::Concatenation, LossReduction::Sum),
        (AssemblyMode::Addition, LossReduction::Mean),
    ] {
        let cfg = MgmpConfig {
            assembly_mode: mode,
            loss_reduction: reduction,
            lambda_reg: 0.05,
            generator: GeneratorConfig {
                hidden: vec![6],
                latent_dim: Some(if mode == AssemblyMode::Addition { 3 } else { 2 }),
                ..Default::default()
            },
            classifier_hidden: vec![5],
            seed: 3,
            ..MgmpConfig::default()
        };
        let (gen, cls) = init_networks(4, 3, &cfg).map_err(err)?;
        let gen = gen.unwrap().into_model().eval();
        let cls = cls.eval();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probs = |rng: &mut ChaCha8Rng| {
            let mut a = random_rows(rng, 5, 3).mapv(f64::exp);
            for mut r in a.outer_iter_mut() {
                let s = r.sum();
                r /= s;
            }
            a
        };
        let batch = TrainingBatch {
            x: random_rows(&mut rng, 5, 4),
            y_source: probs(&mut rng),
            y_homologous: probs(&mut rng),
            y_non_homologous: probs(&mut rng),
        };
        let value = |g: &LayeredModel, c: &LayeredModel| mgmp_objective(Some(g), c, &batch, &cfg, None).unwrap().parts.total;
        let out = mgmp_objective(Some(&gen), &cls, &batch, &cfg, None).map_err(err)?;
        let (ng, wg) = fd_compare(&gen, &out.generator, |g| value(g, &cls))?;
        let (nc, wc) = fd_compare(&cls, &out.classifier, |c| value(&gen, c))?;
        let label = format!("{}/{reduction:?}", mode.as_str());
        ensure!(ng >= FD_MIN_PARAMS && nc >= FD_MIN_PARAMS, "{label}: only {ng} generator / {nc} classifier params compared");
        ensure!(wg < FD_REL_TOL && wc < FD_REL_TOL, "{label}: worst relative error {:.2e}", wg.max(wc));
        lines.push(format!("{label} {ng}+{nc} params max rel {:.1e}", wg.max(wc)));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < GRAD_BUDGET, "took {elapsed:?}");
    Ok(format!("{}, h = {FD_STEP:e}, {elapsed:.2?}", lines.join("; ")))
}

fn param_bits(ck: &Checkpoint) -> Vec<u64> {
    ck.model.params().iter().map(|v| v.to_bits()).collect()
}

fn criterion_4(run: &Run) -> Outcome {
    let source = run.load_source().map_err(err)?;
    let pool = run.load_pool().map_err(err)?;
    let before: Vec<Vec<u64>> = std::iter::once(&source).chain(pool.checkpoints.values()).map(param_bits).collect();
    let cfg = MgmpConfig {
        epochs: 3,
        ..run.cfg.mgmp.clone()
    };
    train_mgmp(&source, &pool, &run.source_data().map_err(err)?, &cfg).map_err(err)?;
    let after: Vec<Vec<u64>> = std::iter::once(&source).chain(pool.checkpoints.values()).map(param_bits).collect();
    ensure!(before == after, "a source or pool parameter changed during training");
    // The files the pipeline trained against still carry their recorded hashes.
    run.load_pool().map_err(err)?;
    Ok(format!("{} models bit-identical after training; on-disk hashes match pool.json", before.len()))
}

fn criterion_5(run: &Run, elapsed: Duration) -> Outcome {
    let cfg = &run.cfg;
    let pool = run.load_pool().map_err(err)?;
    let count = |role, rel| pool.pool.entries_with(role, rel).count();
    ensure!(cfg.source_classes() == 4, "source task has {} classes", cfg.source_classes());
    ensure!(
        count(SplitRole::Pool, Relation::Homologous) == 3 && count(SplitRole::Pool, Relation::NonHomologous) == 3,
        "pool layout differs from 3 x (1 + 1)"
    );
    ensure!(
        count(SplitRole::Evaluation, Relation::Homologous) == 2 && count(SplitRole::Evaluation, Relation::NonHomologous) == 2,
        "held-out layout differs from 2 x (1 + 1)"
    );
    let sweep: Vec<modeldna::mgmp::DeltaSweepRow> = run.read_json(pipeline::SWEEP_JSON).map_err(err)?;
    let log = std::fs::read_to_string(run.path("run.log")).map_err(err)?;
    ensure!(!sweep.is_empty() && log.contains("validation sweep"), "no validation delta sweep was logged");
    let report = run.eval_report().map_err(err)?;
    ensure!(report.delta == DESK_DELTA, "evaluated at delta {}", report.delta);
    ensure!(
        report.accuracy >= MIN_FRAGMENT_ACCURACY,
        "held-out fragment accuracy {:.4} < {MIN_FRAGMENT_ACCURACY}",
        report.accuracy
    );
    let wrong: Vec<&str> = report.per_model.iter().filter(|m| !m.verdict_correct).map(|m| m.model_id.as_str()).collect();
    ensure!(wrong.is_empty(), "wrong set-level verdicts for {wrong:?}");
    ensure!(elapsed < DESK_BUDGET, "desk pipeline took {elapsed:?}");
    let scores: Vec<String> = report.per_model.iter().map(|m| format!("{} {:.3}", m.model_id, m.verdict.mean_score)).collect();
    Ok(format!(
        "fragment accuracy {:.4} >= {MIN_FRAGMENT_ACCURACY}; {}/{} verdicts correct at delta {DESK_DELTA} ({}); {} sweep rows; single-threaded pipeline {elapsed:.1?}",
        report.accuracy,
        report.per_model.len(),
        report.per_model.len(),
        scores.join(", "),
        sweep.len()
    ))
}

fn criterion_6(run: &Run) -> Outcome {
    let rows = run.ablation_report().map_err(err)?.rows;
    let find = |name: &str| rows.iter().find(|r| r.variant == name).ok_or(format!("no {name} row"));
    let classes = run.cfg.source_classes();
    let with = find(&format!("{}-z{classes}", run.cfg.mgmp.assembly_mode.as_str()))?;
    let without = find("no-generator")?;
    ensure!(
        with.accuracy >= without.accuracy,
        "with generator {:.4} < without {:.4}",
        with.accuracy,
        without.accuracy
    );
    Ok(format!("with generator {:.4} >= outputs only {:.4}", with.accuracy, without.accuracy))
}

fn criterion_7(run: &Run) -> Outcome {
    let forgetting = run.forgetting_report().map_err(err)?;
    ensure!(
        forgetting.acc_after < forgetting.acc_before,
        "no forgetting: {} -> {}",
        forgetting.acc_before,
        forgetting.acc_after
    );
    let rep = run.replacement_report().map_err(err)?;
    let l = rep.layers;
    let hom = rep.curves.iter().find(|c| c.target_relation == Relation::Homologous).ok_or("no homologous curve")?;
    let non = rep.curves.iter().find(|c| c.target_relation == Relation::NonHomologous).ok_or("no non-homologous curve")?;
    let data = run.source_data().map_err(err)?;
    let source = run.load_source().map_err(err)?;
    let tuned = Checkpoint::load(&run.path(format!("checkpoints/{DIAGNOSTIC_ID}.ckpt"))).map_err(err)?;
    let plain_target = accuracy(&tuned.model, &data).map_err(err)?;
    let plain_source = accuracy(&source.model, &data).map_err(err)?;
    let h = &hom.source_task_accuracy;
    let n = &non.source_task_accuracy;
    ensure!(h[0] == plain_target && h[l] == plain_source, "endpoints {} / {} differ from plain {plain_target} / {plain_source}", h[0], h[l]);
    ensure!(h[l] > h[0] && h[l - 1] > h[0], "homologous curve does not rise: {h:?}");
    ensure!(n[l - 1] < h[l - 1], "non-homologous {:.3} not below homologous {:.3} at k = {}", n[l - 1], h[l - 1], l - 1);
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ");
    Ok(format!(
        "forgetting {:.4} -> {:.4}; homologous by k [{}]; non-homologous [{}]; compared at k = {} (k = {l} restores every layer)",
        forgetting.acc_before,
        forgetting.acc_after,
        fmt(h),
        fmt(n),
        l - 1
    ))
}

fn criterion_8(run: &Run) -> Outcome {
    let baseline = run.baseline_report().map_err(err)?;
    let report = run.eval_report().map_err(err)?;
    ensure!(
        report.set_level_accuracy >= baseline.baseline_accuracy,
        "MGMP {:.4} < baseline {:.4}",
        report.set_level_accuracy,
        baseline.baseline_accuracy
    );
    Ok(format!(
        "MGMP set-level accuracy {:.4} >= parameter-distance baseline {:.4} on the same {} held-out models (threshold {:.3})",
        report.set_level_accuracy,
        baseline.baseline_accuracy,
        report.per_model.len(),
        baseline.threshold
    ))
}

fn criterion_9(a: &Run, b: &Run) -> Outcome {
    let x = std::fs::read(a.path(pipeline::EVAL_JSON)).map_err(err)?;
    let y = std::fs::read(b.path(pipeline::EVAL_JSON)).map_err(err)?;
    ensure!(x == y, "eval.json differs between two runs");
    Ok(format!("two independent runs wrote identical eval.json ({} bytes, sha256 {})", x.len(), &modeldna::content_hash(&x)[..16]))
}

fn patch_version(bytes: &[u8]) -> Vec<u8> {
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[16..16 + len]).unwrap().replacen("\"formatVersion\":1", "\"formatVersion\":999", 1);
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&bytes[16 + len..]);
    out
}

fn is_version_error<T>(r: modeldna::Result<T>) -> bool {
    matches!(r, Err(Error::UnsupportedVersion { found: 999, .. }))
}

fn criterion_10(run: &Run, scratch: &Path) -> Outcome {
    let ckpt_bytes = std::fs::read(run.path(pipeline::SOURCE_CKPT)).map_err(err)?;
    let ck = Checkpoint::from_bytes(&ckpt_bytes).map_err(err)?;
    let copy = scratch.join("source.ckpt");
    ck.save(&copy).map_err(err)?;
    ensure!(std::fs::read(&copy).map_err(err)? == ckpt_bytes, "checkpoint re-save changed bytes");
    ensure!(param_bits(&Checkpoint::load(&copy).map_err(err)?) == param_bits(&ck), "checkpoint parameters changed");

    let mgmp = run.load_mgmp().map_err(err)?;
    let dna = mgmp.model_dna(&ck.model, &ck.id, &run.source_data().map_err(err)?).map_err(err)?;
    let fp = scratch.join("source.fp");
    dna.save(&fp).map_err(err)?;
    let back = ModelDna::load(&fp).map_err(err)?;
    let bits = |d: &ModelDna| d.fragments.iter().flat_map(|f| f.vector.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
    ensure!(back == dna && bits(&back) == bits(&dna), "fingerprint round trip changed data");

    ensure!(is_version_error(Checkpoint::from_bytes(&patch_version(&ckpt_bytes))), "checkpoint version 999 accepted");
    let fp_bytes = std::fs::read(&fp).map_err(err)?;
    std::fs::write(&fp, patch_version(&fp_bytes)).map_err(err)?;
    ensure!(is_version_error(ModelDna::load(&fp)), "fingerprint version 999 accepted");
    let mdir = scratch.join("mgmp");
    mgmp.save(&mdir).map_err(err)?;
    let json = std::fs::read_to_string(mdir.join("mgmp.json")).map_err(err)?;
    std::fs::write(mdir.join("mgmp.json"), json.replacen("\"formatVersion\": 1", "\"formatVersion\": 999", 1)).map_err(err)?;
    ensure!(is_version_error(MgmpModel::load(&mdir)), "mgmp version 999 accepted");
    let toml = modeldna_cli::config::DESK_TOML.replace("schema_version = 1", "schema_version = 999");
    ensure!(RunConfig::parse(&toml).is_err(), "config schema 999 accepted");
    Ok(format!(
        "checkpoint ({} params) and fingerprint ({} x {}) round-trip bit-exact; version 999 rejected for checkpoint, fingerprint, mgmp, config",
        ck.model.param_count(),
        dna.len(),
        dna.fragment_dim()
    ))
}

fn criterion_11(a: &Run, b: &Run) -> Outcome {
    let x = std::fs::read(a.path(pipeline::PROJECTION_CSV)).map_err(err)?;
    let y = std::fs::read(b.path(pipeline::PROJECTION_CSV)).map_err(err)?;
    ensure!(x == y, "projection differs between runs with the same seed");
    let summary = a.viz_summary().map_err(err)?;
    ensure!(summary.spearman_rho > 0.0, "Spearman rho {}", summary.spearman_rho);
    Ok(format!(
        "projection of {} fragments identical across runs; Spearman rho {:.4} > 0",
        summary.rows, summary.spearman_rho
    ))
}

/// Runs one check, turning panics into failures.
fn check(results: &mut Vec<(u8, Outcome)>, id: u8, f: impl FnOnce() -> Outcome) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let line = match &outcome {
        Ok(detail) => format!("PASS criterion {id}: {detail}"),
        Err(detail) => format!("FAIL criterion {id}: {detail}"),
    };
    println!("{line}");
    results.push((id, outcome));
}

fn desk_run(dir: &Path) -> Result<(Run, Duration), String> {
    let run = Run::open(RunConfig::desk().map_err(err)?, dir).map_err(err)?.quiet();
    let start = Instant::now();
    run.run_all().map_err(err)?;
    Ok((run, start.elapsed()))
}

fn main() {
    // Single-threaded, so the wall-clock budget also bounds CPU time.
    std::env::set_var("RAYON_NUM_THREADS", "1");
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results = Vec::new();

    check(&mut results, 1, criterion_1);
    check(&mut results, 2, criterion_2);
    check(&mut results, 3, criterion_3);

    let first = desk_run(&tmp.path().join("desk-a"));
    let second = desk_run(&tmp.path().join("desk-b"));
    match (&first, &second) {
        (Ok((a, elapsed)), Ok((b, _))) => {
            check(&mut results, 4, || criterion_4(a));
            check(&mut results, 5, || criterion_5(a, *elapsed));
            check(&mut results, 6, || criterion_6(a));
            check(&mut results, 7, || criterion_7(a));
            check(&mut results, 8, || criterion_8(a));
            check(&mut results, 9, || criterion_9(a, b));
            let scratch = tmp.path().join("scratch");
            check(&mut results, 10, || criterion_10(a, &scratch));
            check(&mut results, 11, || criterion_11(a, b));
            if let Ok(report) = a.ablation_report() {
                let rows: Vec<String> = report.rows.iter().map(|r| format!("{} {:.4}", r.variant, r.accuracy)).collect();
                println!("NOTE ablation fragment accuracy: {}", rows.join(", "));
            }
        }
        _ => {
            let why = first.as_ref().err().or(second.as_ref().err()).cloned().unwrap_or_default();
            for id in 4..=11 {
                check(&mut results, id, || Err(format!("desk pipeline failed: {why}")));
            }
        }
    }

    let failed: Vec<u8> = results.iter().filter(|(_, o)| o.is_err()).map(|(id, _)| *id).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
