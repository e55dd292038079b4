use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use modeldna::tasks::LabeledDataset;
use modeldna_cli::pipeline::{self, resolve_checkpoint};
use modeldna_cli::{config, run, Run, RunConfig};

/// Model DNA provenance experiments.
#[derive(Parser)]
#[command(name = "modeldna", version)]
struct Cli {
    /// Run configuration (TOML). Defaults to the bundled desk experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory. Defaults to $MODELDNA_OUT/<name>, else runs/<name>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the set-level decision threshold, in (0, 1].
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and split the data, then train the source model.
    TrainSource,
    /// Train homologous and non-homologous target models.
    BuildPool,
    /// Jointly train the DNA generator and provenance classifier.
    TrainMgmp,
    /// Score the held-out models and sweep delta over the pool models.
    Evaluate,
    /// Parameter-difference baseline detector.
    Baseline,
    /// Forgetting probe and layer-replacement curves.
    ReplaceDiagnostic,
    /// Fragment table and 2-D projection for plotting.
    ExportViz,
    /// Assembly mode and latent size sweep.
    Ablation,
    /// Every stage in order.
    Run,
    /// Decide whether a target descends from a source.
    Verify {
        /// Target checkpoint file, or a checkpoint id in the run directory.
        #[arg(long)]
        target: String,
        /// Source checkpoint file or id (default: the run's source).
        #[arg(long)]
        source: Option<String>,
        /// Trained MGMP directory (default: the run's mgmp/).
        #[arg(long)]
        mgmp: Option<PathBuf>,
        /// Source training data CSV (default: the run's source task).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Where to write the verdict JSON (default: verdicts/verify-<target>.json).
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::desk()?,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed)?;
    }
    if let Some(delta) = cli.delta {
        cfg = cfg.with_delta(delta)?;
    }
    let dir = config::run_dir(&cfg, cli.out.as_deref());
    let run = Run::open(cfg, dir)?;

    match cli.command {
        Command::TrainSource => drop(run.train_source()?),
        Command::BuildPool => drop(run.build_pool()?),
        Command::TrainMgmp => drop(run.train_mgmp()?),
        Command::Evaluate => drop(run.evaluate()?),
        Command::Baseline => drop(run.baseline()?),
        Command::ReplaceDiagnostic => drop(run.replace_diagnostic()?),
        Command::ExportViz => drop(run.export_viz()?),
        Command::Ablation => drop(run.ablation()?),
        Command::Run => run.run_all()?,
        Command::Verify {
            target,
            source,
            mgmp,
            data,
            json,
        } => {
            let source = match source {
                Some(s) => resolve_checkpoint(&run, &s)?,
                None => run.load_source()?,
            };
            let target = resolve_checkpoint(&run, &target)?;
            let mgmp = match mgmp {
                Some(dir) => modeldna::mgmp::MgmpModel::load(&dir).with_context(|| format!("loading {}", dir.display()))?,
                None => run.load_mgmp()?,
            };
            let data = match data {
                Some(path) => LabeledDataset::read_csv(&path, "verify", Some(source.arch().output_dim()))?,
                None => run.source_data()?,
            };
            let verdict = pipeline::verify(&source, &target, &mgmp, &data, run.cfg.mgmp.delta)?;
            let positives = verdict.positive_fragments();
            println!(
                "{} vs {}: mean score {:.4} over {} fragments ({} above 0.5)",
                verdict.source_id,
                verdict.target_id,
                verdict.mean_score,
                verdict.fragment_scores.len(),
                positives
            );
            println!("decision {} at delta {}", verdict.decision, verdict.delta_used);
            let path = match json {
                Some(p) => p,
                None => run.prepare(&format!("verdicts/verify-{}.json", verdict.target_id))?,
            };
            std::fs::write(&path, run::to_json(&verdict)?)?;
            println!("verdict written to {}", path.display());
        }
    }
    Ok(())
}
