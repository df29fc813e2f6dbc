//! Command-line interface: dataset synthesis, model fitting, scoring, and
//! repeated-trial evaluation.
//!
//! Every command is deterministic given its flags; seeds are always
//! explicit, never derived from the clock.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rsif::eval::{run_trials, synth_gaussian, synth_multimodal, TrialPlan};
use rsif::{
    load_dataset, write_dataset, Dataset, DistanceConfig, DistanceId, FitParams, Forest,
    SelectionStrategy,
};

#[derive(Parser)]
#[command(
    name = "rsif",
    about = "Random similarity isolation forest outlier detection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a dataset directory and write it to a model file.
    Fit {
        /// Dataset directory (contains manifest.json).
        #[arg(long)]
        data: PathBuf,
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Score a dataset with a fitted model and write a CSV of scores.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV file (`index,score` plus a flag column with --theta).
        #[arg(long)]
        out: PathBuf,
        /// Outlier threshold; adds a `flag` column with score >= theta.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run repeated stratified holdout trials on a labeled dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Number of independent trials.
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Fraction of rows used for training in each trial.
        #[arg(long = "train-frac", default_value_t = 0.7)]
        train_frac: f64,
        /// Output JSON report.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Generate a labeled synthetic dataset directory.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        n: usize,
        #[arg(long = "outlier-frac")]
        outlier_frac: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Dimensions of the gaussian cloud (gaussian kind only).
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Gaussian,
    Multimodal,
}

/// The JSON run configuration. Unknown keys are hard errors so that typos
/// in hyperparameters or distance names cannot silently change a run.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default = "default_trees")]
    t: usize,
    #[serde(default = "default_subsample")]
    psi: usize,
    #[serde(default = "default_pool_ratio")]
    m: f64,
    #[serde(default)]
    strategy: SelectionStrategy,
    #[serde(default)]
    seed: u64,
    /// Accepted for completeness; thresholding happens at scoring time via
    /// `score --theta`.
    #[serde(default)]
    #[allow(dead_code)]
    theta: Option<f64>,
    distances: BTreeMap<String, Vec<DistanceId>>,
    #[serde(default)]
    candidates: Vec<BTreeMap<String, Vec<DistanceId>>>,
}

fn default_trees() -> usize {
    100
}

fn default_subsample() -> usize {
    256
}

fn default_pool_ratio() -> f64 {
    0.5
}

impl RunConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(config)
    }

    fn fit_params(&self) -> FitParams {
        FitParams {
            trees: self.t,
            subsample: self.psi,
            pool_ratio: self.m,
            strategy: self.strategy,
            seed: self.seed,
            config: DistanceConfig {
                per_feature: self.distances.clone(),
            },
        }
    }

    fn candidate_configs(&self) -> Vec<DistanceConfig> {
        self.candidates
            .iter()
            .map(|per_feature| DistanceConfig {
                per_feature: per_feature.clone(),
            })
            .collect()
    }
}

fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T>
where
    T: Send,
{
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("cannot build worker pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn load_data(path: &Path) -> Result<Dataset> {
    let dataset =
        load_dataset(path).with_context(|| format!("cannot load dataset {}", path.display()))?;
    let violations = rsif::validate(&dataset);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid dataset: {v}");
        }
        bail!(
            "dataset {} failed validation ({} violations)",
            path.display(),
            violations.len()
        );
    }
    Ok(dataset)
}

fn cmd_fit(data: &Path, config: &Path, out: &Path, jobs: Option<usize>) -> Result<()> {
    let dataset = load_data(data)?;
    let run = RunConfig::load(config)?;
    let params = run.fit_params();

    let started = Instant::now();
    let model = with_jobs(jobs, || Forest::fit(&dataset, &params))?.context("fit failed")?;
    let elapsed = started.elapsed();
    model
        .save(out)
        .with_context(|| format!("cannot write model {}", out.display()))?;

    println!(
        "fitted forest: n={} trees={} psi_eff={} pool={} elapsed={:.3}s",
        dataset.n(),
        model.trees().len(),
        model.effective_subsample(),
        model.pool_size(),
        elapsed.as_secs_f64()
    );
    println!("model written to {}", out.display());
    Ok(())
}

fn cmd_score(
    model: &Path,
    data: &Path,
    out: &Path,
    theta: Option<f64>,
    jobs: Option<usize>,
) -> Result<()> {
    let forest =
        Forest::load(model).with_context(|| format!("cannot load model {}", model.display()))?;
    let dataset = load_data(data)?;
    let scores = with_jobs(jobs, || forest.score_batch(&dataset))?.context("scoring failed")?;

    let mut text = String::new();
    match theta {
        Some(theta) => {
            text.push_str("index,score,flag\n");
            for (i, s) in scores.iter().enumerate() {
                let flag = u8::from(*s >= theta);
                text.push_str(&format!("{i},{s:.17e},{flag}\n"));
            }
        }
        None => {
            text.push_str("index,score\n");
            for (i, s) in scores.iter().enumerate() {
                text.push_str(&format!("{i},{s:.17e}\n"));
            }
        }
    }
    fs::write(out, text).with_context(|| format!("cannot write scores {}", out.display()))?;
    println!("scored {} examples to {}", scores.len(), out.display());
    Ok(())
}

fn cmd_eval(
    data: &Path,
    config: &Path,
    trials: usize,
    train_frac: f64,
    out: &Path,
    jobs: Option<usize>,
) -> Result<()> {
    let dataset = load_data(data)?;
    if dataset.labels().is_none() {
        bail!(
            "dataset {} has no labels; eval requires a labeled dataset",
            data.display()
        );
    }
    let run = RunConfig::load(config)?;
    let params = run.fit_params();
    let candidates = run.candidate_configs();
    let plan = TrialPlan {
        train_fraction: train_frac,
        trials,
        validation_fraction: 0.3,
        base_seed: run.seed,
    };

    let report = with_jobs(jobs, || {
        run_trials(
            &dataset,
            &params,
            &plan,
            if candidates.is_empty() {
                None
            } else {
                Some(&candidates)
            },
        )
    })?
    .context("evaluation failed")?;

    let mut file =
        fs::File::create(out).with_context(|| format!("cannot write report {}", out.display()))?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    writeln!(&mut file)?;

    println!(
        "eval: {} trials, mean_ap={:.4} (std {:.4}), mean_auc={:.4} (std {:.4})",
        report.trials.len(),
        report.mean_ap,
        report.std_ap,
        report.mean_auc,
        report.std_auc
    );
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_synth(
    kind: SynthKind,
    n: usize,
    outlier_frac: f64,
    seed: u64,
    out: &Path,
    dims: usize,
) -> Result<()> {
    let dataset = match kind {
        SynthKind::Gaussian => synth_gaussian(n, outlier_frac, dims, seed),
        SynthKind::Multimodal => synth_multimodal(n, outlier_frac, seed),
    }
    .context("cannot generate dataset")?;
    write_dataset(&dataset, out)
        .with_context(|| format!("cannot write dataset {}", out.display()))?;
    println!(
        "wrote {} examples ({} columns) to {}",
        dataset.n(),
        dataset.columns().len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            data,
            config,
            out,
            jobs,
        } => cmd_fit(&data, &config, &out, jobs),
        Command::Score {
            model,
            data,
            out,
            theta,
            jobs,
        } => cmd_score(&model, &data, &out, theta, jobs),
        Command::Eval {
            data,
            config,
            trials,
            train_frac,
            out,
            jobs,
        } => cmd_eval(&data, &config, trials, train_frac, &out, jobs),
        Command::Synth {
            kind,
            n,
            outlier_frac,
            seed,
            out,
            dims,
        } => cmd_synth(kind, n, outlier_frac, seed, &out, dims),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
