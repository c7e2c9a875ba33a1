//! Command-line front end for interval-sequence classification.
//!
//! Subcommands cover the full workflow: `synth` produces labelled datasets,
//! `fit` trains a model, `predict` applies one, `cv` runs the repeated
//! stratified evaluation, `oracle` cross-checks the exact featurizer against
//! the discrete raster path, `rasterize` exports the grids themselves and
//! `bench` times the transform under controlled scalings.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ivc_core::bench::{bench, BenchConfig};
use ivc_core::cv::{crossvalidate, permute_labels};
use ivc_core::data::{load_dataset, load_intervals, write_intervals_csv, write_labels_csv, Dataset};
use ivc_core::featurize::TransformReport;
use ivc_core::model::{fit, FitConfig};
use ivc_core::pipeline::{accuracy, predict, train, TrainedModel};
use ivc_core::raster::{oracle_compare, rasterize};
use ivc_core::synth::{synth, SignalKind, SynthSpec};

#[derive(Parser)]
#[command(
    name = "ivc",
    version,
    about = "Classify labelled interval sequences with exact continuous-time convolution features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from interval and label CSVs and write it as JSON.
    Fit(FitArgs),
    /// Classify sequences with a trained model (labels optional, for scoring).
    Predict(PredictArgs),
    /// Repeated stratified cross-validation on a labelled dataset.
    Cv(CvArgs),
    /// Generate a synthetic labelled dataset with a planted class signal.
    Synth(SynthArgs),
    /// Export each sequence as a sampled grid, one CSV per sequence.
    Rasterize(RasterizeArgs),
    /// Cross-check the exact featurizer against brute-force rasterization.
    Oracle(OracleArgs),
    /// Time the transform as magnitudes, event counts and features scale.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct FitArgs {
    /// Interval CSV: seq_id,channel,start,end[,value].
    #[arg(long)]
    intervals: PathBuf,
    /// Label CSV: seq_id,label.
    #[arg(long)]
    labels: PathBuf,
    /// Output path for the model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Total number of features (combo x bias pairs).
    #[arg(long, default_value_t = 10_000)]
    features: usize,
    /// Number of dilations on the geometric grid.
    #[arg(long, default_value_t = 32)]
    dilations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore interval values: treat every interval as presence (value 1).
    #[arg(long)]
    binarize: bool,
}

#[derive(clap::Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Interval CSV of the sequences to classify.
    #[arg(long)]
    intervals: PathBuf,
    /// Optional truth labels; when given, an accuracy line is printed last.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CvArgs {
    #[arg(long)]
    intervals: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 10_000)]
    features: usize,
    #[arg(long, default_value_t = 32)]
    dilations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shuffle the labels first, to measure chance-level accuracy.
    #[arg(long)]
    permute: bool,
    /// Ignore interval values: treat every interval as presence (value 1).
    #[arg(long)]
    binarize: bool,
    /// Also write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 30)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    /// Time span of every sequence (the generator pins the global range).
    #[arg(long, default_value_t = 16.0)]
    max_duration: f64,
    #[arg(long, default_value_t = 20)]
    events: usize,
    /// Which property separates the classes: duration, lag or intensity.
    #[arg(long, default_value = "duration")]
    signal: SignalKind,
    /// How strongly the signal scales between the extreme classes.
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
    /// Keep every timestamp integral.
    #[arg(long)]
    integer: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>_intervals.csv and <prefix>_labels.csv.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(clap::Args)]
struct RasterizeArgs {
    #[arg(long)]
    intervals: PathBuf,
    /// Sampling step of the grid.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Output directory; one <seq_id>.csv per sequence.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    intervals: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 500)]
    features: usize,
    #[arg(long, default_value_t = 8)]
    dilations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Raster step for the brute-force side.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 40)]
    sequences: usize,
    #[arg(long, default_value_t = 4)]
    channels: usize,
    #[arg(long, default_value_t = 60)]
    events: usize,
    #[arg(long, default_value_t = 2688)]
    features: usize,
    #[arg(long, default_value_t = 16)]
    dilations: usize,
    /// Timing runs per setting; the best is kept.
    #[arg(long, default_value_t = 2)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Cv(a) => run_cv(a),
        Command::Synth(a) => run_synth(a),
        Command::Rasterize(a) => run_rasterize(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn load_labelled(intervals: &Path, labels: &Path) -> anyhow::Result<Dataset> {
    load_dataset(intervals, labels)
        .with_context(|| format!("loading {} / {}", intervals.display(), labels.display()))
}

fn warn_report(report: &TransformReport) {
    if !report.overflow_ids.is_empty() {
        log::warn!(
            "{} sequence(s) extend past the fitted time range: {}",
            report.overflow_ids.len(),
            report.overflow_ids.join(", ")
        );
    }
    if report.empty_window_features > 0 {
        log::warn!(
            "{} feature(s) fell on an empty window and were set to 0",
            report.empty_window_features
        );
    }
}

fn run_fit(a: FitArgs) -> anyhow::Result<()> {
    let mut ds = load_labelled(&a.intervals, &a.labels)?;
    if a.binarize {
        ds.binarize_values();
    }
    println!("{}", ds.stats());
    let config = FitConfig { num_features: a.features, num_dilations: a.dilations, seed: a.seed };
    let mut model = train(&ds, &config)?;
    model.binarize = a.binarize;
    println!(
        "model: {} features, {} dilations, alpha {:.4}, LOO residual {:.4}",
        model.feature.num_features(),
        model.feature.num_dilations(),
        model.ridge.alpha,
        model.ridge.loo_error,
    );
    model
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn run_predict(a: PredictArgs) -> anyhow::Result<()> {
    let model = TrainedModel::load(&a.model)
        .with_context(|| format!("loading {}", a.model.display()))?;
    let ds = match &a.labels {
        Some(labels) => load_labelled(&a.intervals, labels)?,
        None => load_intervals(&a.intervals)
            .with_context(|| format!("loading {}", a.intervals.display()))?,
    };
    let (predicted, report) = predict(&model, &ds)?;
    warn_report(&report);
    println!("seq_id,label");
    for (seq, label) in ds.sequences.iter().zip(&predicted) {
        println!("{},{}", seq.id, label);
    }
    if a.labels.is_some() {
        let correct = predicted.iter().zip(&ds.labels).filter(|(p, t)| p == t).count();
        println!(
            "accuracy: {:.4} ({}/{})",
            accuracy(&predicted, &ds.labels),
            correct,
            ds.len()
        );
    }
    Ok(())
}

fn run_cv(a: CvArgs) -> anyhow::Result<()> {
    let mut ds = load_labelled(&a.intervals, &a.labels)?;
    if a.binarize {
        ds.binarize_values();
    }
    if a.permute {
        ds = permute_labels(&ds, a.seed);
        println!("labels permuted; accuracies below measure chance");
    }
    let config = FitConfig { num_features: a.features, num_dilations: a.dilations, seed: a.seed };
    let report = crossvalidate(&ds, &config, a.folds, a.repeats)?;
    println!("{report}");
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn run_synth(a: SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        classes: a.classes,
        samples_per_class: a.samples_per_class,
        channels: a.channels,
        max_duration: a.max_duration,
        events_per_sequence: a.events,
        signal: a.signal,
        signal_strength: a.strength,
        integer: a.integer,
        seed: a.seed,
    };
    let ds = synth(&spec)?;
    let prefix = a.out_prefix.as_os_str().to_string_lossy();
    let iv_path = PathBuf::from(format!("{prefix}_intervals.csv"));
    let lb_path = PathBuf::from(format!("{prefix}_labels.csv"));
    let iv = fs::File::create(&iv_path)
        .with_context(|| format!("creating {}", iv_path.display()))?;
    write_intervals_csv(&ds, std::io::BufWriter::new(iv))?;
    let lb = fs::File::create(&lb_path)
        .with_context(|| format!("creating {}", lb_path.display()))?;
    write_labels_csv(&ds, std::io::BufWriter::new(lb))?;
    println!("{}", ds.stats());
    println!("wrote {} and {}", iv_path.display(), lb_path.display());
    Ok(())
}

/// Sequence ids come from user CSV and become file names; keep them tame.
fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

fn run_rasterize(a: RasterizeArgs) -> anyhow::Result<()> {
    if !(a.step.is_finite() && a.step > 0.0) {
        anyhow::bail!("step must be positive, got {}", a.step);
    }
    let ds = load_intervals(&a.intervals)
        .with_context(|| format!("loading {}", a.intervals.display()))?;
    let t_max = ds.max_end();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut rows = 0usize;
    for seq in &ds.sequences {
        let m = rasterize(seq, ds.num_channels, a.step, t_max)?;
        rows = m.num_rows;
        let path = a.out.join(format!("{}.csv", safe_file_stem(&seq.id)));
        let mut body = String::from("t");
        for c in 0..m.num_channels {
            body.push_str(&format!(",ch{c}"));
        }
        body.push('\n');
        for r in 0..m.num_rows {
            body.push_str(&format!("{}", r as f64 * a.step));
            for c in 0..m.num_channels {
                body.push_str(&format!(",{}", m.get(r, c)));
            }
            body.push('\n');
        }
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "wrote {} raster(s), {} rows x {} channels each, to {}",
        ds.len(),
        rows,
        ds.num_channels,
        a.out.display()
    );
    Ok(())
}

fn run_oracle(a: OracleArgs) -> anyhow::Result<()> {
    let ds = load_labelled(&a.intervals, &a.labels)?;
    let config = FitConfig { num_features: a.features, num_dilations: a.dilations, seed: a.seed };
    let model = fit(&ds, &config)?;
    let exact_expected = model.integer_mode && a.step == 1.0;
    let report = oracle_compare(&ds, &model, a.step)?;
    println!(
        "checked {} features per sequence over {} sequence(s) at step {}",
        report.features_checked / ds.len().max(1),
        ds.len(),
        a.step
    );
    println!("max |exact - discrete| = {:.3e}", report.max_abs_diff);
    if exact_expected {
        println!("integer data at unit step: the two paths must agree to rounding error");
    }
    Ok(())
}

fn run_bench(a: BenchArgs) -> anyhow::Result<()> {
    let cfg = BenchConfig {
        sequences: a.sequences,
        channels: a.channels,
        events: a.events,
        num_features: a.features,
        num_dilations: a.dilations,
        runs: a.runs,
        seed: a.seed,
    };
    let report = bench(&cfg)?;
    println!("{report}");
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
