//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it with in-memory writers.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error.

use std::error::Error;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datagen::{self, GenConfig};
use crate::dataio;
use crate::evaluation::{self, HandFilter, LoocvOptions, ModelConfig};
use crate::geometry::{self, NormalizationConfig};
use crate::gradcheck::{self, BackwardFn, GradCheckConfig};
use crate::nn;
use crate::par::Exec;
use crate::skeleton::{GestureSequence, FEATURE_WIDTH};
use crate::training::{self, TrainConfig};
use crate::EvalError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

type CmdResult = Result<i32, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "signrec", version, about = "Skeleton gesture recognition with normalized LSTM features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic gesture dataset.
    Generate(GenerateArgs),
    /// Normalize every sequence of a dataset for position and facing.
    Normalize(NormalizeArgs),
    /// Train on all sequences of a dataset and write the model.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    Eval(EvalArgs),
    /// Leave-one-signer-out cross-validation.
    Loocv(LoocvArgs),
    /// Compare BPTT gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    signers: usize,
    #[arg(long, default_value_t = 9)]
    reps: usize,
    #[arg(long, default_value_t = 45)]
    frames: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fail on the first degenerate frame instead of passing it through.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HandArg {
    Single,
    Double,
    Combined,
}

impl From<HandArg> for HandFilter {
    fn from(h: HandArg) -> HandFilter {
        match h {
            HandArg::Single => HandFilter::Single,
            HandArg::Double => HandFilter::Double,
            HandArg::Combined => HandFilter::Combined,
        }
    }
}

#[derive(Debug, Args)]
struct DataFlags {
    #[arg(long)]
    data: PathBuf,
    /// Feed raw coordinates to the network.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, value_enum, default_value_t = HandArg::Combined)]
    hand: HandArg,
}

impl DataFlags {
    fn normalization(&self) -> Option<NormalizationConfig> {
        (!self.no_normalize).then(NormalizationConfig::default)
    }
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = nn::DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, default_value_t = nn::DEFAULT_LAYERS)]
    layers: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelFlags {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataFlags,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataFlags,
    #[arg(long)]
    model: PathBuf,
    /// Also print the confusion matrix (rows true, columns predicted).
    #[arg(long)]
    confusion: bool,
}

#[derive(Debug, Args)]
struct LoocvArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// Concurrent folds; defaults to fold count capped at available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Normalize(a) => cmd_normalize(&a, out),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Loocv(a) => cmd_loocv(&a, out, err),
        Command::Gradcheck(a) => run_gradcheck_with(a.seed, nn::backward, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> CmdResult {
    let config = GenConfig {
        num_classes: a.classes,
        num_signers: a.signers,
        reps_per_signer: a.reps,
        frames_per_gesture: a.frames,
        noise_sigma: a.noise,
        seed: a.seed,
        ..GenConfig::default()
    };
    let dataset = datagen::generate_dataset(&config)?;
    dataio::write_dataset(&dataset, &a.out)?;
    writeln!(out, "{} sequences written", dataset.len())?;
    Ok(EXIT_OK)
}

fn cmd_normalize(a: &NormalizeArgs, out: &mut dyn Write) -> CmdResult {
    let dataset = dataio::read_dataset(&a.input)?;
    let config = NormalizationConfig {
        strict: a.strict,
        ..NormalizationConfig::default()
    };
    let mut degenerate = 0usize;
    let mut normalized = Vec::with_capacity(dataset.len());
    for seq in &dataset {
        let (n, reports) = geometry::normalize_sequence(seq, &config).map_err(|e| {
            format!(
                "class {} signer {} repetition {}: {e}",
                seq.class_id, seq.signer_id, seq.repetition
            )
        })?;
        degenerate += reports.iter().filter(|r| r.degenerate).count();
        normalized.push(n);
    }
    dataio::write_dataset(&normalized, &a.out)?;
    writeln!(
        out,
        "{} sequences normalized, {degenerate} degenerate frames",
        normalized.len()
    )?;
    Ok(EXIT_OK)
}

fn load_labeled(
    flags: &DataFlags,
) -> Result<(Vec<GestureSequence>, HandFilter), Box<dyn Error>> {
    let dataset = dataio::read_dataset(&flags.data)?;
    Ok((dataset, flags.hand.into()))
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (dataset, filter) = load_labeled(&a.data)?;
    let set = evaluation::filter_and_relabel(&dataset, filter);
    if set.class_ids.len() < 2 {
        return Err(EvalError::InsufficientClasses(set.class_ids.len()).into());
    }
    let samples = evaluation::prepare_samples(&set, a.data.normalization().as_ref(), Exec::default())?;
    let config = a.model.train_config();
    let init = nn::init_params(
        set.class_ids.len(),
        FEATURE_WIDTH,
        a.model.hidden,
        a.model.layers,
        a.model.seed,
    )?;
    writeln!(
        err,
        "training on {} sequences, {} classes",
        samples.len(),
        set.class_ids.len()
    )?;
    let mut write_err = None;
    let (model, _) = training::train_with_progress(&samples, &config, &init, |epoch, stats| {
        if write_err.is_none() {
            if let Err(e) = writeln!(
                out,
                "epoch {} loss {:.6} acc {:.4}",
                epoch + 1,
                stats.mean_loss,
                stats.accuracy
            ) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    dataio::write_model(&model, &a.out)?;
    writeln!(err, "model written to {}", a.out.display())?;
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let model = dataio::read_model(&a.model)?;
    let (dataset, filter) = load_labeled(&a.data)?;
    let set = evaluation::filter_and_relabel(&dataset, filter);
    if model.num_classes() != set.class_ids.len() {
        return Err(format!(
            "model has {} classes but the {} data has {}",
            model.num_classes(),
            filter.as_str(),
            set.class_ids.len()
        )
        .into());
    }
    if model.input_size() != FEATURE_WIDTH {
        return Err(format!(
            "model expects {} input features, skeleton frames have {FEATURE_WIDTH}",
            model.input_size()
        )
        .into());
    }
    let samples = evaluation::prepare_samples(&set, a.data.normalization().as_ref(), Exec::default())?;
    let metrics = evaluation::evaluate(&model, &samples)?;
    writeln!(out, "accuracy {:.4}", metrics.accuracy)?;
    if a.confusion {
        write!(out, "{}", evaluation::render_confusion(&metrics.confusion))?;
    }
    Ok(EXIT_OK)
}

fn cmd_loocv(a: &LoocvArgs, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> CmdResult {
    let (dataset, filter) = load_labeled(&a.data)?;
    let folds = evaluation::split_loocv(&dataset)?.len();
    let jobs = match a.jobs {
        Some(0) => return Err("--jobs must be at least 1".into()),
        Some(j) => j,
        None => {
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            folds.min(cores).max(1)
        }
    };
    let exec = if jobs == 1 {
        Exec::Sequential
    } else {
        Exec::Parallel { jobs }
    };
    let opts = LoocvOptions {
        filter,
        normalize: a.data.normalization(),
        train: a.model.train_config(),
        model: ModelConfig {
            hidden: a.model.hidden,
            layers: a.model.layers,
            seed: a.model.seed,
        },
    };
    let err = Mutex::new(err);
    let progress = |line: &str| {
        if let Ok(mut w) = err.lock() {
            let _ = writeln!(w, "{line}");
        }
    };
    let report = evaluation::run_loocv_with(&dataset, &opts, exec, &progress)?;
    write!(out, "{}", evaluation::render_table(&report))?;
    Ok(EXIT_OK)
}

/// Gradient check with a caller-supplied backward pass. Prints the maximum
/// relative error; returns exit code 1 if it reaches the threshold.
pub fn run_gradcheck_with(seed: u64, backward: BackwardFn, out: &mut dyn Write) -> CmdResult {
    let report = gradcheck::run_with(&GradCheckConfig::default(), seed, backward)?;
    if report.passed() {
        writeln!(
            out,
            "max rel err {:.3e} < {:.0e} ({} parameters, worst {})",
            report.max_rel_err,
            gradcheck::MAX_REL_ERR,
            report.checked,
            report.worst
        )?;
        Ok(EXIT_OK)
    } else {
        writeln!(
            out,
            "max rel err {:.3e} >= {:.0e}",
            report.max_rel_err,
            gradcheck::MAX_REL_ERR
        )?;
        Err(format!(
            "gradient check failed at {}: analytic {:e} numeric {:e}",
            report.worst, report.analytic, report.numeric
        )
        .into())
    }
}
