//! Command-line front end. Exit codes: 0 success, 2 input error,
//! 3 scaling or shape error, 4 numeric divergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::arch::{thousands, ArchitectureSpec, Preset, ScaleFactors};
use crate::data::{load_index, split, synth_generate, Dataset};
use crate::error::Error;
use crate::metrics::{auc, history_read, history_write, roc_csv, roc_parse, RocCurve};
use crate::model::Model;
use crate::optim::AdamHyper;
use crate::plot::{accuracy_svg, loss_svg, roc_svg};
use crate::tensor::thread_count;
use crate::train::{evaluate, train, TrainConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SHAPE: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "scalelab", version, about = "CNN scaling laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScaleFlags {
    /// Width multiplier for conv filters and hidden dense units.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Number of copies of each convolution.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Input resolution multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
}

impl ScaleFlags {
    fn factors(&self) -> ScaleFactors {
        ScaleFactors {
            width: self.width,
            depth: self.depth,
            resolution: self.resolution,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the layer table of a preset or architecture file.
    Summary {
        #[arg(long)]
        arch: String,
        #[command(flatten)]
        scale: ScaleFlags,
    },
    /// Apply scaling factors to an architecture and write the result.
    Scale {
        #[arg(long)]
        base: String,
        #[command(flatten)]
        scale: ScaleFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Evaluate a saved model on a labelled dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Labels CSV; defaults to DATA/labels.csv.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the synthetic two-class texture corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Images per class.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 36)]
        res: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render SVG plots for a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub arch: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Validation split size; defaults to a tenth of the dataset.
    #[arg(long)]
    pub val_count: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Shape(_) | Error::InvalidShape(_) | Error::InvalidFactor(_) => EXIT_SHAPE,
        Error::Divergence { .. } | Error::Numeric(_) => EXIT_DIVERGED,
        _ => EXIT_INPUT,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

fn input(err: Error) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: err.to_string(),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Error::io(path, e).into()
}

/// Preset name or architecture file path.
pub fn resolve_arch(name: &str) -> crate::Result<ArchitectureSpec> {
    if let Some(preset) = Preset::from_name(name) {
        return preset.build();
    }
    let path = Path::new(name);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return ArchitectureSpec::from_text(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{name} {location}"),
                message,
            },
            other => other,
        });
    }
    let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
    Err(Error::InvalidConfig(format!(
        "`{name}` is neither a preset ({}) nor an architecture file",
        names.join(", ")
    )))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(io(path))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    threads: usize,
    train_count: usize,
    val_count: usize,
    flags: &'a TrainArgs,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Summary { arch, scale } => {
            let spec = resolve_arch(&arch).map_err(input)?;
            let spec = spec.scale_compound(scale.factors())?;
            let summary = spec.infer_shapes()?;
            let _ = write!(out, "{}", summary.to_table());
            Ok(())
        }
        Command::Scale { base, scale, out: path } => {
            let spec = resolve_arch(&base).map_err(input)?;
            let before = spec.total_params()?;
            let scaled = spec.scale_compound(scale.factors())?;
            let after = scaled.total_params()?;
            write_file(&path, scaled.to_text())?;
            let _ = writeln!(out, "before: {} parameters", thousands(before));
            let _ = writeln!(out, "after: {} parameters", thousands(after));
            let _ = writeln!(out, "wrote {}", path.display());
            Ok(())
        }
        Command::Train(args) => cmd_train(args, out),
        Command::Evaluate {
            model,
            data,
            labels,
            batch,
            out: dir,
        } => {
            let mut m = Model::load(&model).map_err(input)?;
            let csv = labels.unwrap_or_else(|| data.join("labels.csv"));
            let index = load_index(&data, &csv).map_err(input)?;
            let ds = Dataset::load(&index, m.arch().input).map_err(input)?;
            let ev = evaluate(&mut m, &ds, batch.max(1))?;
            let report = ev.report()?;
            fs::create_dir_all(&dir).map_err(io(&dir))?;
            write_file(&dir.join("metrics.txt"), report.to_text())?;
            write_roc(&dir, report.roc.as_ref())?;
            let _ = writeln!(
                out,
                "samples {} loss {:.6} accuracy {:.6} auc {}",
                ds.len(),
                report.loss,
                report.accuracy(),
                report.roc.as_ref().map_or("undefined".into(), |r| format!("{:.6}", r.auc))
            );
            Ok(())
        }
        Command::Synth { out: dir, n, res, seed } => {
            let index = synth_generate(n, res, seed, &dir).map_err(input)?;
            let _ = writeln!(out, "wrote {} images and labels.csv to {}", index.len(), dir.display());
            Ok(())
        }
        Command::Report { run } => cmd_report(&run, out),
    }
}

fn write_roc(dir: &Path, curve: Option<&RocCurve>) -> Result<(), Failure> {
    let text = curve.map_or_else(|| "fpr,tpr\n".to_string(), roc_csv);
    write_file(&dir.join("roc.csv"), text)
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let arch = resolve_arch(&args.arch).map_err(input)?;
    arch.validate().map_err(input)?;
    let csv = args.data.join("labels.csv");
    let index = load_index(&args.data, &csv).map_err(input)?;
    let val_count = args
        .val_count
        .unwrap_or_else(|| ((index.len() as f64 * 0.1).round() as usize).max(1));
    if val_count >= index.len() {
        return Err(input(Error::InvalidSplit {
            train: index.len().saturating_sub(val_count),
            val: val_count,
            available: index.len(),
        }));
    }
    let (train_idx, val_idx) =
        split(&index, index.len() - val_count, val_count, args.seed).map_err(input)?;
    let train_ds = Dataset::load(&train_idx, arch.input).map_err(input)?;
    let val_ds = Dataset::load(&val_idx, arch.input).map_err(input)?;

    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
        adam: AdamHyper::with_lr(args.lr),
        shuffle: true,
    };
    cfg.validate().map_err(input)?;
    let mut model = Model::build(&arch, args.seed)?;
    let _ = writeln!(
        out,
        "training {} ({} parameters) on {} images, validating on {}",
        arch.name,
        thousands(model.param_count()),
        train_ds.len(),
        val_ds.len()
    );
    let history = train(&mut model, &train_ds, &val_ds, &cfg, |r| {
        let _ = writeln!(
            out,
            "epoch {:>3}  train_loss {:.6}  train_acc {:.4}  val_loss {:.6}  val_acc {:.4}",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        );
    })?;

    let dir = &args.out;
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_file(&dir.join("arch.txt"), arch.to_text())?;
    model.save(&dir.join("model.bin"))?;
    history_write(&history, &dir.join("history.csv"))?;
    val_idx.write_labels(&dir.join("val_labels.csv"))?;
    let report = evaluate(&mut model, &val_ds, cfg.batch_size)?.report()?;
    write_file(&dir.join("metrics.txt"), report.to_text())?;
    write_roc(dir, report.roc.as_ref())?;
    let manifest = Manifest {
        tool: "scalelab",
        version: env!("CARGO_PKG_VERSION"),
        command: "train",
        threads: thread_count(),
        train_count: train_ds.len(),
        val_count: val_ds.len(),
        flags: &args,
    };
    let text = toml::to_string(&manifest).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot serialize manifest: {e}"),
    })?;
    write_file(&dir.join("manifest.toml"), text)?;
    if let Some(last) = history.last() {
        let _ = writeln!(
            out,
            "final: epoch {} train_loss {:.6} train_acc {:.4} val_loss {:.6} val_acc {:.4}",
            last.epoch, last.train_loss, last.train_accuracy, last.val_loss, last.val_accuracy
        );
    }
    let _ = writeln!(out, "run written to {}", dir.display());
    Ok(())
}

fn cmd_report(run: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let history_path = run.join("history.csv");
    let roc_path = run.join("roc.csv");
    let missing: Vec<String> = [&history_path, &roc_path]
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Failure {
            code: EXIT_INPUT,
            message: format!("run directory is missing: {}", missing.join(", ")),
        });
    }
    let history = history_read(&history_path).map_err(input)?;
    if history.is_empty() {
        return Err(Failure {
            code: EXIT_INPUT,
            message: format!("{} has no epochs", history_path.display()),
        });
    }
    let roc_text = fs::read_to_string(&roc_path).map_err(io(&roc_path))?;
    let points = roc_parse(&roc_text, &roc_path.display().to_string()).map_err(input)?;
    let plots = run.join("plots");
    fs::create_dir_all(&plots).map_err(io(&plots))?;
    write_file(&plots.join("accuracy.svg"), accuracy_svg(&history))?;
    write_file(&plots.join("loss.svg"), loss_svg(&history))?;
    let area = (points.len() >= 2).then(|| {
        auc(&RocCurve {
            points: points.clone(),
            auc: 0.0,
        })
    });
    write_file(&plots.join("roc.svg"), roc_svg(&points, area))?;
    let _ = writeln!(out, "wrote accuracy.svg, loss.svg, roc.svg to {}", plots.display());
    Ok(())
}
