use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use m2fusion::ccf::{fit_cca, fuse_sum};
use m2fusion::classify::{predict_batch, train_svm, SvmConfig};
use m2fusion::cnn::{
    extract_features, write_train_log, CnnModel, Tensor, TrainConfig, FEATURE_LAYER,
};
use m2fusion::imaging::{
    composite, make_sfi, make_signal_image, prewitt, read_depth_dir, read_inertial_csv,
    rescale_unit, write_pgm8, DEFAULT_MOTION_THRESHOLD, DEFAULT_SEGMENTS, SIGNAL_COLS,
};
use m2fusion::numerics::{Matrix, Ridge};
use m2fusion::pipeline::{
    encode_dataset, load_dataset, run_framework_with, synth_dataset, train_branch, write_dataset,
    Branch, FrameworkKind, PipelineConfig, RunReport, SplitSpec, SynthConfig,
};
use m2fusion::Result;

/// Multimodal depth + inertial action recognition.
#[derive(Parser)]
#[command(name = "m2fusion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic two-bit dataset (manifest, CSVs, PGM frames).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples_per_class: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode one inertial CSV window as a 24×52 signal image.
    EncodeSignal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        rate_hz: f64,
        /// First sample of the window; centred when omitted.
        #[arg(long)]
        start: Option<usize>,
        /// Store as 52×24 instead of 24×52.
        #[arg(long)]
        transpose: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write an 8-bit PGM preview.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Encode a directory of depth frames as sequential front-view images.
    EncodeSfi {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
        segments: usize,
        #[arg(long, default_value_t = DEFAULT_MOTION_THRESHOLD)]
        threshold: f64,
        /// Receives sfi_<k>.m2fm and sfi_<k>.pgm.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Prewitt-filter a matrix image.
    Prewitt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rescale the response to [0, 1].
        #[arg(long)]
        rescale: bool,
    },
    /// Green–magenta composite of an image and its filtered version.
    Composite {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        filtered: PathBuf,
        /// Receives r.m2fm, g.m2fm and b.m2fm.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train one extractor on every sample of a manifest.
    TrainCnn {
        #[arg(long)]
        manifest: PathBuf,
        /// sfi, prewitt-sfi, signal, prewitt-signal or composite.
        #[arg(long)]
        branch: String,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Tap a layer of a trained extractor for every sample of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        branch: String,
        #[arg(long, default_value = FEATURE_LAYER)]
        layer: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model_args: ModelArgs,
    },
    /// Fit CCA between two feature matrices and write the fused features.
    FitCcf {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Fixed ridge added to both covariance blocks; trace-relative when omitted.
        #[arg(long)]
        ridge: Option<f64>,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Write Z = X′ + Y′ here.
        #[arg(long)]
        fused: Option<PathBuf>,
    },
    /// Train the one-vs-all SVM on a feature matrix labelled by a manifest.
    TrainSvm {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1000)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a fusion framework over repeated random splits.
    Run {
        #[arg(long)]
        framework: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Receives <framework>.json and <framework>_confusion.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print a saved run report.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Print the confusion matrix CSV as well.
        #[arg(long)]
        confusion: bool,
    },
}

/// Extractor sizes and training schedule. Defaults to the desk-scale preset.
#[derive(Args, Clone)]
struct ModelArgs {
    /// Full-size extractors (50/100 filters, 500 hidden units, 64×64 SFIs).
    #[arg(long)]
    full_size: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    lr_drop_factor: Option<f64>,
    #[arg(long)]
    lr_drop_period: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
}

impl ModelArgs {
    fn config(&self) -> PipelineConfig {
        let mut cfg = if self.full_size {
            PipelineConfig::default()
        } else {
            PipelineConfig::desk()
        };
        for tc in [&mut cfg.signal.train, &mut cfg.depth.train] {
            self.apply(tc);
        }
        cfg
    }

    fn apply(&self, tc: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            tc.max_epochs = v;
        }
        if let Some(v) = self.lr {
            tc.initial_lr = v;
        }
        if let Some(v) = self.momentum {
            tc.momentum = v;
        }
        if let Some(v) = self.lr_drop_factor {
            tc.lr_drop_factor = v;
        }
        if let Some(v) = self.lr_drop_period {
            tc.lr_drop_period = v;
        }
        if let Some(v) = self.l2 {
            tc.l2 = v;
        }
        if let Some(v) = self.minibatch {
            tc.minibatch = v;
        }
    }
}

/// Encodes every sample of the manifest and returns one branch's images.
fn encoded_branch(manifest: &Path, branch: &str, cfg: &PipelineConfig) -> Result<Vec<Tensor>> {
    let branch: Branch = branch.parse()?;
    let data = load_dataset(manifest)?;
    let encoded = encode_dataset(&data, cfg)?;
    Ok(encoded.iter().map(|s| s.view(branch).clone()).collect())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            out,
            samples_per_class,
            noise,
            seed,
        } => {
            let cfg = SynthConfig {
                samples_per_class,
                noise,
                seed,
                ..SynthConfig::default()
            };
            let path = write_dataset(&synth_dataset(&cfg)?, &out)?;
            println!("{}", path.display());
        }
        Command::EncodeSignal {
            input,
            rate_hz,
            start,
            transpose,
            out,
            pgm,
        } => {
            let seq = read_inertial_csv(&input, rate_hz)?;
            let start = start.unwrap_or((seq.len() - SIGNAL_COLS) / 2);
            let img = make_signal_image(&seq, start)?;
            let pixels = if transpose {
                img.transposed()
            } else {
                img.into_pixels()
            };
            pixels.save(&out)?;
            if let Some(p) = pgm {
                write_pgm8(p, &pixels)?;
            }
        }
        Command::EncodeSfi {
            input,
            segments,
            threshold,
            out_dir,
        } => {
            let depth = read_depth_dir(&input)?;
            for sfi in make_sfi(&depth, segments, threshold)? {
                let k = sfi.segment_index;
                sfi.pixels.save(out_dir.join(format!("sfi_{k}.m2fm")))?;
                write_pgm8(out_dir.join(format!("sfi_{k}.pgm")), &sfi.pixels)?;
            }
        }
        Command::Prewitt {
            input,
            out,
            rescale,
        } => {
            let mut filtered = prewitt(&Matrix::load(&input)?)?;
            if rescale {
                filtered = rescale_unit(&filtered);
            }
            filtered.save(&out)?;
        }
        Command::Composite {
            base,
            filtered,
            out_dir,
        } => {
            let c = composite(&Matrix::load(&base)?, &Matrix::load(&filtered)?)?;
            for (name, plane) in ["r", "g", "b"].iter().zip(c.planes()) {
                plane.save(out_dir.join(format!("{name}.m2fm")))?;
            }
        }
        Command::TrainCnn {
            manifest,
            branch,
            out,
            log,
            model,
        } => {
            let cfg = model.config();
            let branch: Branch = branch.parse()?;
            let data = load_dataset(&manifest)?;
            let encoded = encode_dataset(&data, &cfg)?;
            let labels = data.labels();
            let all: Vec<usize> = (0..data.len()).collect();
            let (net, epochs) = train_branch(
                (&encoded, &labels, data.classes()),
                &all,
                branch,
                &cfg,
                model.train_seed,
            )?;
            net.save(&out)?;
            if let Some(p) = log {
                write_train_log(p, &epochs)?;
            }
            if let Some(last) = epochs.last() {
                println!(
                    "epoch {} loss {:.4} accuracy {:.3}",
                    last.epoch, last.train_loss, last.train_accuracy
                );
            }
        }
        Command::Extract {
            manifest,
            model,
            branch,
            layer,
            out,
            model_args,
        } => {
            let net = CnnModel::load(&model)?;
            let images = encoded_branch(&manifest, &branch, &model_args.config())?;
            extract_features(&net, &layer, &images)?.data.save(&out)?;
        }
        Command::FitCcf {
            x,
            y,
            ridge,
            dims,
            out,
            fused,
        } => {
            let (x, y) = (Matrix::load(&x)?, Matrix::load(&y)?);
            let ridge = ridge.map_or(Ridge::default(), Ridge::Fixed);
            let t = fit_cca(&x, &y, ridge, dims)?;
            t.save(&out)?;
            if let Some(p) = fused {
                fuse_sum(&t.project_x(&x)?, &t.project_y(&y)?)?.z.save(p)?;
            }
            let corr: Vec<String> = t.correlations.iter().map(|c| format!("{c:.4}")).collect();
            println!("correlations: {}", corr.join(" "));
        }
        Command::TrainSvm {
            features,
            manifest,
            c,
            epochs,
            seed,
            out,
        } => {
            let z = Matrix::load(&features)?;
            let labels = load_dataset(&manifest)?.labels();
            let svm = train_svm(&z, &labels, &SvmConfig { c, epochs, seed })?;
            let predicted = predict_batch(&svm, &z)?;
            let hits = predicted
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
            svm.save(&out)?;
            println!("training accuracy {:.3}", hits as f64 / labels.len() as f64);
        }
        Command::Run {
            framework,
            manifest,
            seed,
            repeats,
            train_fraction,
            out_dir,
            model,
        } => {
            let kind: FrameworkKind = framework.parse()?;
            let mut cfg = model.config();
            cfg.split = SplitSpec {
                train_fraction,
                repeats,
                seed,
            };
            let data = load_dataset(&manifest)?;
            let report = run_framework_with(kind, &data, &cfg, |r, o| {
                eprintln!(
                    "repeat {r}: accuracy {:.3} (depth {:.3}, inertial {:.3})",
                    o.accuracy, o.depth_accuracy, o.inertial_accuracy
                );
            })?;
            report.write(&out_dir, &kind.to_string())?;
            print!("{}", report.summary());
        }
        Command::Report { input, confusion } => {
            let report = RunReport::load(&input)?;
            print!("{}", report.summary());
            if confusion {
                print!("{}", report.confusion_csv());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
