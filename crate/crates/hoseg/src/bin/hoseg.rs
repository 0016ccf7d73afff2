//! Scripted entry point: every toolkit operation as a subcommand, exit 0 on
//! success, 1 on runtime errors (with a JSON error summary on stderr), 2 on
//! usage errors. Flags can also come from `HOSEG_*` environment variables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hoseg::ccda::reference::{DiffusionInpainter, HistogramEmbedder};
use hoseg::ccda::{build_background_pool, generate_augmented_set, AugmentConfig, BackgroundPool};
use hoseg::dataio::{
    load_rgb, sample_frames, validate_dataset, DatasetManifest, FrameSampleSpec, Split,
};
use hoseg::eval::{
    config_hash, evaluate_run, run_ablation, sweep_augmentation_quantity, AblationDataset,
    AblationPlan, Prediction, RunMetadata,
};
use hoseg::handstate::{
    load_state_annotations, load_state_net, save_state_net, state_metrics,
    train_state_classifier, StateExample, StateInputMode, StateTrainConfig,
};
use hoseg::mask::{generate_contact_boundary, io as maskio, PairingPolicy, DEFAULT_CB_RADIUS};
use hoseg::pipeline::{
    load_sequential, run_sequential_inference, save_sequential, train_sequential_pipeline,
    LoadedDataset, Tensor, TrainConfig, DEFAULT_BOUNDARY_THRESHOLD,
};

#[derive(Parser)]
#[command(name = "hoseg", version, about = "Egocentric hand-object segmentation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Seed for anything randomized.
    #[arg(long, global = true, env = "HOSEG_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, env = "HOSEG_OUT")]
    out: Option<PathBuf>,
    /// Verbose progress output.
    #[arg(short, long, global = true, env = "HOSEG_VERBOSE", default_value_t = false)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check every manifest entry: files exist, class ids legal, dimensions match.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Manifest file (TSV; paths relative to its directory).
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
    },
    /// Print sparsely sampled frame indices (one per interval).
    SampleFrames {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of frames in the sequence.
        #[arg(long)]
        n_frames: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Sampling interval in seconds.
        #[arg(long, default_value_t = 3.0)]
        interval: f64,
    },
    /// Generate contact-boundary pseudo-labels into `<root>/cb/`.
    GenCb {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        /// Dilation radius in pixels.
        #[arg(long, env = "HOSEG_RADIUS", default_value_t = DEFAULT_CB_RADIUS)]
        radius: u32,
        /// Pair every hand with every object class instead of side-matched pairs.
        #[arg(long, default_value_t = false)]
        all_pairs: bool,
    },
    /// Build a clean-background pool from frames and/or inpainted labeled images.
    BuildPool {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory of candidate frames (every readable image is considered).
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Labeled manifest whose entries get hand/object regions inpainted out.
        #[arg(long)]
        labeled: Option<PathBuf>,
    },
    /// Generate composite training images under `<root>/aug/`.
    Augment {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        /// Background pool directory (from build-pool).
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, env = "HOSEG_TOPK", default_value_t = 10)]
        topk: usize,
        #[arg(long, env = "HOSEG_N_AUG", default_value_t = 16000)]
        n_aug: usize,
    },
    /// Train the sequential pipeline (hand, boundary, object) on the train split.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        /// Training recipe TOML (strict keys); defaults otherwise.
        #[arg(long, env = "HOSEG_CONFIG")]
        config: Option<PathBuf>,
        /// Skip the contact-boundary stage (object stage takes 5 channels).
        #[arg(long, default_value_t = false)]
        no_cb: bool,
        #[arg(long, env = "HOSEG_RADIUS", default_value_t = DEFAULT_CB_RADIUS)]
        radius: u32,
    },
    /// Run sequential inference over a manifest split, writing label and cb maps.
    Infer {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        /// Checkpoint directory (from train).
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = DEFAULT_BOUNDARY_THRESHOLD)]
        threshold: f64,
    },
    /// Score a prediction directory against a manifest split.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        /// Directory holding `label/*.png` (+ optional `cb/*.png`) predictions.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        #[arg(long, env = "HOSEG_RADIUS", default_value_t = DEFAULT_CB_RADIUS)]
        radius: u32,
    },
    /// Train + evaluate the decode/CB/CCDA ablation grid.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        #[arg(long, env = "HOSEG_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "HOSEG_RADIUS", default_value_t = DEFAULT_CB_RADIUS)]
        radius: u32,
    },
    /// Sweep the number of composites used on top of the train split.
    SweepAug {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        #[arg(long, env = "HOSEG_CONFIG")]
        config: Option<PathBuf>,
        /// Ascending list of composite counts, e.g. 0,1000,2000.
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        #[arg(long, env = "HOSEG_RADIUS", default_value_t = DEFAULT_CB_RADIUS)]
        radius: u32,
    },
    /// Train the per-hand state classifier.
    StateTrain {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        /// Annotation TSV: basename, left state, right state.
        #[arg(long)]
        states: PathBuf,
        #[arg(long, env = "HOSEG_MODE", value_parser = StateInputMode::parse, default_value = "rgb+hand")]
        mode: StateInputMode,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
    },
    /// Evaluate a trained state classifier.
    StateEval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "HOSEG_MANIFEST")]
        manifest: PathBuf,
        #[arg(long)]
        states: PathBuf,
        /// Classifier checkpoint (from state-train).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, env = "HOSEG_MODE", value_parser = StateInputMode::parse, default_value = "rgb+hand")]
        mode: StateInputMode,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).map_err(|e| e.to_string())
}

fn load_train_config(path: &Option<PathBuf>, seed: u64) -> hoseg::Result<TrainConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| hoseg::Error::io(p, e))?;
            TrainConfig::from_toml_str(&text)?
        }
        None => TrainConfig::default(),
    };
    config.seed = seed;
    Ok(config)
}

fn out_dir(common: &CommonArgs, default: &Path) -> PathBuf {
    common.out.clone().unwrap_or_else(|| default.to_path_buf())
}

fn entry_basename(entry: &hoseg::dataio::ManifestEntry) -> String {
    entry
        .label
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run(cli: Cli) -> hoseg::Result<i32> {
    match cli.command {
        Command::Validate { common, manifest } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let report = validate_dataset(&manifest)?;
            for entry in report.failures() {
                println!(
                    "FAIL {}: {}",
                    entry.image.display(),
                    entry.failures.join("; ")
                );
            }
            println!(
                "checked {} entries, {} failures",
                report.checked,
                report.failures().count()
            );
            if common.verbose {
                for e in &report.entries {
                    if e.failures.is_empty() {
                        println!("ok {}", e.image.display());
                    }
                }
            }
            Ok(if report.is_ok() { 0 } else { 1 })
        }
        Command::SampleFrames {
            n_frames,
            fps,
            interval,
            ..
        } => {
            let spec = FrameSampleSpec {
                interval_seconds: interval,
                fps,
            };
            for idx in sample_frames(n_frames, &spec, None)? {
                println!("{idx}");
            }
            Ok(0)
        }
        Command::GenCb {
            common,
            manifest,
            radius,
            all_pairs,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let cb_dir = out_dir(&common, &manifest.root.join("cb"));
            std::fs::create_dir_all(&cb_dir).map_err(|e| hoseg::Error::io(&cb_dir, e))?;
            let pairing = if all_pairs {
                PairingPolicy::AllPairs
            } else {
                PairingPolicy::HandSpecific
            };
            for entry in &manifest.entries {
                let (_, labels) = manifest.load_entry(entry)?;
                let cb = generate_contact_boundary(&labels, radius, pairing)?;
                let path = cb_dir.join(format!("{}.png", entry_basename(entry)));
                maskio::save_boundary(&cb, &path)?;
                if common.verbose {
                    println!("wrote {}", path.display());
                }
            }
            println!(
                "wrote {} boundary maps to {}",
                manifest.entries.len(),
                cb_dir.display()
            );
            Ok(0)
        }
        Command::BuildPool {
            common,
            frames,
            labeled,
        } => {
            let mut frame_images = Vec::new();
            if let Some(dir) = frames {
                let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
                    .map_err(|e| hoseg::Error::io(&dir, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .collect();
                names.sort();
                for path in names {
                    if let Ok(img) = load_rgb(&path) {
                        frame_images.push((path.display().to_string(), img));
                    }
                }
            }
            let labeled_manifest = match &labeled {
                Some(p) => Some(DatasetManifest::load(p)?),
                None => None,
            };
            // No learned hand classifier ships with the toolkit: raw frames
            // are trusted to be clean, inpainted entries are cleaned anyway.
            let accept_all = |_: &image::RgbImage| false;
            let pool = build_background_pool(
                &frame_images,
                &accept_all,
                &DiffusionInpainter::default(),
                labeled_manifest.as_ref(),
                &HistogramEmbedder,
            )?;
            let dir = out_dir(&common, Path::new("pool"));
            pool.save(&dir)?;
            println!("pool of {} backgrounds at {}", pool.len(), dir.display());
            Ok(0)
        }
        Command::Augment {
            common,
            manifest,
            pool,
            topk,
            n_aug,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let pool = BackgroundPool::load(&pool)?;
            let config = AugmentConfig {
                topk,
                n_total: n_aug,
                seed: common.seed,
                options: Default::default(),
            };
            let outcome = generate_augmented_set(
                &manifest,
                &pool,
                &HistogramEmbedder,
                &DiffusionInpainter::default(),
                &config,
            )?;
            println!(
                "wrote {} composites under {} ({} failures)",
                outcome.manifest.entries.len(),
                manifest.root.join("aug").display(),
                outcome.failures.len()
            );
            for (idx, msg) in &outcome.failures {
                eprintln!("failed foreground {idx}: {msg}");
            }
            Ok(0)
        }
        Command::Train {
            common,
            manifest,
            config,
            no_cb,
            radius,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let config = load_train_config(&config, common.seed)?;
            let data = LoadedDataset::from_manifest(&manifest, Split::Train, radius, config.ccda)?;
            let (nets, curves) = train_sequential_pipeline(&data, &config, !no_cb)?;
            let dir = out_dir(&common, Path::new("checkpoints"));
            save_sequential(&nets, &dir)?;
            for (stage, curve) in &curves {
                let path = dir.join(format!("{}_loss.csv", stage.name()));
                curve.save_csv(&path)?;
                if common.verbose {
                    println!(
                        "{}: final loss {:.6}",
                        stage.name(),
                        curve.final_loss().unwrap_or(f64::NAN)
                    );
                }
            }
            let config_path = dir.join("train_config.toml");
            std::fs::write(&config_path, config.to_toml_string())
                .map_err(|e| hoseg::Error::io(&config_path, e))?;
            println!("checkpoints and loss curves at {}", dir.display());
            Ok(0)
        }
        Command::Infer {
            common,
            manifest,
            checkpoints,
            split,
            threshold,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let preds = load_sequential(&checkpoints)?;
            let dir = out_dir(&common, Path::new("predictions"));
            let label_dir = dir.join("label");
            let cb_out = dir.join("cb");
            std::fs::create_dir_all(&label_dir).map_err(|e| hoseg::Error::io(&label_dir, e))?;
            std::fs::create_dir_all(&cb_out).map_err(|e| hoseg::Error::io(&cb_out, e))?;
            let mut n = 0;
            for entry in manifest.split_entries(split) {
                let image = load_rgb(&manifest.image_path(entry))?;
                let (labels, cb) = run_sequential_inference(&image, &preds, threshold)?;
                let basename = entry_basename(entry);
                maskio::save_label_map(&labels, &label_dir.join(format!("{basename}.png")))?;
                if let Some(cb) = cb {
                    maskio::save_boundary(&cb, &cb_out.join(format!("{basename}.png")))?;
                }
                n += 1;
            }
            println!("wrote {n} predictions under {}", dir.display());
            Ok(0)
        }
        Command::Eval {
            common,
            manifest,
            pred,
            split,
            radius,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let mut predictions = Vec::new();
            for entry in manifest.split_entries(split) {
                let basename = entry_basename(entry);
                let label_path = pred.join("label").join(format!("{basename}.png"));
                if !label_path.exists() {
                    continue; // counted as missing by evaluate_run
                }
                let labels = maskio::load_label_map(&label_path, None, None)?;
                let cb_path = pred.join("cb").join(format!("{basename}.png"));
                let boundary = if cb_path.exists() {
                    Some(maskio::load_boundary(&cb_path)?)
                } else {
                    None
                };
                predictions.push(Prediction {
                    basename,
                    labels,
                    boundary,
                });
            }
            let metadata = RunMetadata {
                config_hash: config_hash(&format!("eval|{}|{radius}", split.as_str())),
                seed: common.seed,
                dataset_id: manifest
                    .root
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into()),
            };
            let report = evaluate_run(&predictions, &manifest, split, radius, metadata)?;
            print!("{}", report.metrics.render_table());
            if !report.missing_predictions.is_empty() {
                println!(
                    "missing predictions (scored all-background): {}",
                    report.missing_predictions.join(", ")
                );
            }
            let dir = report.write_under(&out_dir(&common, Path::new(".")))?;
            println!("report written to {}", dir.display());
            Ok(0)
        }
        Command::Ablate {
            common,
            manifest,
            config,
            radius,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let config = load_train_config(&config, common.seed)?;
            let data = AblationDataset::from_manifest(&manifest, radius)?;
            let table = run_ablation(
                &AblationPlan::full_grid(),
                &data,
                &config,
                radius,
                DEFAULT_BOUNDARY_THRESHOLD,
            )?;
            print!("{}", table.render_table());
            let dir = out_dir(&common, Path::new("."));
            std::fs::create_dir_all(&dir).map_err(|e| hoseg::Error::io(&dir, e))?;
            let path = dir.join("ablation.txt");
            std::fs::write(&path, table.render_table()).map_err(|e| hoseg::Error::io(&path, e))?;
            for (cell, outcome) in &table.rows {
                if let hoseg::eval::CellOutcome::Report(r) = outcome {
                    r.write_under(&dir)?;
                }
                if common.verbose {
                    println!("cell {} done", cell.name());
                }
            }
            println!("table written to {}", path.display());
            Ok(0)
        }
        Command::SweepAug {
            common,
            manifest,
            config,
            counts,
            radius,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let config = load_train_config(&config, common.seed)?;
            let data = AblationDataset::from_manifest(&manifest, radius)?;
            let curve = sweep_augmentation_quantity(
                &counts,
                &data,
                &config,
                radius,
                DEFAULT_BOUNDARY_THRESHOLD,
            )?;
            print!("{}", curve.to_csv_string());
            for (n, msg) in &curve.failures {
                eprintln!("point {n} failed: {msg}");
            }
            let dir = out_dir(&common, Path::new("."));
            std::fs::create_dir_all(&dir).map_err(|e| hoseg::Error::io(&dir, e))?;
            let path = dir.join("aug_sweep.csv");
            curve.save_csv(&path)?;
            println!("curve written to {}", path.display());
            Ok(0)
        }
        Command::StateTrain {
            common,
            manifest,
            states,
            mode,
            epochs,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let annotations = load_state_annotations(&states)?;
            let examples = state_examples(&manifest, &annotations, Split::Train, mode)?;
            let config = StateTrainConfig {
                epochs,
                seed: common.seed,
                ..Default::default()
            };
            let (net, logs) = train_state_classifier(&examples, mode, &config)?;
            let dir = out_dir(&common, Path::new("state_checkpoints"));
            std::fs::create_dir_all(&dir).map_err(|e| hoseg::Error::io(&dir, e))?;
            save_state_net(&net, &dir.join("state.ckpt"))?;
            let mut log_text = String::from("epoch,loss,left_accuracy,right_accuracy\n");
            for l in &logs {
                log_text.push_str(&format!(
                    "{},{},{},{}\n",
                    l.epoch, l.loss, l.left_accuracy, l.right_accuracy
                ));
            }
            let log_path = dir.join("train_log.csv");
            std::fs::write(&log_path, log_text).map_err(|e| hoseg::Error::io(&log_path, e))?;
            if let Some(last) = logs.last() {
                println!(
                    "final train accuracy left {:.4} right {:.4}",
                    last.left_accuracy, last.right_accuracy
                );
            }
            println!("classifier at {}", dir.display());
            Ok(0)
        }
        Command::StateEval {
            common,
            manifest,
            states,
            checkpoint,
            mode,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let annotations = load_state_annotations(&states)?;
            let net = load_state_net(&checkpoint)?;
            if net.in_channels() != mode.channels() {
                return Err(hoseg::Error::invalid(format!(
                    "checkpoint expects {} channels but mode {} provides {}",
                    net.in_channels(),
                    mode.as_str(),
                    mode.channels()
                )));
            }
            let examples = state_examples(&manifest, &annotations, Split::Test, mode)?;
            let mut pred = Vec::new();
            let mut truth = Vec::new();
            for example in &examples {
                let input = hoseg::handstate::build_state_input(
                    &example.image,
                    mode,
                    example.labels.as_ref(),
                )?;
                pred.push(net.predict(&input)?);
                truth.push(example.truth);
            }
            let report = state_metrics(&pred, &truth)?;
            println!(
                "left : accuracy {:.4} macro-P {:.4} macro-R {:.4} macro-F1 {:.4}",
                report.left.accuracy,
                report.left.macro_precision,
                report.left.macro_recall,
                report.left.macro_f1
            );
            println!(
                "right: accuracy {:.4} macro-P {:.4} macro-R {:.4} macro-F1 {:.4}",
                report.right.accuracy,
                report.right.macro_precision,
                report.right.macro_recall,
                report.right.macro_f1
            );
            let dir = out_dir(&common, Path::new("."));
            std::fs::create_dir_all(&dir).map_err(|e| hoseg::Error::io(&dir, e))?;
            let path = dir.join("state_report.json");
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            std::fs::write(&path, json).map_err(|e| hoseg::Error::io(&path, e))?;
            println!("report written to {}", path.display());
            Ok(0)
        }
    }
}

/// Join manifest entries with state annotations by basename and build
/// classifier examples for one split.
fn state_examples(
    manifest: &DatasetManifest,
    annotations: &[(String, hoseg::handstate::HandStatePair)],
    split: Split,
    mode: StateInputMode,
) -> hoseg::Result<Vec<StateExample>> {
    let by_name: std::collections::HashMap<&str, hoseg::handstate::HandStatePair> =
        annotations.iter().map(|(n, p)| (n.as_str(), *p)).collect();
    let mut examples = Vec::new();
    for entry in manifest.split_entries(split) {
        let basename = entry_basename(entry);
        let Some(&truth) = by_name.get(basename.as_str()) else {
            continue;
        };
        let (image, labels) = manifest.load_entry(entry)?;
        examples.push(StateExample {
            image: Tensor::from_rgb(&image),
            labels: (mode != StateInputMode::Rgb).then_some(labels),
            truth,
        });
    }
    if examples.is_empty() {
        return Err(hoseg::Error::invalid(format!(
            "no {split} entries with state annotations"
        )));
    }
    Ok(examples)
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with 2 on usage errors
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
