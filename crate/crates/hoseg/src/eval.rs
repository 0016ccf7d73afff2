//! Benchmark runner: dataset evaluation reports, the decode/CB/CCDA
//! ablation grid, and augmentation-quantity sweeps.
//!
//! Reports derive from dataset-summed confusion counts. Missing predictions
//! are scored as all-background (and listed) instead of failing the run.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::dataio::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::mask::{
    generate_contact_boundary, ClassId, ContactBoundaryMap, LabelMap, PairingPolicy,
};
use crate::metrics::{binary_confusion, label_confusion, ConfusionCounts, MetricsReport};
use crate::pipeline::{
    run_parallel_on_tensor, run_sequential_on_tensor, train_parallel_decoder,
    train_sequential_pipeline, ConvNet, LoadedDataset, SequentialPredictors, Tensor, TrainConfig,
    TrainSample,
};

/// Entry labels of an evaluation report: the five foreground classes plus
/// the contact boundary.
pub const SEG_CLASSES: [ClassId; 5] = [
    ClassId::LeftHand,
    ClassId::RightHand,
    ClassId::LeftObject,
    ClassId::RightObject,
    ClassId::TwoHandObject,
];

pub const BOUNDARY_LABEL: &str = "boundary";

pub const HAND_LABELS: [&str; 2] = ["left-hand", "right-hand"];
pub const OBJECT_LABELS: [&str; 3] = ["left-hand-object", "right-hand-object", "two-hand-object"];

/// One predicted image, aligned to ground truth by basename.
pub struct Prediction {
    pub basename: String,
    pub labels: LabelMap,
    pub boundary: Option<ContactBoundaryMap>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct RunMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub dataset_id: String,
}

impl RunMetadata {
    pub fn run_id(&self) -> String {
        format!("{}-{}-s{}", self.dataset_id, self.config_hash, self.seed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub metrics: MetricsReport,
    pub metadata: RunMetadata,
    /// Basenames with no prediction, scored as all-background.
    pub missing_predictions: Vec<String>,
    pub images_evaluated: usize,
}

impl EvalReport {
    pub fn mean_iou(&self) -> f64 {
        self.metrics.mean_iou
    }

    pub fn hand_miou(&self) -> f64 {
        self.metrics.mean_iou_over(&HAND_LABELS)
    }

    pub fn object_miou(&self) -> f64 {
        self.metrics.mean_iou_over(&OBJECT_LABELS)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write `report.json` and `report.txt` under `runs/<run-id>/`.
    pub fn write_under(&self, out_root: &Path) -> Result<std::path::PathBuf> {
        let dir = out_root.join("runs").join(self.metadata.run_id());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let json_path = dir.join("report.json");
        std::fs::write(&json_path, self.to_json()).map_err(|e| Error::io(&json_path, e))?;
        let txt_path = dir.join("report.txt");
        std::fs::write(&txt_path, self.metrics.render_table())
            .map_err(|e| Error::io(&txt_path, e))?;
        Ok(dir)
    }
}

/// Stable FNV-1a hash of a config's canonical serialization, used in run ids.
pub fn config_hash(serialized: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in serialized.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn entry_basename(entry: &crate::dataio::ManifestEntry) -> String {
    entry
        .label
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Score a prediction set against a manifest split. Counts are summed over
/// the dataset before deriving metrics, so image order never matters.
pub fn evaluate_run(
    predictions: &[Prediction],
    truth: &DatasetManifest,
    split: Split,
    cb_radius: u32,
    metadata: RunMetadata,
) -> Result<EvalReport> {
    let by_name: HashMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.basename.as_str(), p))
        .collect();

    let entries = truth.split_entries(split);
    if entries.is_empty() {
        return Err(Error::invalid(format!("no {split} entries to evaluate")));
    }

    let mut seg_counts: Vec<[ConfusionCounts; 6]> = Vec::with_capacity(entries.len());
    let mut boundary_sum = ConfusionCounts::default();
    let mut any_boundary = false;
    let mut missing = Vec::new();

    for entry in entries {
        let (_, truth_labels) = truth.load_entry(entry)?;
        let basename = entry_basename(entry);
        let truth_cb =
            generate_contact_boundary(&truth_labels, cb_radius, PairingPolicy::HandSpecific)?;

        let (pred_labels, pred_cb) = match by_name.get(basename.as_str()) {
            Some(p) => (p.labels.clone(), p.boundary.clone()),
            None => {
                missing.push(basename.clone());
                (
                    LabelMap::new(truth_labels.width(), truth_labels.height())?,
                    None,
                )
            }
        };
        seg_counts.push(label_confusion(&pred_labels, &truth_labels)?);
        if let Some(cb) = &pred_cb {
            any_boundary = true;
            boundary_sum += binary_confusion(cb.mask(), truth_cb.mask())?;
        } else {
            // Absent boundary predictions score as empty maps.
            boundary_sum += binary_confusion(
                ContactBoundaryMap::empty(truth_labels.width(), truth_labels.height())?.mask(),
                truth_cb.mask(),
            )?;
        }
    }

    let mut labeled: Vec<(String, ConfusionCounts)> = SEG_CLASSES
        .iter()
        .map(|&class| {
            let mut sum = ConfusionCounts::default();
            for c in &seg_counts {
                sum += c[class.as_u8() as usize];
            }
            (class.name().to_string(), sum)
        })
        .collect();
    if any_boundary {
        labeled.push((BOUNDARY_LABEL.to_string(), boundary_sum));
    }

    Ok(EvalReport {
        metrics: MetricsReport::from_counts(labeled),
        metadata,
        missing_predictions: missing,
        images_evaluated: seg_counts.len(),
    })
}

/// Decode strategy of an ablation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecodeMode {
    Parallel,
    Sequential { with_cb: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AblationCell {
    pub decode: DecodeMode,
    pub ccda: bool,
}

impl AblationCell {
    pub fn name(&self) -> String {
        let base = match self.decode {
            DecodeMode::Parallel => "para-decode".to_string(),
            DecodeMode::Sequential { with_cb: false } => "seq-decode".to_string(),
            DecodeMode::Sequential { with_cb: true } => "seq-decode+cb".to_string(),
        };
        if self.ccda {
            format!("{base}+ccda")
        } else {
            base
        }
    }
}

/// The ablation grid over decode mode, contact boundary, and CCDA.
#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub cells: Vec<AblationCell>,
}

impl AblationPlan {
    /// The six-row grid: parallel and sequential decodes, each without and
    /// with CCDA, plus the boundary-conditioned sequential rows.
    pub fn full_grid() -> Self {
        let mut cells = Vec::new();
        for decode in [
            DecodeMode::Parallel,
            DecodeMode::Sequential { with_cb: false },
            DecodeMode::Sequential { with_cb: true },
        ] {
            for ccda in [false, true] {
                cells.push(AblationCell { decode, ccda });
            }
        }
        AblationPlan { cells }
    }
}

/// One held-out evaluation image.
pub struct EvalSample {
    pub basename: String,
    pub image: Tensor,
    pub labels: LabelMap,
}

/// In-memory data for ablations and sweeps: train samples, the augmentation
/// extension, and the held-out test set.
pub struct AblationDataset {
    pub train: LoadedDataset,
    pub train_aug: LoadedDataset,
    pub test: Vec<EvalSample>,
    pub dataset_id: String,
}

impl AblationDataset {
    pub fn from_manifest(manifest: &DatasetManifest, cb_radius: u32) -> Result<Self> {
        let train = LoadedDataset::from_manifest(manifest, Split::Train, cb_radius, false)?;
        let mut aug_samples = Vec::new();
        for entry in &manifest.entries {
            if entry.split == Split::Train && entry.aug.is_some() {
                let (image, labels) = manifest.load_entry(entry)?;
                aug_samples.push(TrainSample::from_parts(
                    Tensor::from_rgb(&image),
                    labels,
                    cb_radius,
                )?);
            }
        }
        let mut test = Vec::new();
        for entry in &manifest.entries {
            if entry.split == Split::Test {
                let (image, labels) = manifest.load_entry(entry)?;
                test.push(EvalSample {
                    basename: entry_basename(entry),
                    image: Tensor::from_rgb(&image),
                    labels,
                });
            }
        }
        Ok(AblationDataset {
            train,
            train_aug: LoadedDataset {
                samples: aug_samples,
            },
            test,
            dataset_id: manifest
                .root
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string()),
        })
    }

    fn train_for(&self, ccda: bool, limit_aug: Option<usize>) -> LoadedDataset {
        let mut samples = self.train.samples.clone();
        if ccda {
            let take = limit_aug.unwrap_or(self.train_aug.len());
            samples.extend(self.train_aug.samples.iter().take(take).cloned());
        }
        LoadedDataset { samples }
    }
}

/// Trained predictors of one cell.
pub enum CellNets {
    Sequential(SequentialPredictors<ConvNet>),
    Parallel(ConvNet),
}

fn evaluate_nets(
    nets: &CellNets,
    test: &[EvalSample],
    cb_radius: u32,
    threshold: f64,
    metadata: RunMetadata,
) -> Result<EvalReport> {
    let mut seg_counts = Vec::with_capacity(test.len());
    let mut boundary_sum = ConfusionCounts::default();
    let mut any_boundary = false;
    for sample in test {
        let (pred, cb) = match nets {
            CellNets::Sequential(preds) => {
                run_sequential_on_tensor(&sample.image, preds, threshold)?
            }
            CellNets::Parallel(net) => (run_parallel_on_tensor(&sample.image, net)?, None),
        };
        seg_counts.push(label_confusion(&pred, &sample.labels)?);
        if let Some(cb) = cb {
            any_boundary = true;
            let truth_cb = generate_contact_boundary(
                &sample.labels,
                cb_radius,
                PairingPolicy::HandSpecific,
            )?;
            boundary_sum += binary_confusion(cb.mask(), truth_cb.mask())?;
        }
    }
    if seg_counts.is_empty() {
        return Err(Error::invalid("no test samples"));
    }
    let mut labeled: Vec<(String, ConfusionCounts)> = SEG_CLASSES
        .iter()
        .map(|&class| {
            let mut sum = ConfusionCounts::default();
            for c in &seg_counts {
                sum += c[class.as_u8() as usize];
            }
            (class.name().to_string(), sum)
        })
        .collect();
    if any_boundary {
        labeled.push((BOUNDARY_LABEL.to_string(), boundary_sum));
    }
    Ok(EvalReport {
        metrics: MetricsReport::from_counts(labeled),
        metadata,
        missing_predictions: Vec::new(),
        images_evaluated: test.len(),
    })
}

/// Train the predictors a cell calls for and score them on the test set.
pub fn run_cell(
    cell: &AblationCell,
    data: &AblationDataset,
    train_config: &TrainConfig,
    cb_radius: u32,
    threshold: f64,
) -> Result<(CellNets, EvalReport)> {
    if cell.ccda && data.train_aug.is_empty() {
        return Err(Error::invalid(format!(
            "cell {} needs augmentation data but the manifest has none",
            cell.name()
        )));
    }
    let train_data = data.train_for(cell.ccda, None);
    let nets = match cell.decode {
        DecodeMode::Parallel => {
            let mut net = ConvNet::with_default_hidden(3, 6, train_config.seed);
            train_parallel_decoder(&mut net, &train_data, train_config)?;
            CellNets::Parallel(net)
        }
        DecodeMode::Sequential { with_cb } => {
            let (nets, _) = train_sequential_pipeline(&train_data, train_config, with_cb)?;
            CellNets::Sequential(nets)
        }
    };
    let metadata = RunMetadata {
        config_hash: config_hash(&format!("{}|{}", cell.name(), train_config.to_toml_string())),
        seed: train_config.seed,
        dataset_id: data.dataset_id.clone(),
    };
    let report = evaluate_nets(&nets, &data.test, cb_radius, threshold, metadata)?;
    Ok((nets, report))
}

pub enum CellOutcome {
    Report(EvalReport),
    Failed(String),
}

pub struct AblationTable {
    pub rows: Vec<(AblationCell, CellOutcome)>,
}

impl AblationTable {
    pub fn report_for(&self, cell: &AblationCell) -> Option<&EvalReport> {
        self.rows.iter().find_map(|(c, outcome)| match outcome {
            CellOutcome::Report(r) if c == cell => Some(r),
            _ => None,
        })
    }

    /// Aligned per-class IoU table matching the ablation grid.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}\n",
            "model", "left-hand", "right-hand", "l-object", "r-object", "2h-object", "mIoU"
        ));
        for (cell, outcome) in &self.rows {
            match outcome {
                CellOutcome::Report(r) => {
                    let iou = |label: &str| {
                        r.metrics
                            .entry(label)
                            .map(|e| format!("{:.4}", e.metrics.iou))
                            .unwrap_or_else(|| "-".to_string())
                    };
                    let mut labels: Vec<&str> = Vec::new();
                    labels.extend_from_slice(&HAND_LABELS);
                    labels.extend_from_slice(&OBJECT_LABELS);
                    out.push_str(&format!(
                        "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8.4}\n",
                        cell.name(),
                        iou("left-hand"),
                        iou("right-hand"),
                        iou("left-hand-object"),
                        iou("right-hand-object"),
                        iou("two-hand-object"),
                        r.metrics.mean_iou_over(&labels)
                    ));
                }
                CellOutcome::Failed(msg) => {
                    out.push_str(&format!("{:<22} failed: {msg}\n", cell.name()));
                }
            }
        }
        out
    }
}

/// Run every cell of the plan with a shared seed. Cell failures are recorded
/// in the table without aborting the remaining cells.
pub fn run_ablation(
    plan: &AblationPlan,
    data: &AblationDataset,
    train_config: &TrainConfig,
    cb_radius: u32,
    threshold: f64,
) -> Result<AblationTable> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::invalid("run_ablation: empty train or test split"));
    }
    let mut rows = Vec::with_capacity(plan.cells.len());
    for cell in &plan.cells {
        let outcome = match run_cell(cell, data, train_config, cb_radius, threshold) {
            Ok((_, report)) => CellOutcome::Report(report),
            Err(e) => CellOutcome::Failed(e.to_string()),
        };
        rows.push((*cell, outcome));
    }
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub n_total: usize,
    pub hand_iou: f64,
    pub object_iou: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub failures: Vec<(usize, String)>,
}

impl SweepCurve {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n_total,hand_iou,object_iou\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.n_total, p.hand_iou, p.object_iou));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Train + evaluate the boundary-conditioned sequential pipeline once per
/// augmentation quantity. Counts must be ascending; each point reuses the
/// first `n` composites of the (deterministically ordered) augmentation set.
pub fn sweep_augmentation_quantity(
    counts: &[usize],
    data: &AblationDataset,
    train_config: &TrainConfig,
    cb_radius: u32,
    threshold: f64,
) -> Result<SweepCurve> {
    if counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sweep counts must be ascending"));
    }
    let mut curve = SweepCurve {
        points: Vec::new(),
        failures: Vec::new(),
    };
    for &n in counts {
        if n > data.train_aug.len() {
            curve.failures.push((
                n,
                format!("only {} composites available", data.train_aug.len()),
            ));
            continue;
        }
        let train_data = data.train_for(n > 0, Some(n));
        let outcome = (|| -> Result<SweepPoint> {
            let (nets, _) = train_sequential_pipeline(&train_data, train_config, true)?;
            let metadata = RunMetadata {
                config_hash: config_hash(&format!("sweep{n}|{}", train_config.to_toml_string())),
                seed: train_config.seed,
                dataset_id: data.dataset_id.clone(),
            };
            let report = evaluate_nets(
                &CellNets::Sequential(nets),
                &data.test,
                cb_radius,
                threshold,
                metadata,
            )?;
            Ok(SweepPoint {
                n_total: n,
                hand_iou: report.hand_miou(),
                object_iou: report.object_miou(),
            })
        })();
        match outcome {
            Ok(p) => curve.points.push(p),
            Err(e) => curve.failures.push((n, e.to_string())),
        }
    }
    Ok(curve)
}
