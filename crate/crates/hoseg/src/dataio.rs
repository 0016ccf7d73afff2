//! Dataset layout, manifest parsing and validation, frame sampling, and
//! deterministic split management.
//!
//! A dataset lives under one root with `image/`, `label/`, `label_arm/`,
//! `label_indirect/` and `cb/` directories sharing basenames. The manifest
//! is a TSV file with one entry per line:
//!
//! ```text
//! image-path<TAB>label-path<TAB>arm-path|-<TAB>indirect-path|-<TAB>source<TAB>split[<TAB>aug-extension]
//! ```
//!
//! Paths are root-relative. Augmented entries carry an extension column
//! `fg=<id>;bg=<id>;rank=<r>;seed=<s>` recording their provenance.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{io as maskio, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    Ego4d,
    EpicKitchens,
    ThuRead,
    Own,
    YoutubeTest,
    Synthetic,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Ego4d => "ego4d",
            SourceTag::EpicKitchens => "epic-kitchens",
            SourceTag::ThuRead => "thu-read",
            SourceTag::Own => "own",
            SourceTag::YoutubeTest => "youtube-test",
            SourceTag::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ego4d" => Ok(SourceTag::Ego4d),
            "epic-kitchens" => Ok(SourceTag::EpicKitchens),
            "thu-read" => Ok(SourceTag::ThuRead),
            "own" => Ok(SourceTag::Own),
            "youtube-test" => Ok(SourceTag::YoutubeTest),
            "synthetic" => Ok(SourceTag::Synthetic),
            other => Err(Error::invalid(format!("unknown source tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Provenance of a composite produced by the augmentation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugProvenance {
    /// Index of the foreground entry in the source manifest.
    pub foreground: usize,
    /// Index of the background item in the pool.
    pub background: usize,
    /// Retrieval rank (0-based) the background was sampled at.
    pub rank: usize,
    /// Seed of the generating run.
    pub seed: u64,
}

impl AugProvenance {
    fn encode(&self) -> String {
        format!(
            "fg={};bg={};rank={};seed={}",
            self.foreground, self.background, self.rank, self.seed
        )
    }

    fn decode(s: &str) -> Result<Self> {
        let mut fg = None;
        let mut bg = None;
        let mut rank = None;
        let mut seed = None;
        for part in s.split(';') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad aug extension field {part:?}")))?;
            let parse = |v: &str| -> Result<u64> {
                v.parse()
                    .map_err(|_| Error::invalid(format!("bad aug extension value {v:?}")))
            };
            match key {
                "fg" => fg = Some(parse(value)? as usize),
                "bg" => bg = Some(parse(value)? as usize),
                "rank" => rank = Some(parse(value)? as usize),
                "seed" => seed = Some(parse(value)?),
                other => {
                    return Err(Error::invalid(format!(
                        "unknown aug extension key {other:?}"
                    )))
                }
            }
        }
        match (fg, bg, rank, seed) {
            (Some(foreground), Some(background), Some(rank), Some(seed)) => Ok(AugProvenance {
                foreground,
                background,
                rank,
                seed,
            }),
            _ => Err(Error::invalid(format!("incomplete aug extension {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub label: PathBuf,
    pub arm: Option<PathBuf>,
    pub indirect: Option<PathBuf>,
    pub source: SourceTag,
    pub split: Split,
    pub aug: Option<AugProvenance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn path_field(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn opt_path_field(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| path_field(p))
        .unwrap_or_else(|| "-".to_string())
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            root: root.into(),
            entries: Vec::new(),
        }
    }

    /// Parse a manifest file; the dataset root defaults to the manifest's
    /// parent directory.
    pub fn load(path: &Path) -> Result<Self> {
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::load_with_root(path, root)
    }

    pub fn load_with_root(path: &Path, root: impl Into<PathBuf>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 && fields.len() != 7 {
                return Err(Error::format(
                    path,
                    format!(
                        "line {}: expected 6 or 7 tab-separated fields, got {}",
                        lineno + 1,
                        fields.len()
                    ),
                ));
            }
            let opt = |s: &str| -> Option<PathBuf> {
                if s == "-" {
                    None
                } else {
                    Some(PathBuf::from(s))
                }
            };
            entries.push(ManifestEntry {
                image: PathBuf::from(fields[0]),
                label: PathBuf::from(fields[1]),
                arm: opt(fields[2]),
                indirect: opt(fields[3]),
                source: SourceTag::parse(fields[4])
                    .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?,
                split: Split::parse(fields[5])
                    .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?,
                aug: match fields.get(6) {
                    Some(s) => Some(AugProvenance::decode(s).map_err(|e| {
                        Error::format(path, format!("line {}: {e}", lineno + 1))
                    })?),
                    None => None,
                },
            });
        }
        Ok(DatasetManifest {
            root: root.into(),
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}",
                path_field(&e.image),
                path_field(&e.label),
                opt_path_field(&e.arm),
                opt_path_field(&e.indirect),
                e.source.as_str(),
                e.split.as_str()
            ));
            if let Some(aug) = &e.aug {
                out.push('\t');
                out.push_str(&aug.encode());
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn split_entries(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image)
    }

    pub fn label_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.label)
    }

    pub fn arm_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.arm.as_ref().map(|p| self.root.join(p))
    }

    pub fn indirect_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.indirect.as_ref().map(|p| self.root.join(p))
    }

    /// Load an entry's image and label map (with attached layers).
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<(image::RgbImage, LabelMap)> {
        let image = load_rgb(&self.image_path(entry))?;
        let labels = maskio::load_label_map(
            &self.label_path(entry),
            self.arm_path(entry).as_deref(),
            self.indirect_path(entry).as_deref(),
        )?;
        Ok((image, labels))
    }

    /// Append another manifest's entries (assumed to share this root).
    pub fn extend_from(&mut self, other: &DatasetManifest) {
        self.entries.extend(other.entries.iter().cloned());
    }
}

pub fn load_rgb(path: &Path) -> Result<image::RgbImage> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(img.to_rgb8())
}

pub fn save_rgb(img: &image::RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Canonical directory layout under a dataset root.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetLayout { root: root.into() }
    }

    pub fn image_dir(&self) -> PathBuf {
        self.root.join("image")
    }

    pub fn label_dir(&self) -> PathBuf {
        self.root.join("label")
    }

    pub fn arm_dir(&self) -> PathBuf {
        self.root.join("label_arm")
    }

    pub fn indirect_dir(&self) -> PathBuf {
        self.root.join("label_indirect")
    }

    pub fn cb_dir(&self) -> PathBuf {
        self.root.join("cb")
    }

    pub fn ensure_dirs(&self) -> Result<()> {
        for dir in [
            self.image_dir(),
            self.label_dir(),
            self.arm_dir(),
            self.indirect_dir(),
            self.cb_dir(),
        ] {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }

    /// Root-relative paths for one basename. Layer files live in their own
    /// directories and carry the conventional `_arm` / `_indirect` suffixes.
    pub fn relative_paths(&self, basename: &str) -> LayoutPaths {
        LayoutPaths {
            image: PathBuf::from("image").join(format!("{basename}.png")),
            label: PathBuf::from("label").join(format!("{basename}.png")),
            arm: PathBuf::from("label_arm").join(format!("{basename}_arm.png")),
            indirect: PathBuf::from("label_indirect").join(format!("{basename}_indirect.png")),
            cb: PathBuf::from("cb").join(format!("{basename}.png")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayoutPaths {
    pub image: PathBuf,
    pub label: PathBuf,
    pub arm: PathBuf,
    pub indirect: PathBuf,
    pub cb: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryValidation {
    pub index: usize,
    pub image: PathBuf,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<EntryValidation>,
    pub checked: usize,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &EntryValidation> {
        self.entries.iter().filter(|e| !e.failures.is_empty())
    }

    pub fn is_ok(&self) -> bool {
        self.failures().count() == 0
    }
}

/// Check every entry: files exist, the label decodes with legal class ids,
/// and all layer dimensions match the image. Read-only.
pub fn validate_dataset(manifest: &DatasetManifest) -> Result<ValidationReport> {
    if !manifest.root.exists() {
        return Err(Error::io(
            &manifest.root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root does not exist"),
        ));
    }
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for (index, entry) in manifest.entries.iter().enumerate() {
        let mut failures = Vec::new();
        let image_path = manifest.image_path(entry);
        let image_dims = match image::image_dimensions(&image_path) {
            Ok(dims) => Some(dims),
            Err(_) => {
                failures.push(format!("missing file: {}", entry.image.display()));
                None
            }
        };
        match maskio::load_label_map(
            &manifest.label_path(entry),
            manifest.arm_path(entry).as_deref(),
            manifest.indirect_path(entry).as_deref(),
        ) {
            Ok(labels) => {
                if let Some((w, h)) = image_dims {
                    if labels.width() != w || labels.height() != h {
                        failures.push(format!(
                            "dimension mismatch: image {}x{} vs label {}x{}",
                            w,
                            h,
                            labels.width(),
                            labels.height()
                        ));
                    }
                }
            }
            Err(Error::IllegalClassId { id }) => {
                failures.push(format!("illegal class id {id}"));
            }
            Err(Error::Io { path, .. }) => {
                failures.push(format!("missing file: {}", path.display()));
            }
            Err(e) => failures.push(e.to_string()),
        }
        entries.push(EntryValidation {
            index,
            image: entry.image.clone(),
            failures,
        });
    }
    Ok(ValidationReport {
        checked: entries.len(),
        entries,
    })
}

/// Sparse frame sampling: one frame every `interval_seconds`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameSampleSpec {
    pub interval_seconds: f64,
    pub fps: f64,
}

impl Default for FrameSampleSpec {
    fn default() -> Self {
        FrameSampleSpec {
            interval_seconds: 3.0,
            fps: 30.0,
        }
    }
}

/// Indices floor(k * interval * fps) for k = 0, 1, 2, ... while in range,
/// filtered by the optional interaction predicate. The result is strictly
/// increasing.
pub fn sample_frames(
    frame_count: usize,
    spec: &FrameSampleSpec,
    filter: Option<&dyn Fn(usize) -> bool>,
) -> Result<Vec<usize>> {
    if frame_count == 0 {
        return Err(Error::invalid("sample_frames: empty frame sequence"));
    }
    if spec.interval_seconds <= 0.0 || spec.fps <= 0.0 {
        return Err(Error::invalid(
            "sample_frames: interval_seconds and fps must be positive",
        ));
    }
    let step = spec.interval_seconds * spec.fps;
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let idx = (k as f64 * step).floor() as usize;
        if idx >= frame_count {
            break;
        }
        if out.last() != Some(&idx) && filter.map_or(true, |f| f(idx)) {
            out.push(idx);
        }
        k += 1;
    }
    Ok(out)
}

/// Trivial interaction predicate: a frame counts as interacting when its
/// label map has at least `min_pixels` foreground pixels.
pub fn has_interaction(labels: &LabelMap, min_pixels: usize) -> bool {
    labels.classes().iter().filter(|&&c| c != 0).count() >= min_pixels
}

/// Largest-remainder share sizes for `total` items at the given ratios.
fn largest_remainder(total: usize, ratios: [f64; 3]) -> [usize; 3] {
    let sum: f64 = ratios.iter().sum();
    let shares: Vec<f64> = ratios.iter().map(|r| total as f64 * r / sum).collect();
    let mut sizes: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        sizes[order[i % 3]] += 1;
    }
    [sizes[0], sizes[1], sizes[2]]
}

/// Deterministically shuffle and re-assign splits at the given ratios.
/// Sizes follow the largest-remainder rule, so they always sum to the entry
/// count.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetManifest> {
    let (train, val, test) = ratios;
    if train <= 0.0 || val <= 0.0 || test <= 0.0 {
        return Err(Error::invalid("split ratios must be positive"));
    }
    if manifest.entries.len() < 3 {
        return Err(Error::invalid(format!(
            "cannot split {} entries into 3 splits",
            manifest.entries.len()
        )));
    }
    let sizes = largest_remainder(manifest.entries.len(), [train, val, test]);
    let mut indices: Vec<usize> = (0..manifest.entries.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let mut out = manifest.clone();
    for (pos, &idx) in indices.iter().enumerate() {
        out.entries[idx].split = if pos < sizes[0] {
            Split::Train
        } else if pos < sizes[0] + sizes[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ClassId;

    fn dummy_entry(name: &str, split: Split) -> ManifestEntry {
        ManifestEntry {
            image: PathBuf::from(format!("image/{name}.png")),
            label: PathBuf::from(format!("label/{name}.png")),
            arm: None,
            indirect: None,
            source: SourceTag::Synthetic,
            split,
            aug: None,
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = DatasetManifest::new(dir.path());
        manifest.entries.push(dummy_entry("a", Split::Train));
        let mut b = dummy_entry("b", Split::Test);
        b.arm = Some(PathBuf::from("label_arm/b_arm.png"));
        b.aug = Some(AugProvenance {
            foreground: 3,
            background: 11,
            rank: 2,
            seed: 7,
        });
        manifest.entries.push(b);

        let path = dir.path().join("manifest.tsv");
        manifest.save(&path).unwrap();
        let loaded = DatasetManifest::load(&path).unwrap();
        assert_eq!(loaded, manifest);
    }

    #[test]
    fn sample_frames_examples() {
        let spec = FrameSampleSpec {
            interval_seconds: 3.0,
            fps: 30.0,
        };
        assert_eq!(
            sample_frames(300, &spec, None).unwrap(),
            vec![0, 90, 180, 270]
        );
        assert_eq!(sample_frames(10, &spec, None).unwrap(), vec![0]);
        let reject_all = |_: usize| false;
        assert_eq!(
            sample_frames(300, &spec, Some(&reject_all)).unwrap(),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn sample_frames_strictly_increasing_even_with_sub_frame_step() {
        let spec = FrameSampleSpec {
            interval_seconds: 0.01,
            fps: 30.0,
        };
        let idx = sample_frames(20, &spec, None).unwrap();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(*idx.last().unwrap() < 20);
    }

    #[test]
    fn split_sizes_follow_largest_remainder() {
        let mut manifest = DatasetManifest::new("/");
        for i in 0..10 {
            manifest
                .entries
                .push(dummy_entry(&format!("e{i}"), Split::Train));
        }
        let split = split_dataset(&manifest, (8.0, 1.0, 1.0), 42).unwrap();
        let count = |m: &DatasetManifest, s: Split| m.entries.iter().filter(|e| e.split == s).count();
        assert_eq!(
            (
                count(&split, Split::Train),
                count(&split, Split::Val),
                count(&split, Split::Test)
            ),
            (8, 1, 1)
        );

        for i in 10..100 {
            manifest
                .entries
                .push(dummy_entry(&format!("e{i}"), Split::Train));
        }
        let split = split_dataset(&manifest, (8.0, 1.0, 1.0), 42).unwrap();
        assert_eq!(
            (
                count(&split, Split::Train),
                count(&split, Split::Val),
                count(&split, Split::Test)
            ),
            (80, 10, 10)
        );
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let mut manifest = DatasetManifest::new("/");
        for i in 0..23 {
            manifest
                .entries
                .push(dummy_entry(&format!("e{i}"), Split::Train));
        }
        let a = split_dataset(&manifest, (0.6, 0.2, 0.2), 7).unwrap();
        let b = split_dataset(&manifest, (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!(a, b);
        // Every entry keeps its slot and lands in exactly one split.
        assert_eq!(a.entries.len(), manifest.entries.len());
        let total: usize = [Split::Train, Split::Val, Split::Test]
            .iter()
            .map(|&s| a.split_entries(s).len())
            .sum();
        assert_eq!(total, 23);
    }

    #[test]
    fn split_rejects_too_few_entries() {
        let mut manifest = DatasetManifest::new("/");
        manifest.entries.push(dummy_entry("a", Split::Train));
        manifest.entries.push(dummy_entry("b", Split::Train));
        assert!(matches!(
            split_dataset(&manifest, (8.0, 1.0, 1.0), 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn write_fixture_entry(
        root: &Path,
        name: &str,
        image_dims: (u32, u32),
        label_dims: (u32, u32),
        bad_class: bool,
    ) -> ManifestEntry {
        let layout = DatasetLayout::new(root);
        layout.ensure_dirs().unwrap();
        let paths = layout.relative_paths(name);
        let img = image::RgbImage::from_pixel(image_dims.0, image_dims.1, image::Rgb([10, 20, 30]));
        save_rgb(&img, &root.join(&paths.image)).unwrap();
        if bad_class {
            // Bypass LabelMap validation by writing a raw indexed PNG.
            let data = vec![9u8; (label_dims.0 * label_dims.1) as usize];
            let file = std::fs::File::create(root.join(&paths.label)).unwrap();
            let mut enc =
                png::Encoder::new(std::io::BufWriter::new(file), label_dims.0, label_dims.1);
            enc.set_color(png::ColorType::Indexed);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_palette(maskio::CLASS_PALETTE.concat());
            enc.write_header()
                .unwrap()
                .write_image_data(&data)
                .unwrap();
        } else {
            let mut labels = LabelMap::new(label_dims.0, label_dims.1).unwrap();
            labels.set_class(0, 0, ClassId::LeftHand);
            maskio::save_label_map(&labels, &root.join(&paths.label)).unwrap();
        }
        ManifestEntry {
            image: paths.image,
            label: paths.label,
            arm: None,
            indirect: None,
            source: SourceTag::Synthetic,
            split: Split::Train,
            aug: None,
        }
    }

    #[test]
    fn validate_flags_bad_entries() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = DatasetManifest::new(dir.path());
        for i in 0..4 {
            manifest.entries.push(write_fixture_entry(
                dir.path(),
                &format!("ok{i}"),
                (16, 12),
                (16, 12),
                false,
            ));
        }
        let report = validate_dataset(&manifest).unwrap();
        assert!(report.is_ok(), "{:?}", report.entries);

        manifest
            .entries
            .push(write_fixture_entry(dir.path(), "badclass", (8, 8), (8, 8), true));
        manifest.entries.push(write_fixture_entry(
            dir.path(),
            "baddims",
            (200, 100),
            (100, 100),
            false,
        ));
        let mut missing = dummy_entry("missing", Split::Train);
        missing.image = PathBuf::from("image/nope.png");
        missing.label = PathBuf::from("label/nope.png");
        manifest.entries.push(missing);

        let report = validate_dataset(&manifest).unwrap();
        let failures: Vec<&EntryValidation> = report.failures().collect();
        assert_eq!(failures.len(), 3);
        assert!(failures[0].failures[0].contains("illegal class id 9"));
        assert!(failures[1].failures[0].contains("dimension mismatch"));
        assert!(failures[2].failures[0].contains("missing file"));
    }
}
