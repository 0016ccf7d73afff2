//! Label-preserving compositing of hand-object foregrounds onto retrieved
//! backgrounds, and the batch generator that writes augmented datasets.

use std::path::PathBuf;

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{make_query_background, retrieve_topk, BackgroundPool, Embedder, Inpainter};
use crate::dataio::{
    save_rgb, AugProvenance, DatasetManifest, ManifestEntry, Split, SourceTag,
};
use crate::error::{Error, Result};
use crate::mask::{io as maskio, BinaryMask, LabelMap};

/// Where the foreground lands on the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementPolicy {
    /// Paste at identical coordinates (egocentric hand layouts are
    /// position-sensitive).
    #[default]
    Identity,
    /// Shift by a uniform offset in [-max_dx, max_dx] x [-max_dy, max_dy];
    /// pixels shifted off-canvas are dropped.
    Jitter { max_dx: i32, max_dy: i32 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompositeOptions {
    pub placement: PlacementPolicy,
    /// Blend a 1-pixel band at the paste edge 50/50 with the background.
    /// Labels are unaffected. Off by default.
    pub feather: bool,
}

/// One composite: the image, its labels, and where the parts came from.
pub struct CompositeRecord {
    pub image: RgbImage,
    pub labels: LabelMap,
    pub foreground_source: usize,
    pub background_source: usize,
    pub rank: usize,
}

fn resize_to(bg: &RgbImage, w: u32, h: u32) -> RgbImage {
    if bg.dimensions() == (w, h) {
        bg.clone()
    } else {
        image::imageops::resize(bg, w, h, image::imageops::FilterType::Triangle)
    }
}

/// Paste a labeled foreground onto a background. The background is resized
/// to the foreground frame; the pasted region is the union of classes 1-5
/// and the arm layer.
pub fn composite(
    foreground: &RgbImage,
    labels: &LabelMap,
    background: &RgbImage,
    options: &CompositeOptions,
    seed: u64,
) -> Result<(RgbImage, LabelMap)> {
    let (w, h) = foreground.dimensions();
    if labels.width() != w || labels.height() != h {
        return Err(Error::DimensionMismatch {
            expected_w: w,
            expected_h: h,
            got_w: labels.width(),
            got_h: labels.height(),
        });
    }
    if labels.classes().iter().all(|&c| c == 0) {
        return Err(Error::invalid(
            "composite: foreground labels contain no non-background pixel",
        ));
    }

    let (dx, dy) = match options.placement {
        PlacementPolicy::Identity => (0i64, 0i64),
        PlacementPolicy::Jitter { max_dx, max_dy } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (
                rng.gen_range(-(max_dx as i64)..=max_dx as i64),
                rng.gen_range(-(max_dy as i64)..=max_dy as i64),
            )
        }
    };

    let paste_src = labels.foreground_mask();
    let mut out_image = resize_to(background, w, h);
    let mut out_labels = LabelMap::new(w, h)?;
    let mut out_arm = labels.arm_layer().map(|_| BinaryMask::new(w, h).unwrap());
    let mut pasted = BinaryMask::new(w, h)?;
    let arm_src = labels.arm_layer();

    for (sx, sy) in paste_src.iter_set() {
        let tx = sx as i64 + dx;
        let ty = sy as i64 + dy;
        if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
            continue;
        }
        let (tx, ty) = (tx as u32, ty as u32);
        out_image.put_pixel(tx, ty, *foreground.get_pixel(sx, sy));
        pasted.set(tx, ty, true);
        let class = labels.class_at(sx, sy);
        if class != 0 {
            out_labels.set_class(tx, ty, crate::mask::ClassId::from_u8(class)?);
        }
        if let (Some(arm), Some(out)) = (&arm_src, &mut out_arm) {
            if arm.get(sx, sy) {
                out.set(tx, ty, true);
            }
        }
    }
    if let Some(arm) = out_arm {
        out_labels.set_arm_layer(arm)?;
    }

    if options.feather {
        let bg_resized = resize_to(background, w, h);
        for y in 0..h {
            for x in 0..w {
                if !pasted.get(x, y) {
                    continue;
                }
                let on_edge = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(
                    |&(ddx, ddy)| {
                        let nx = x as i64 + ddx;
                        let ny = y as i64 + ddy;
                        nx < 0
                            || ny < 0
                            || nx >= w as i64
                            || ny >= h as i64
                            || !pasted.get(nx as u32, ny as u32)
                    },
                );
                if on_edge {
                    let f = out_image.get_pixel(x, y).0;
                    let b = bg_resized.get_pixel(x, y).0;
                    out_image.put_pixel(
                        x,
                        y,
                        image::Rgb([
                            ((f[0] as u16 + b[0] as u16) / 2) as u8,
                            ((f[1] as u16 + b[1] as u16) / 2) as u8,
                            ((f[2] as u16 + b[2] as u16) / 2) as u8,
                        ]),
                    );
                }
            }
        }
    }

    Ok((out_image, out_labels))
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Retrieval depth backgrounds are sampled from.
    pub topk: usize,
    /// Number of composites to produce.
    pub n_total: usize,
    pub seed: u64,
    pub options: CompositeOptions,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            topk: 10,
            // Hand-focused default; object-focused training saturates at 8000.
            n_total: 16000,
            seed: 0,
            options: CompositeOptions::default(),
        }
    }
}

/// Result of a generation run: the manifest of written composites plus any
/// per-item failures (failures do not abort the batch).
pub struct AugmentOutcome {
    pub manifest: DatasetManifest,
    pub failures: Vec<(usize, String)>,
}

/// Generate `n_total` composites by cycling the manifest's train-split
/// foregrounds, retrieving each foreground's top-K context-matched
/// backgrounds (query = the foreground's own inpainted scene), and sampling
/// uniformly from that top-K. Files land under `<root>/aug/` in the dataset
/// layout, with `aug/manifest.tsv` recording provenance.
pub fn generate_augmented_set(
    manifest: &DatasetManifest,
    pool: &BackgroundPool,
    embedder: &dyn Embedder,
    inpainter: &dyn Inpainter,
    config: &AugmentConfig,
) -> Result<AugmentOutcome> {
    let mut outcome = AugmentOutcome {
        manifest: DatasetManifest::new(&manifest.root),
        failures: Vec::new(),
    };
    if config.n_total == 0 {
        return Ok(outcome);
    }
    let foregrounds: Vec<(usize, &ManifestEntry)> = manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Train && e.aug.is_none())
        .collect();
    if foregrounds.is_empty() {
        return Err(Error::invalid(
            "generate_augmented_set: manifest has no train entries",
        ));
    }
    if pool.is_empty() {
        return Err(Error::invalid("generate_augmented_set: empty pool"));
    }

    let aug_root = manifest.root.join("aug");
    for sub in ["image", "label", "label_arm"] {
        let dir = aug_root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    // Retrieval is per foreground; compute each top-K once. Entries that
    // cannot serve as foregrounds (unreadable, or nothing to paste) are
    // reported and excluded from the cycle so exactly n_total composites
    // still come out.
    let mut usable: Vec<(usize, &ManifestEntry, Vec<super::Retrieval>)> = Vec::new();
    for &(idx, entry) in &foregrounds {
        let ranked = (|| {
            let (image, labels) = manifest.load_entry(entry)?;
            if labels.classes().iter().all(|&c| c == 0) {
                return Err(Error::invalid("no foreground pixels to paste"));
            }
            let query_bg = make_query_background(&image, &labels, inpainter)?;
            let feature = embedder.embed(&query_bg);
            retrieve_topk(pool, &feature, config.topk)
        })();
        match ranked {
            Ok(r) => usable.push((idx, entry, r)),
            Err(e) => outcome.failures.push((idx, format!("skipped: {e}"))),
        }
    }
    if usable.is_empty() {
        return Err(Error::invalid(
            "generate_augmented_set: no usable foregrounds",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for i in 0..config.n_total {
        let (fg_index, entry, ranked) = &usable[i % usable.len()];
        let (fg_index, entry) = (*fg_index, *entry);
        let rank = rng.gen_range(0..ranked.len());
        let background_source = ranked[rank].item;

        let produced = (|| -> Result<ManifestEntry> {
            let (fg_image, fg_labels) = manifest.load_entry(entry)?;
            let (image, labels) = composite(
                &fg_image,
                &fg_labels,
                &pool.item(background_source).image,
                &config.options,
                config.seed.wrapping_add(i as u64),
            )?;
            let basename = format!("aug_{i:06}");
            let image_rel = PathBuf::from("aug/image").join(format!("{basename}.png"));
            let label_rel = PathBuf::from("aug/label").join(format!("{basename}.png"));
            save_rgb(&image, &manifest.root.join(&image_rel))?;
            maskio::save_label_map(&labels, &manifest.root.join(&label_rel))?;
            let arm_rel = labels.has_arm_layer().then(|| {
                PathBuf::from("aug/label").join(format!("{basename}_arm.png"))
            });
            Ok(ManifestEntry {
                image: image_rel,
                label: label_rel,
                arm: arm_rel,
                indirect: None,
                source: SourceTag::Synthetic,
                split: Split::Train,
                aug: Some(AugProvenance {
                    foreground: fg_index,
                    background: background_source,
                    rank,
                    seed: config.seed,
                }),
            })
        })();
        match produced {
            Ok(entry) => outcome.manifest.entries.push(entry),
            Err(e) => outcome.failures.push((fg_index, format!("item {i}: {e}"))),
        }
    }

    outcome
        .manifest
        .save(&aug_root.join("manifest.tsv"))?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::super::reference::{DiffusionInpainter, HistogramEmbedder};
    use super::super::{PoolItem, Provenance};
    use super::*;
    use crate::mask::ClassId;

    fn toy_foreground() -> (RgbImage, LabelMap) {
        let mut img = RgbImage::from_pixel(4, 4, image::Rgb([10, 10, 10]));
        let mut labels = LabelMap::new(4, 4).unwrap();
        for y in 1..3 {
            for x in 1..3 {
                img.put_pixel(x, y, image::Rgb([200, 30, 30]));
                labels.set_class(x, y, ClassId::LeftHand);
            }
        }
        (img, labels)
    }

    #[test]
    fn composite_partitions_pixels() {
        let (fg, labels) = toy_foreground();
        let bg = RgbImage::from_pixel(4, 4, image::Rgb([0, 99, 0]));
        let (out, out_labels) =
            composite(&fg, &labels, &bg, &CompositeOptions::default(), 0).unwrap();
        let mut changed = 0;
        for y in 0..4 {
            for x in 0..4 {
                if (1..3).contains(&x) && (1..3).contains(&y) {
                    assert_eq!(out.get_pixel(x, y), fg.get_pixel(x, y));
                    assert_eq!(out_labels.class_at(x, y), 1);
                } else {
                    assert_eq!(out.get_pixel(x, y), bg.get_pixel(x, y));
                    assert_eq!(out_labels.class_at(x, y), 0);
                }
                if out.get_pixel(x, y) != bg.get_pixel(x, y) {
                    changed += 1;
                }
            }
        }
        // Exactly the 2x2 patch differs from the background.
        assert_eq!(changed, 4);
    }

    #[test]
    fn composite_preserves_class_counts() {
        let (fg, labels) = toy_foreground();
        let bg = RgbImage::from_pixel(9, 7, image::Rgb([1, 2, 3]));
        let (_, out_labels) =
            composite(&fg, &labels, &bg, &CompositeOptions::default(), 0).unwrap();
        assert_eq!(out_labels.class_counts(), labels.class_counts());
        assert_eq!(out_labels.width(), 4); // background resized to fg frame
    }

    #[test]
    fn composite_rejects_empty_foreground() {
        let img = RgbImage::new(4, 4);
        let labels = LabelMap::new(4, 4).unwrap();
        assert!(matches!(
            composite(&img, &labels, &img, &CompositeOptions::default(), 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn toy_dataset(root: &std::path::Path, n: usize) -> DatasetManifest {
        let layout = crate::dataio::DatasetLayout::new(root);
        layout.ensure_dirs().unwrap();
        let mut manifest = DatasetManifest::new(root);
        for i in 0..n {
            let (img, labels) = toy_foreground();
            let paths = layout.relative_paths(&format!("fg{i}"));
            save_rgb(&img, &root.join(&paths.image)).unwrap();
            maskio::save_label_map(&labels, &root.join(&paths.label)).unwrap();
            manifest.entries.push(ManifestEntry {
                image: paths.image,
                label: paths.label,
                arm: None,
                indirect: None,
                source: SourceTag::Synthetic,
                split: Split::Train,
                aug: None,
            });
        }
        manifest
    }

    fn toy_pool(n: usize) -> BackgroundPool {
        let mut pool = BackgroundPool::new();
        let embedder = HistogramEmbedder;
        for i in 0..n {
            let shade = 40 + (i as u8) * 9;
            let img = RgbImage::from_pixel(4, 4, image::Rgb([shade, shade / 2, shade]));
            let feature = embedder.embed(&img);
            pool.push(
                PoolItem {
                    image: img,
                    source: format!("bg{i}"),
                    provenance: Provenance::ClassifiedClean,
                },
                feature,
            )
            .unwrap();
        }
        pool
    }

    #[test]
    fn generate_zero_produces_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = toy_dataset(dir.path(), 2);
        let pool = toy_pool(3);
        let config = AugmentConfig {
            n_total: 0,
            ..Default::default()
        };
        let outcome = generate_augmented_set(
            &manifest,
            &pool,
            &HistogramEmbedder,
            &DiffusionInpainter::default(),
            &config,
        )
        .unwrap();
        assert!(outcome.manifest.entries.is_empty());
        assert!(!dir.path().join("aug").exists());
    }

    #[test]
    fn generate_cycles_foregrounds() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = toy_dataset(dir.path(), 2);
        let pool = toy_pool(3);
        let config = AugmentConfig {
            topk: 2,
            n_total: 5,
            seed: 11,
            options: CompositeOptions::default(),
        };
        let outcome = generate_augmented_set(
            &manifest,
            &pool,
            &HistogramEmbedder,
            &DiffusionInpainter::default(),
            &config,
        )
        .unwrap();
        assert!(outcome.failures.is_empty());
        assert_eq!(outcome.manifest.entries.len(), 5);
        let uses = |fg: usize| {
            outcome
                .manifest
                .entries
                .iter()
                .filter(|e| e.aug.unwrap().foreground == fg)
                .count()
        };
        assert_eq!((uses(0), uses(1)), (3, 2));
        for e in &outcome.manifest.entries {
            assert!(e.aug.unwrap().rank < config.topk);
            assert!(dir.path().join(&e.image).exists());
            assert!(dir.path().join(&e.label).exists());
        }
        assert!(dir.path().join("aug/manifest.tsv").exists());
    }

    #[test]
    fn generate_is_deterministic() {
        let read_all = |root: &std::path::Path| -> Vec<(PathBuf, Vec<u8>)> {
            let mut files = Vec::new();
            for sub in ["aug/image", "aug/label"] {
                let mut names: Vec<_> = std::fs::read_dir(root.join(sub))
                    .unwrap()
                    .map(|e| e.unwrap().path())
                    .collect();
                names.sort();
                for p in names {
                    files.push((p.clone(), std::fs::read(&p).unwrap()));
                }
            }
            files
        };

        let mut snapshots = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let manifest = toy_dataset(dir.path(), 3);
            let pool = toy_pool(4);
            let config = AugmentConfig {
                topk: 3,
                n_total: 7,
                seed: 99,
                options: CompositeOptions::default(),
            };
            generate_augmented_set(
                &manifest,
                &pool,
                &HistogramEmbedder,
                &DiffusionInpainter::default(),
                &config,
            )
            .unwrap();
            let manifest_bytes = std::fs::read(dir.path().join("aug/manifest.tsv")).unwrap();
            let files: Vec<Vec<u8>> = read_all(dir.path())
                .into_iter()
                .map(|(_, bytes)| bytes)
                .collect();
            snapshots.push((manifest_bytes, files));
        }
        assert_eq!(snapshots[0], snapshots[1]);
    }
}
