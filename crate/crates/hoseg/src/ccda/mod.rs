//! Context-aware compositional data augmentation.
//!
//! Labeled hand-object foregrounds are pasted onto "clean" backgrounds —
//! frames with no hands, or frames whose hands and objects were inpainted
//! away. For every foreground we inpaint its own hand-object region to get a
//! clean query scene, retrieve the top-K most similar pool backgrounds by
//! feature cosine similarity, and composite onto backgrounds sampled from
//! that top-K, so foreground and background context stay plausible.
//!
//! The inpainter, feature embedder, and hand-presence filter are pluggable;
//! deterministic reference implementations live in [`reference`].

mod composite;
pub mod reference;

pub use composite::{
    composite, generate_augmented_set, AugmentConfig, AugmentOutcome, CompositeOptions,
    CompositeRecord, PlacementPolicy,
};

use std::path::Path;

use image::RgbImage;

use crate::dataio::{load_rgb, save_rgb, DatasetManifest};
use crate::error::{Error, Result};
use crate::mask::{dilate, BinaryMask, LabelMap};

/// Margin (in pixels) added around removed foregrounds before inpainting,
/// hiding matting halos.
pub const REMOVAL_DILATION: u32 = 3;

/// Fills a removal mask with plausible content. Implementations must
/// preserve image dimensions.
pub trait Inpainter {
    fn inpaint(&self, image: &RgbImage, removal: &BinaryMask) -> Result<RgbImage>;
}

/// Maps an image to a fixed-dimension feature vector.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, image: &RgbImage) -> Vec<f64>;
}

/// Decides whether a frame contains hands (true = not clean).
pub trait HandFilter {
    fn contains_hands(&self, image: &RgbImage) -> bool;
}

impl<F: Fn(&RgbImage) -> bool> HandFilter for F {
    fn contains_hands(&self, image: &RgbImage) -> bool {
        self(image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClassifiedClean,
    InpaintedClean,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::ClassifiedClean => "classified-clean",
            Provenance::InpaintedClean => "inpainted-clean",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "classified-clean" => Ok(Provenance::ClassifiedClean),
            "inpainted-clean" => Ok(Provenance::InpaintedClean),
            other => Err(Error::invalid(format!("unknown provenance {other:?}"))),
        }
    }
}

pub struct PoolItem {
    pub image: RgbImage,
    pub source: String,
    pub provenance: Provenance,
}

/// Indexed store of clean background images plus their feature vectors.
pub struct BackgroundPool {
    items: Vec<PoolItem>,
    features: Vec<Vec<f64>>,
    dim: Option<usize>,
}

impl BackgroundPool {
    pub fn new() -> Self {
        BackgroundPool {
            items: Vec::new(),
            features: Vec::new(),
            dim: None,
        }
    }

    pub fn push(&mut self, item: PoolItem, feature: Vec<f64>) -> Result<()> {
        match self.dim {
            None => self.dim = Some(feature.len()),
            Some(d) if d != feature.len() => {
                return Err(Error::invalid(format!(
                    "feature dimension {} does not match pool dimension {d}",
                    feature.len()
                )))
            }
            _ => {}
        }
        self.items.push(item);
        self.features.push(feature);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: usize) -> &PoolItem {
        &self.items[id]
    }

    pub fn feature(&self, id: usize) -> &[f64] {
        &self.features[id]
    }

    /// Persist as `items/NNNNNN.png` plus a `pool.tsv` index.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let items_dir = dir.join("items");
        std::fs::create_dir_all(&items_dir).map_err(|e| Error::io(&items_dir, e))?;
        let mut index = String::new();
        for (i, (item, feature)) in self.items.iter().zip(&self.features).enumerate() {
            let rel = format!("items/{i:06}.png");
            save_rgb(&item.image, &dir.join(&rel))?;
            let feat: Vec<String> = feature.iter().map(|v| format!("{v}")).collect();
            index.push_str(&format!(
                "{rel}\t{}\t{}\t{}\n",
                item.source,
                item.provenance.as_str(),
                feat.join(",")
            ));
        }
        let index_path = dir.join("pool.tsv");
        std::fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join("pool.tsv");
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let mut pool = BackgroundPool::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::format(
                    &index_path,
                    format!("line {}: expected 4 fields", lineno + 1),
                ));
            }
            let image = load_rgb(&dir.join(fields[0]))?;
            let feature: Vec<f64> = fields[3]
                .split(',')
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::format(&index_path, format!("line {}: bad feature", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
            pool.push(
                PoolItem {
                    image,
                    source: fields[1].to_string(),
                    provenance: Provenance::parse(fields[2])?,
                },
                feature,
            )?;
        }
        Ok(pool)
    }
}

impl Default for BackgroundPool {
    fn default() -> Self {
        Self::new()
    }
}

/// Region removed before inpainting: every foreground class plus the arm
/// layer, dilated by [`REMOVAL_DILATION`].
pub fn removal_mask(labels: &LabelMap) -> BinaryMask {
    let fg = labels.foreground_mask();
    if fg.is_empty() {
        fg
    } else {
        dilate(&fg, REMOVAL_DILATION)
    }
}

/// Inpaint a labeled frame's hand/object/arm regions away, producing the
/// clean query background used for retrieval.
pub fn make_query_background(
    image: &RgbImage,
    labels: &LabelMap,
    inpainter: &dyn Inpainter,
) -> Result<RgbImage> {
    if labels.width() != image.width() || labels.height() != image.height() {
        return Err(Error::DimensionMismatch {
            expected_w: image.width(),
            expected_h: image.height(),
            got_w: labels.width(),
            got_h: labels.height(),
        });
    }
    let removal = removal_mask(labels);
    if removal.is_empty() {
        return Ok(image.clone());
    }
    let out = inpainter.inpaint(image, &removal)?;
    if out.dimensions() != image.dimensions() {
        return Err(Error::Pipeline(format!(
            "inpainter changed dimensions: {}x{} -> {}x{}",
            image.width(),
            image.height(),
            out.width(),
            out.height()
        )));
    }
    Ok(out)
}

/// Build the clean-background pool from (i) raw frames passing the no-hands
/// filter and (ii) labeled frames with their foregrounds inpainted out.
pub fn build_background_pool(
    frames: &[(String, RgbImage)],
    hand_filter: &dyn HandFilter,
    inpainter: &dyn Inpainter,
    labeled: Option<&DatasetManifest>,
    embedder: &dyn Embedder,
) -> Result<BackgroundPool> {
    let mut pool = BackgroundPool::new();
    for (source, frame) in frames {
        if hand_filter.contains_hands(frame) {
            continue;
        }
        let feature = embedder.embed(frame);
        pool.push(
            PoolItem {
                image: frame.clone(),
                source: source.clone(),
                provenance: Provenance::ClassifiedClean,
            },
            feature,
        )?;
    }
    if let Some(manifest) = labeled {
        for (idx, entry) in manifest.entries.iter().enumerate() {
            let (image, labels) = manifest.load_entry(entry)?;
            let clean = make_query_background(&image, &labels, inpainter).map_err(|e| {
                Error::Pipeline(format!("pool item {idx} ({}): {e}", entry.image.display()))
            })?;
            let feature = embedder.embed(&clean);
            pool.push(
                PoolItem {
                    image: clean,
                    source: entry.image.display().to_string(),
                    provenance: Provenance::InpaintedClean,
                },
                feature,
            )?;
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retrieval {
    pub item: usize,
    pub similarity: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The min(k, pool size) most similar pool items by cosine similarity,
/// non-increasing; exact ties break toward earlier insertion order.
pub fn retrieve_topk(pool: &BackgroundPool, query: &[f64], k: usize) -> Result<Vec<Retrieval>> {
    if pool.is_empty() {
        return Err(Error::invalid("retrieve_topk: empty pool"));
    }
    if k == 0 {
        return Err(Error::invalid("retrieve_topk: k must be >= 1"));
    }
    if pool.dim != Some(query.len()) {
        return Err(Error::invalid(format!(
            "query dimension {} does not match pool dimension {:?}",
            query.len(),
            pool.dim
        )));
    }
    let mut ranked: Vec<Retrieval> = pool
        .features
        .iter()
        .enumerate()
        .map(|(item, f)| Retrieval {
            item,
            similarity: cosine(query, f),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.item.cmp(&b.item))
    });
    ranked.truncate(k.min(pool.len()));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::reference::DiffusionInpainter;
    use super::*;
    use crate::mask::ClassId;

    fn flat_image(w: u32, h: u32, rgb: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, image::Rgb(rgb))
    }

    struct UnitEmbedder;
    impl Embedder for UnitEmbedder {
        fn dim(&self) -> usize {
            3
        }
        fn embed(&self, image: &RgbImage) -> Vec<f64> {
            let p = image.get_pixel(0, 0);
            vec![p[0] as f64, p[1] as f64, p[2] as f64]
        }
    }

    #[test]
    fn pool_keeps_frames_passing_the_filter() {
        let frames = vec![
            ("a".to_string(), flat_image(4, 4, [10, 0, 0])),
            ("b".to_string(), flat_image(4, 4, [200, 0, 0])),
            ("c".to_string(), flat_image(4, 4, [30, 0, 0])),
        ];
        // "Hands" = anything brighter than 100 in red.
        let filter = |img: &RgbImage| img.get_pixel(0, 0)[0] > 100;
        let pool = build_background_pool(
            &frames,
            &filter,
            &DiffusionInpainter::default(),
            None,
            &UnitEmbedder,
        )
        .unwrap();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool.item(0).provenance, Provenance::ClassifiedClean);
        assert_eq!(pool.item(0).source, "a");
        assert_eq!(pool.item(1).source, "c");
    }

    #[test]
    fn empty_inputs_give_empty_pool() {
        let pool = build_background_pool(
            &[],
            &(|_: &RgbImage| false),
            &DiffusionInpainter::default(),
            None,
            &UnitEmbedder,
        )
        .unwrap();
        assert!(pool.is_empty());
    }

    #[test]
    fn query_background_unchanged_without_labels() {
        let img = flat_image(6, 5, [9, 9, 9]);
        let labels = LabelMap::new(6, 5).unwrap();
        let out = make_query_background(&img, &labels, &DiffusionInpainter::default()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn inpainted_pixels_stay_inside_removal_mask() {
        let mut img = flat_image(12, 12, [50, 60, 70]);
        for y in 4..8 {
            for x in 4..8 {
                img.put_pixel(x, y, image::Rgb([255, 0, 0]));
            }
        }
        let mut labels = LabelMap::new(12, 12).unwrap();
        for y in 4..8 {
            for x in 4..8 {
                labels.set_class(x, y, ClassId::LeftHand);
            }
        }
        let removal = removal_mask(&labels);
        let out = make_query_background(&img, &labels, &DiffusionInpainter::default()).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                if !removal.get(x, y) {
                    assert_eq!(out.get_pixel(x, y), img.get_pixel(x, y));
                }
            }
        }
        // The hand region itself must have been rewritten.
        assert_ne!(out.get_pixel(5, 5), img.get_pixel(5, 5));
    }

    #[test]
    fn retrieval_self_similarity_ranks_first() {
        let mut pool = BackgroundPool::new();
        for (i, f) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]]
            .iter()
            .enumerate()
        {
            pool.push(
                PoolItem {
                    image: flat_image(2, 2, [i as u8, 0, 0]),
                    source: format!("{i}"),
                    provenance: Provenance::ClassifiedClean,
                },
                f.to_vec(),
            )
            .unwrap();
        }
        let out = retrieve_topk(&pool, &[0.0, 1.0, 0.0], 3).unwrap();
        assert_eq!(out[0].item, 1);
        assert!((out[0].similarity - 1.0).abs() < 1e-12);
        for w in out.windows(2) {
            assert!(w[0].similarity >= w[1].similarity);
        }
    }

    #[test]
    fn retrieval_ties_break_by_insertion_order() {
        let mut pool = BackgroundPool::new();
        for i in 0..3 {
            pool.push(
                PoolItem {
                    image: flat_image(2, 2, [i, 0, 0]),
                    source: format!("{i}"),
                    provenance: Provenance::ClassifiedClean,
                },
                vec![1.0, 0.0],
            )
            .unwrap();
        }
        // Orthogonal query: all similarities are exactly 0.
        let out = retrieve_topk(&pool, &[0.0, 1.0], 10).unwrap();
        assert_eq!(
            out.iter().map(|r| r.item).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(out.len(), 3); // truncated to pool size
    }

    #[test]
    fn retrieval_rejects_bad_inputs() {
        let pool = BackgroundPool::new();
        assert!(retrieve_topk(&pool, &[1.0], 1).is_err());
        let mut pool = BackgroundPool::new();
        pool.push(
            PoolItem {
                image: flat_image(2, 2, [0, 0, 0]),
                source: "x".into(),
                provenance: Provenance::ClassifiedClean,
            },
            vec![1.0, 0.0],
        )
        .unwrap();
        assert!(retrieve_topk(&pool, &[1.0, 0.0, 0.0], 1).is_err());
        assert!(retrieve_topk(&pool, &[1.0, 0.0], 0).is_err());
    }

    #[test]
    fn pool_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut pool = BackgroundPool::new();
        pool.push(
            PoolItem {
                image: flat_image(3, 2, [1, 2, 3]),
                source: "frame-7".into(),
                provenance: Provenance::InpaintedClean,
            },
            vec![0.25, -1.5, 0.125],
        )
        .unwrap();
        pool.save(dir.path()).unwrap();
        let loaded = BackgroundPool::load(dir.path()).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded.item(0).provenance, Provenance::InpaintedClean);
        assert_eq!(loaded.item(0).source, "frame-7");
        assert_eq!(loaded.feature(0), pool.feature(0));
        assert_eq!(loaded.item(0).image, pool.item(0).image);
    }
}
