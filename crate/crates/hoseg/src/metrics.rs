//! Pixel confusion counting and IoU/precision/recall/F1 reporting.
//!
//! Dataset-level numbers are computed by summing per-image tp/fp/fn counts
//! and deriving the metrics from the sums (not by averaging per-image
//! metrics). Means are unweighted over classes; classes absent from the
//! ground truth of the whole evaluated set are dropped from the means.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, ClassId, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(self, rhs: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: self.true_pos + rhs.true_pos,
            false_pos: self.false_pos + rhs.false_pos,
            false_neg: self.false_neg + rhs.false_neg,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: ConfusionCounts) {
        *self = *self + rhs;
    }
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, false_pos: u64, false_neg: u64) -> Self {
        ConfusionCounts {
            true_pos,
            false_pos,
            false_neg,
        }
    }

    /// True when the class appears in the ground truth these counts came from.
    pub fn present_in_truth(&self) -> bool {
        self.true_pos + self.false_neg > 0
    }
}

/// Derived ratios plus the raw counts they came from.
///
/// Conventions: empty-vs-empty scores 1.0 across the board; an empty
/// prediction against a nonempty truth scores precision 0, and an empty
/// truth against a nonempty prediction scores recall 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl ClassMetrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let tp = counts.true_pos as f64;
        let union = counts.true_pos + counts.false_pos + counts.false_neg;
        let iou = if union == 0 { 1.0 } else { tp / union as f64 };
        let precision = if counts.true_pos + counts.false_pos == 0 {
            if counts.false_neg == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp / (counts.true_pos + counts.false_pos) as f64
        };
        let recall = if counts.true_pos + counts.false_neg == 0 {
            if counts.false_pos == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp / (counts.true_pos + counts.false_neg) as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            iou,
            precision,
            recall,
            f1,
            counts,
        }
    }
}

/// Confusion counts of a predicted binary mask against ground truth.
pub fn binary_confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    if !pred.same_dims(truth) {
        return Err(Error::DimensionMismatch {
            expected_w: truth.width(),
            expected_h: truth.height(),
            got_w: pred.width(),
            got_h: pred.height(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits().iter()) {
        match (p, t) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_pos += 1,
            (false, true) => counts.false_neg += 1,
            (false, false) => {}
        }
    }
    Ok(counts)
}

/// Per-class one-vs-rest confusion counts for a whole label map, indexed by
/// class id.
pub fn label_confusion(pred: &LabelMap, truth: &LabelMap) -> Result<[ConfusionCounts; 6]> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch {
            expected_w: truth.width(),
            expected_h: truth.height(),
            got_w: pred.width(),
            got_h: pred.height(),
        });
    }
    let mut counts = [ConfusionCounts::default(); 6];
    for (&p, &t) in pred.classes().iter().zip(truth.classes().iter()) {
        if p == t {
            counts[p as usize].true_pos += 1;
        } else {
            counts[p as usize].false_pos += 1;
            counts[t as usize].false_neg += 1;
        }
    }
    Ok(counts)
}

/// One-vs-rest metrics of a single class over one image pair.
pub fn class_metrics(pred: &LabelMap, truth: &LabelMap, class_id: u8) -> Result<ClassMetrics> {
    let class = ClassId::from_u8(class_id)?;
    let counts = binary_confusion(&pred.class_mask(class), &truth.class_mask(class))?;
    Ok(ClassMetrics::from_counts(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub label: String,
    pub metrics: ClassMetrics,
    /// Whether this entry contributes to the means (it is dropped when the
    /// class never appears in the ground truth).
    pub in_mean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<MetricsEntry>,
    pub mean_iou: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

impl MetricsReport {
    /// Build a report from summed per-label counts.
    pub fn from_counts(labeled: Vec<(String, ConfusionCounts)>) -> Self {
        let entries: Vec<MetricsEntry> = labeled
            .into_iter()
            .map(|(label, counts)| MetricsEntry {
                label,
                metrics: ClassMetrics::from_counts(counts),
                in_mean: counts.present_in_truth(),
            })
            .collect();
        let included: Vec<&MetricsEntry> = entries.iter().filter(|e| e.in_mean).collect();
        let n = included.len().max(1) as f64;
        let sum = |f: fn(&ClassMetrics) -> f64| -> f64 {
            included.iter().map(|e| f(&e.metrics)).sum::<f64>() / n
        };
        MetricsReport {
            mean_iou: sum(|m| m.iou),
            mean_precision: sum(|m| m.precision),
            mean_recall: sum(|m| m.recall),
            mean_f1: sum(|m| m.f1),
            entries,
        }
    }

    pub fn entry(&self, label: &str) -> Option<&MetricsEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Mean IoU restricted to a subset of entry labels (still honoring the
    /// in-mean flag).
    pub fn mean_iou_over(&self, labels: &[&str]) -> f64 {
        let vals: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.in_mean && labels.contains(&e.label.as_str()))
            .map(|e| e.metrics.iou)
            .collect();
        if vals.is_empty() {
            return 1.0;
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    /// Plain-text table, one row per entry plus a mean row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>8} {:>8} {:>8} {:>8}\n",
            "class", "IoU", "Prec", "Rec", "F1"
        ));
        for e in &self.entries {
            let marker = if e.in_mean { "" } else { " (excluded)" };
            out.push_str(&format!(
                "{:<20} {:>8.4} {:>8.4} {:>8.4} {:>8.4}{}\n",
                e.label, e.metrics.iou, e.metrics.precision, e.metrics.recall, e.metrics.f1, marker
            ));
        }
        out.push_str(&format!(
            "{:<20} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
            "mean", self.mean_iou, self.mean_precision, self.mean_recall, self.mean_f1
        ));
        out
    }
}

/// Sum per-image per-class counts over a dataset and derive the report.
pub fn aggregate_metrics(
    per_image: &[[ConfusionCounts; 6]],
    classes: &[ClassId],
) -> Result<MetricsReport> {
    if per_image.is_empty() {
        return Err(Error::invalid("aggregate_metrics: empty input"));
    }
    if classes.is_empty() {
        return Err(Error::invalid("aggregate_metrics: no classes requested"));
    }
    let mut labeled = Vec::with_capacity(classes.len());
    for &class in classes {
        let mut sum = ConfusionCounts::default();
        for image in per_image {
            sum += image[class.as_u8() as usize];
        }
        labeled.push((class.name().to_string(), sum));
    }
    Ok(MetricsReport::from_counts(labeled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label_map_with_block(
        w: u32,
        h: u32,
        class: ClassId,
        x0: u32,
        y0: u32,
        bw: u32,
        bh: u32,
    ) -> LabelMap {
        let mut m = LabelMap::new(w, h).unwrap();
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                m.set_class(x, y, class);
            }
        }
        m
    }

    #[test]
    fn identical_maps_score_one() {
        let m = label_map_with_block(6, 6, ClassId::LeftHand, 1, 1, 3, 2);
        let cm = class_metrics(&m, &m, 1).unwrap();
        assert_eq!(cm.iou, 1.0);
        assert_eq!(cm.f1, 1.0);
    }

    #[test]
    fn block_overlap_counts() {
        // pred covers a 2x4 block, truth the left 2x2 sub-block:
        // tp=4, fp=4, fn=0 -> iou 0.5, precision 0.5, recall 1, f1 2/3.
        let pred = label_map_with_block(8, 8, ClassId::RightObject, 2, 2, 4, 2);
        let truth = label_map_with_block(8, 8, ClassId::RightObject, 2, 2, 2, 2);
        let cm = class_metrics(&pred, &truth, 4).unwrap();
        assert_eq!(cm.counts, ConfusionCounts::new(4, 4, 0));
        assert_eq!(cm.iou, 0.5);
        assert_eq!(cm.precision, 0.5);
        assert_eq!(cm.recall, 1.0);
        assert!((cm.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_scores_one_by_convention() {
        let a = LabelMap::new(4, 4).unwrap();
        let b = LabelMap::new(4, 4).unwrap();
        let cm = class_metrics(&a, &b, 5).unwrap();
        assert_eq!(cm.iou, 1.0);
        assert_eq!(cm.precision, 1.0);
        assert_eq!(cm.recall, 1.0);
    }

    #[test]
    fn unknown_class_id_rejected() {
        let m = LabelMap::new(4, 4).unwrap();
        assert!(matches!(
            class_metrics(&m, &m, 7),
            Err(Error::IllegalClassId { id: 7 })
        ));
    }

    #[test]
    fn aggregate_single_image_equals_class_metrics() {
        let pred = label_map_with_block(8, 8, ClassId::LeftHand, 0, 0, 4, 4);
        let truth = label_map_with_block(8, 8, ClassId::LeftHand, 2, 0, 4, 4);
        let conf = label_confusion(&pred, &truth).unwrap();
        let report = aggregate_metrics(&[conf], &[ClassId::LeftHand]).unwrap();
        let direct = class_metrics(&pred, &truth, 1).unwrap();
        assert_eq!(report.entries[0].metrics, direct);
    }

    #[test]
    fn aggregate_of_duplicates_matches_single() {
        let conf = {
            let pred = label_map_with_block(8, 8, ClassId::LeftHand, 0, 0, 4, 4);
            let truth = label_map_with_block(8, 8, ClassId::LeftHand, 2, 0, 4, 4);
            label_confusion(&pred, &truth).unwrap()
        };
        let one = aggregate_metrics(&[conf], &[ClassId::LeftHand]).unwrap();
        let two = aggregate_metrics(&[conf, conf], &[ClassId::LeftHand]).unwrap();
        assert_eq!(one.mean_iou, two.mean_iou);
        assert_eq!(one.entries[0].metrics.f1, two.entries[0].metrics.f1);
    }

    #[test]
    fn aggregate_sums_counts_before_deriving() {
        // A (tp=1, fp=0, fn=1) + B (tp=1, fp=1, fn=0) -> iou = 2/4 = 0.5.
        let mut a = [ConfusionCounts::default(); 6];
        a[1] = ConfusionCounts::new(1, 0, 1);
        let mut b = [ConfusionCounts::default(); 6];
        b[1] = ConfusionCounts::new(1, 1, 0);
        let report = aggregate_metrics(&[a, b], &[ClassId::LeftHand]).unwrap();
        assert_eq!(report.entries[0].metrics.iou, 0.5);
    }

    #[test]
    fn aggregate_rejects_empty_input() {
        assert!(matches!(
            aggregate_metrics(&[], &[ClassId::LeftHand]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn absent_classes_drop_out_of_means() {
        let mut conf = [ConfusionCounts::default(); 6];
        conf[1] = ConfusionCounts::new(3, 1, 1);
        // Class 2 never appears in truth or prediction.
        let report =
            aggregate_metrics(&[conf], &[ClassId::LeftHand, ClassId::RightHand]).unwrap();
        assert!(report.entries[0].in_mean);
        assert!(!report.entries[1].in_mean);
        assert_eq!(report.mean_iou, report.entries[0].metrics.iou);
    }

    proptest! {
        #[test]
        fn precision_recall_swap_symmetry(classes_a in proptest::collection::vec(0u8..3, 36), classes_b in proptest::collection::vec(0u8..3, 36)) {
            let a = LabelMap::from_classes(6, 6, classes_a).unwrap();
            let b = LabelMap::from_classes(6, 6, classes_b).unwrap();
            for id in 0..3u8 {
                let ab = class_metrics(&a, &b, id).unwrap();
                let ba = class_metrics(&b, &a, id).unwrap();
                prop_assert_eq!(ab.precision, ba.recall);
                prop_assert_eq!(ab.recall, ba.precision);
                prop_assert!(ab.iou <= ab.f1 + 1e-12);
                prop_assert!(ab.f1 <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn count_additivity_over_concatenation(
            classes_pred in proptest::collection::vec(0u8..6, 48),
            classes_truth in proptest::collection::vec(0u8..6, 48),
        ) {
            // Metrics over one 12x4 image equal metrics over its two 6x4 halves
            // evaluated as separate images.
            let pred_whole = LabelMap::from_classes(12, 4, classes_pred.clone()).unwrap();
            let truth_whole = LabelMap::from_classes(12, 4, classes_truth.clone()).unwrap();
            let whole = label_confusion(&pred_whole, &truth_whole).unwrap();

            let mut parts = Vec::new();
            for half in 0..2usize {
                let take = |v: &[u8]| -> Vec<u8> {
                    let mut out = Vec::with_capacity(24);
                    for row in 0..4 {
                        let start = row * 12 + half * 6;
                        out.extend_from_slice(&v[start..start + 6]);
                    }
                    out
                };
                let p = LabelMap::from_classes(6, 4, take(&classes_pred)).unwrap();
                let t = LabelMap::from_classes(6, 4, take(&classes_truth)).unwrap();
                parts.push(label_confusion(&p, &t).unwrap());
            }
            let agg_whole = aggregate_metrics(&[whole], &ClassId::all()).unwrap();
            let agg_parts = aggregate_metrics(&parts, &ClassId::all()).unwrap();
            prop_assert_eq!(agg_whole, agg_parts);
        }
    }
}
