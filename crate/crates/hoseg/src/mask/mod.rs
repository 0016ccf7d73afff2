//! Mask algebra: binary masks, the hand/object label schema, morphology,
//! and contact-boundary pseudo-label generation.

pub mod io;

use crate::error::{Error, Result};

/// Default dilation radius for contact-boundary generation, sized for a
/// 512-pixel longest image side. Scale proportionally for other sizes.
pub const DEFAULT_CB_RADIUS: u32 = 5;

/// Per-pixel class ids of the hand/object annotation schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ClassId {
    Background = 0,
    LeftHand = 1,
    RightHand = 2,
    LeftObject = 3,
    RightObject = 4,
    TwoHandObject = 5,
}

impl ClassId {
    pub const COUNT: usize = 6;

    pub fn from_u8(id: u8) -> Result<Self> {
        match id {
            0 => Ok(ClassId::Background),
            1 => Ok(ClassId::LeftHand),
            2 => Ok(ClassId::RightHand),
            3 => Ok(ClassId::LeftObject),
            4 => Ok(ClassId::RightObject),
            5 => Ok(ClassId::TwoHandObject),
            id => Err(Error::IllegalClassId { id }),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn all() -> [ClassId; 6] {
        [
            ClassId::Background,
            ClassId::LeftHand,
            ClassId::RightHand,
            ClassId::LeftObject,
            ClassId::RightObject,
            ClassId::TwoHandObject,
        ]
    }

    /// The five foreground classes (everything but background).
    pub fn foreground() -> [ClassId; 5] {
        [
            ClassId::LeftHand,
            ClassId::RightHand,
            ClassId::LeftObject,
            ClassId::RightObject,
            ClassId::TwoHandObject,
        ]
    }

    pub fn hands() -> [ClassId; 2] {
        [ClassId::LeftHand, ClassId::RightHand]
    }

    pub fn objects() -> [ClassId; 3] {
        [
            ClassId::LeftObject,
            ClassId::RightObject,
            ClassId::TwoHandObject,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Background => "background",
            ClassId::LeftHand => "left-hand",
            ClassId::RightHand => "right-hand",
            ClassId::LeftObject => "left-hand-object",
            ClassId::RightObject => "right-hand-object",
            ClassId::TwoHandObject => "two-hand-object",
        }
    }
}

/// Dense boolean mask over a fixed-size pixel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-false mask. Dimensions must be at least 1x1.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "mask dimensions must be >= 1, got {width}x{height}"
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits: vec![false; (width as usize) * (height as usize)],
        })
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "mask dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if bits.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid(format!(
                "bit buffer length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    /// Binarize a soft per-pixel map at the given threshold (values >= threshold
    /// become set). Values must form a width*height row-major buffer.
    pub fn from_soft(width: u32, height: u32, values: &[f64], threshold: f64) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid(format!(
                "value buffer length {} does not match {width}x{height}",
                values.len()
            )));
        }
        Self::from_bits(
            width,
            height,
            values.iter().map(|&v| v >= threshold).collect(),
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize) * (self.width as usize) + (x as usize)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.idx(x, y);
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_dims(other)
            && self
                .bits
                .iter()
                .zip(other.bits.iter())
                .all(|(&a, &b)| !a || b)
    }

    /// In-place union. Dimensions must match.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        check_dims(self, other)?;
        for (a, &b) in self.bits.iter_mut().zip(other.bits.iter()) {
            *a |= b;
        }
        Ok(())
    }
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch {
            expected_w: a.width,
            expected_h: a.height,
            got_w: b.width,
            got_h: b.height,
        });
    }
    Ok(())
}

/// Offsets (dx, dy) of the Euclidean disk of the given radius.
pub(crate) fn disk_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let r2 = r * r;
    let mut offs = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r2 {
                offs.push((dx, dy));
            }
        }
    }
    offs
}

/// Morphological dilation by a Euclidean disk. Radius 0 is the identity.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let offs = disk_offsets(radius);
    let mut out = mask.clone();
    let (w, h) = (mask.width as i64, mask.height as i64);
    for (x, y) in mask.iter_set() {
        for &(dx, dy) in &offs {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx >= 0 && nx < w && ny >= 0 && ny < h {
                out.bits[(ny as usize) * (w as usize) + (nx as usize)] = true;
            }
        }
    }
    out
}

/// Pixel-wise logical AND of two masks of equal dimensions.
pub fn intersect(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    check_dims(a, b)?;
    let bits = a
        .bits
        .iter()
        .zip(b.bits.iter())
        .map(|(&x, &y)| x && y)
        .collect();
    BinaryMask::from_bits(a.width, a.height, bits)
}

/// Which hand-object pairs contribute to the contact boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairingPolicy {
    /// Left hand pairs with {left-hand object, two-hand object}; right hand
    /// with {right-hand object, two-hand object}. Cross pairs are excluded.
    #[default]
    HandSpecific,
    /// Every hand pairs with every object class.
    AllPairs,
}

impl PairingPolicy {
    pub fn pairs(self) -> Vec<(ClassId, ClassId)> {
        match self {
            PairingPolicy::HandSpecific => vec![
                (ClassId::LeftHand, ClassId::LeftObject),
                (ClassId::LeftHand, ClassId::TwoHandObject),
                (ClassId::RightHand, ClassId::RightObject),
                (ClassId::RightHand, ClassId::TwoHandObject),
            ],
            PairingPolicy::AllPairs => {
                let mut out = Vec::with_capacity(6);
                for hand in ClassId::hands() {
                    for obj in ClassId::objects() {
                        out.push((hand, obj));
                    }
                }
                out
            }
        }
    }
}

/// Per-pixel class map over the six-class schema, with optional arm and
/// indirect-object layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    classes: Vec<u8>,
    arm: Option<Vec<bool>>,
    indirect: Option<Vec<u8>>,
}

impl LabelMap {
    /// All-background map.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "label map dimensions must be >= 1, got {width}x{height}"
            )));
        }
        Ok(LabelMap {
            width,
            height,
            classes: vec![0; (width as usize) * (height as usize)],
            arm: None,
            indirect: None,
        })
    }

    pub fn from_classes(width: u32, height: u32, classes: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "label map dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if classes.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid(format!(
                "class buffer length {} does not match {width}x{height}",
                classes.len()
            )));
        }
        if let Some(&id) = classes.iter().find(|&&c| c > 5) {
            return Err(Error::IllegalClassId { id });
        }
        Ok(LabelMap {
            width,
            height,
            classes,
            arm: None,
            indirect: None,
        })
    }

    /// Attach the arm layer. Must match dimensions.
    pub fn set_arm_layer(&mut self, arm: BinaryMask) -> Result<()> {
        if arm.width != self.width || arm.height != self.height {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: arm.width,
                got_h: arm.height,
            });
        }
        self.arm = Some(arm.bits);
        Ok(())
    }

    /// Attach the indirect-object layer. Ids must be in {0, 3, 4, 5} and must
    /// not overlap foreground classes of the main map.
    pub fn set_indirect_layer(&mut self, width: u32, height: u32, ids: Vec<u8>) -> Result<()> {
        if width != self.width || height != self.height {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: width,
                got_h: height,
            });
        }
        if ids.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid(format!(
                "indirect buffer length {} does not match {width}x{height}",
                ids.len()
            )));
        }
        if let Some(&id) = ids.iter().find(|&&c| !matches!(c, 0 | 3 | 4 | 5)) {
            return Err(Error::IllegalClassId { id });
        }
        if ids
            .iter()
            .zip(self.classes.iter())
            .any(|(&ind, &main)| ind != 0 && main != 0)
        {
            return Err(Error::invalid(
                "indirect layer overlaps foreground classes of the main map".to_string(),
            ));
        }
        self.indirect = Some(ids);
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize) * (self.width as usize) + (x as usize)
    }

    #[inline]
    pub fn class_at(&self, x: u32, y: u32) -> u8 {
        self.classes[self.idx(x, y)]
    }

    /// Set a pixel's class. The id must be a legal class id.
    pub fn set_class(&mut self, x: u32, y: u32, class: ClassId) {
        let i = self.idx(x, y);
        self.classes[i] = class.as_u8();
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn arm_layer(&self) -> Option<BinaryMask> {
        self.arm.as_ref().map(|bits| BinaryMask {
            width: self.width,
            height: self.height,
            bits: bits.clone(),
        })
    }

    pub fn indirect_layer(&self) -> Option<&[u8]> {
        self.indirect.as_deref()
    }

    pub fn has_arm_layer(&self) -> bool {
        self.arm.is_some()
    }

    pub fn has_indirect_layer(&self) -> bool {
        self.indirect.is_some()
    }

    /// One-vs-rest binarization of a class.
    pub fn class_mask(&self, class: ClassId) -> BinaryMask {
        let id = class.as_u8();
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.classes.iter().map(|&c| c == id).collect(),
        }
    }

    /// Union of all foreground classes (1..=5) plus the arm layer when present.
    /// This is the region a compositor pastes and an inpainter removes.
    pub fn foreground_mask(&self) -> BinaryMask {
        let mut bits: Vec<bool> = self.classes.iter().map(|&c| c != 0).collect();
        if let Some(arm) = &self.arm {
            for (b, &a) in bits.iter_mut().zip(arm.iter()) {
                *b |= a;
            }
        }
        BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// Per-class pixel counts indexed by class id 0..=5.
    pub fn class_counts(&self) -> [usize; 6] {
        let mut counts = [0usize; 6];
        for &c in &self.classes {
            counts[c as usize] += 1;
        }
        counts
    }
}

/// Binary map of the hand-object contact band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactBoundaryMap {
    mask: BinaryMask,
}

impl ContactBoundaryMap {
    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Ok(ContactBoundaryMap {
            mask: BinaryMask::new(width, height)?,
        })
    }

    pub fn from_mask(mask: BinaryMask) -> Self {
        ContactBoundaryMap { mask }
    }

    /// Threshold a probability map into a boundary map.
    pub fn from_probabilities(
        width: u32,
        height: u32,
        probs: &[f64],
        threshold: f64,
    ) -> Result<Self> {
        Ok(ContactBoundaryMap {
            mask: BinaryMask::from_soft(width, height, probs, threshold)?,
        })
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn into_mask(self) -> BinaryMask {
        self.mask
    }

    pub fn width(&self) -> u32 {
        self.mask.width()
    }

    pub fn height(&self) -> u32 {
        self.mask.height()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

/// Contact-boundary pseudo-label: for each permitted hand-object pair, dilate
/// both masks by `radius` and keep the overlap; the result is the union over
/// pairs. Absent hands or objects yield an empty map.
pub fn generate_contact_boundary(
    labels: &LabelMap,
    radius: u32,
    pairing: PairingPolicy,
) -> Result<ContactBoundaryMap> {
    let mut out = BinaryMask::new(labels.width(), labels.height())?;
    let mut dilated: [Option<BinaryMask>; 6] = Default::default();
    for (hand, object) in pairing.pairs() {
        for class in [hand, object] {
            if dilated[class.as_u8() as usize].is_none() {
                let m = labels.class_mask(class);
                dilated[class.as_u8() as usize] = Some(if m.is_empty() {
                    m
                } else {
                    dilate(&m, radius)
                });
            }
        }
        let h = dilated[hand.as_u8() as usize].as_ref().unwrap();
        let o = dilated[object.as_u8() as usize].as_ref().unwrap();
        if h.is_empty() || o.is_empty() {
            continue;
        }
        out.union_with(&intersect(h, o)?)?;
    }
    Ok(ContactBoundaryMap::from_mask(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from_rows(rows: &[&str]) -> BinaryMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let bits = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c == '#'))
            .collect();
        BinaryMask::from_bits(w, h, bits).unwrap()
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(BinaryMask::new(0, 4).is_err());
        assert!(LabelMap::new(3, 0).is_err());
    }

    #[test]
    fn dilate_radius_zero_is_identity() {
        let m = mask_from_rows(&["....", ".##.", "....", "#..."]);
        assert_eq!(dilate(&m, 0), m);
    }

    #[test]
    fn dilate_single_pixel_radius_one_is_plus_shape() {
        // Enumerating pixels at Euclidean distance <= 1 from (4,4) gives the
        // 5-pixel plus shape.
        let mut m = BinaryMask::new(9, 9).unwrap();
        m.set(4, 4, true);
        let d = dilate(&m, 1);
        assert_eq!(d.area(), 5);
        for (x, y) in [(4, 4), (3, 4), (5, 4), (4, 3), (4, 5)] {
            assert!(d.get(x, y), "expected ({x},{y}) set");
        }
    }

    #[test]
    fn dilate_full_mask_saturates() {
        let m = BinaryMask::from_bits(5, 4, vec![true; 20]).unwrap();
        assert_eq!(dilate(&m, 3), m);
    }

    #[test]
    fn intersect_idempotent_and_disjoint() {
        let a = mask_from_rows(&["##..", "##..", "....", "...."]);
        let b = mask_from_rows(&["....", "....", "..##", "..##"]);
        assert_eq!(intersect(&a, &a).unwrap(), a);
        assert!(intersect(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn intersect_row_bands() {
        // rows 0-3 vs rows 2-5 on 6x6 -> rows 2-3 band, 12 pixels.
        let mut a = BinaryMask::new(6, 6).unwrap();
        let mut b = BinaryMask::new(6, 6).unwrap();
        for y in 0..=3 {
            for x in 0..6 {
                a.set(x, y, true);
            }
        }
        for y in 2..=5 {
            for x in 0..6 {
                b.set(x, y, true);
            }
        }
        let i = intersect(&a, &b).unwrap();
        assert_eq!(i.area(), 12);
        for y in 0..6u32 {
            for x in 0..6u32 {
                assert_eq!(i.get(x, y), (2..=3).contains(&y));
            }
        }
    }

    #[test]
    fn intersect_dimension_mismatch() {
        let a = BinaryMask::new(4, 4).unwrap();
        let b = BinaryMask::new(4, 5).unwrap();
        assert!(matches!(
            intersect(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn label_map_rejects_illegal_class() {
        let err = LabelMap::from_classes(2, 2, vec![0, 1, 9, 2]).unwrap_err();
        assert!(matches!(err, Error::IllegalClassId { id: 9 }));
    }

    #[test]
    fn indirect_layer_overlap_rejected() {
        let mut m = LabelMap::from_classes(2, 2, vec![0, 1, 0, 0]).unwrap();
        // Indirect pixel on top of the left hand at index 1.
        let err = m.set_indirect_layer(2, 2, vec![0, 3, 0, 0]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert!(m.set_indirect_layer(2, 2, vec![3, 0, 0, 4]).is_ok());
    }

    #[test]
    fn boundary_without_objects_is_empty() {
        let mut m = LabelMap::new(8, 8).unwrap();
        for y in 2..=4 {
            for x in 0..=2 {
                m.set_class(x, y, ClassId::LeftHand);
            }
        }
        let cb = generate_contact_boundary(&m, 3, PairingPolicy::HandSpecific).unwrap();
        assert!(cb.is_empty());
    }

    #[test]
    fn boundary_out_of_reach_is_empty() {
        // Hand at columns 0-2, object at columns 5-7, radius 1: dilations
        // reach columns 3 and 4 and never overlap.
        let mut m = LabelMap::new(8, 8).unwrap();
        for y in 2..=4 {
            for x in 0..=2 {
                m.set_class(x, y, ClassId::LeftHand);
            }
            for x in 5..=7 {
                m.set_class(x, y, ClassId::LeftObject);
            }
        }
        let cb = generate_contact_boundary(&m, 1, PairingPolicy::HandSpecific).unwrap();
        assert!(cb.is_empty());
    }

    #[test]
    fn boundary_band_between_adjacent_regions() {
        // Hand at columns 0-2, object at columns 4-6, radius 1. A disk of
        // radius 1 has no diagonal reach, so brute-force enumeration puts the
        // overlap of the two dilations exactly at column 3, rows 2-4.
        let mut m = LabelMap::new(8, 8).unwrap();
        for y in 2..=4 {
            for x in 0..=2 {
                m.set_class(x, y, ClassId::LeftHand);
            }
            for x in 4..=6 {
                m.set_class(x, y, ClassId::LeftObject);
            }
        }
        let cb = generate_contact_boundary(&m, 1, PairingPolicy::HandSpecific).unwrap();
        assert_eq!(cb.mask().area(), 3);
        for y in 2..=4 {
            assert!(cb.mask().get(3, y), "expected (3,{y}) set");
        }
    }

    #[test]
    fn cross_pairs_excluded_under_hand_specific_policy() {
        // Left hand next to a right-hand object: no permitted pair.
        let mut m = LabelMap::new(8, 8).unwrap();
        m.set_class(2, 4, ClassId::LeftHand);
        m.set_class(4, 4, ClassId::RightObject);
        let specific = generate_contact_boundary(&m, 1, PairingPolicy::HandSpecific).unwrap();
        assert!(specific.is_empty());
        let all = generate_contact_boundary(&m, 1, PairingPolicy::AllPairs).unwrap();
        assert!(!all.is_empty());
    }

    #[test]
    fn soft_binarize_threshold() {
        let m = BinaryMask::from_soft(2, 2, &[0.1, 0.5, 0.49, 0.9], 0.5).unwrap();
        assert_eq!(m.bits(), &[false, true, false, true]);
    }

    proptest! {
        #[test]
        fn dilate_is_extensive_and_dim_preserving(
            w in 1u32..24, h in 1u32..24, radius in 0u32..5, seed_bits in proptest::collection::vec(any::<bool>(), 0..576)
        ) {
            let mut m = BinaryMask::new(w, h).unwrap();
            for (i, &b) in seed_bits.iter().take((w * h) as usize).enumerate() {
                if b {
                    m.set(i as u32 % w, i as u32 / w, true);
                }
            }
            let d = dilate(&m, radius);
            prop_assert_eq!(d.width(), w);
            prop_assert_eq!(d.height(), h);
            prop_assert!(m.is_subset_of(&d));
        }

        #[test]
        fn dilate_is_monotone(
            w in 1u32..16, h in 1u32..16, radius in 0u32..4, bits in proptest::collection::vec(any::<(bool, bool)>(), 0..256)
        ) {
            let mut small = BinaryMask::new(w, h).unwrap();
            let mut big = BinaryMask::new(w, h).unwrap();
            for (i, &(in_small, in_big_extra)) in bits.iter().take((w * h) as usize).enumerate() {
                let (x, y) = (i as u32 % w, i as u32 / w);
                if in_small {
                    small.set(x, y, true);
                    big.set(x, y, true);
                }
                if in_big_extra {
                    big.set(x, y, true);
                }
            }
            prop_assert!(dilate(&small, radius).is_subset_of(&dilate(&big, radius)));
        }
    }
}
