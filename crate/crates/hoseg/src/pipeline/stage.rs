//! Stage contracts of the cascade: channel counts, input assembly, and
//! per-stage targets derived from label maps.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::mask::{ContactBoundaryMap, LabelMap};

/// The three cascade stages. Hands are decoded first from RGB alone; the
/// contact boundary sees RGB plus the two hand channels; the interacting
/// object sees RGB, hands, and (unless ablated away) the boundary channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageSpec {
    Hand,
    Boundary,
    Object { with_boundary: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Per-pixel multi-class cross entropy.
    CrossEntropy,
    /// Per-pixel binary cross entropy on a single logit channel.
    BinaryCrossEntropy,
}

impl StageSpec {
    pub fn in_channels(self) -> usize {
        match self {
            StageSpec::Hand => 3,
            StageSpec::Boundary => 5,
            StageSpec::Object { with_boundary } => {
                if with_boundary {
                    6
                } else {
                    5
                }
            }
        }
    }

    pub fn out_channels(self) -> usize {
        match self {
            StageSpec::Hand => 3,      // background / left / right
            StageSpec::Boundary => 1,  // boundary logit
            StageSpec::Object { .. } => 4, // background / left-obj / right-obj / two-hand-obj
        }
    }

    pub fn loss_kind(self) -> LossKind {
        match self {
            StageSpec::Boundary => LossKind::BinaryCrossEntropy,
            _ => LossKind::CrossEntropy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StageSpec::Hand => "hand",
            StageSpec::Boundary => "boundary",
            StageSpec::Object { .. } => "object",
        }
    }
}

/// Channel-concatenate the RGB image with the prior-stage mask channels.
/// The result must hit the stage's exact channel count; prior channels must
/// be probabilities in [0, 1].
pub fn assemble_stage_inputs(
    stage: StageSpec,
    image: &Tensor,
    priors: &[&Tensor],
) -> Result<Tensor> {
    if image.channels() != 3 {
        return Err(Error::invalid(format!(
            "expected a 3-channel image tensor, got {} channels",
            image.channels()
        )));
    }
    let prior_channels: usize = priors.iter().map(|p| p.channels()).sum();
    if 3 + prior_channels != stage.in_channels() {
        return Err(Error::invalid(format!(
            "stage {} expects {} prior channels, got {prior_channels}",
            stage.name(),
            stage.in_channels() - 3
        )));
    }
    for p in priors {
        if p.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(
                "prior mask channels must be probabilities in [0, 1]",
            ));
        }
    }
    let mut parts = vec![image];
    parts.extend_from_slice(priors);
    Tensor::concat(&parts)
}

/// Binary {0,1} planes for the left and right hand classes.
pub fn hand_planes(labels: &LabelMap) -> (Tensor, Tensor) {
    let (h, w) = (labels.height() as usize, labels.width() as usize);
    let mut left = Tensor::zeros(1, h, w);
    let mut right = Tensor::zeros(1, h, w);
    for (i, &c) in labels.classes().iter().enumerate() {
        if c == 1 {
            left.data_mut()[i] = 1.0;
        } else if c == 2 {
            right.data_mut()[i] = 1.0;
        }
    }
    (left, right)
}

/// Binary {0,1} plane of a contact boundary.
pub fn boundary_plane(cb: &ContactBoundaryMap) -> Tensor {
    let (h, w) = (cb.height() as usize, cb.width() as usize);
    let mut t = Tensor::zeros(1, h, w);
    for (i, &b) in cb.mask().bits().iter().enumerate() {
        if b {
            t.data_mut()[i] = 1.0;
        }
    }
    t
}

/// Supervision for one stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageTarget {
    /// Per-pixel class index into the stage's output channels.
    Classes(Vec<u8>),
    /// Per-pixel boundary bit.
    Binary(Vec<bool>),
}

/// Derive the stage target from ground truth.
pub fn stage_target(stage: StageSpec, labels: &LabelMap, boundary: &ContactBoundaryMap) -> StageTarget {
    match stage {
        StageSpec::Hand => StageTarget::Classes(
            labels
                .classes()
                .iter()
                .map(|&c| match c {
                    1 => 1,
                    2 => 2,
                    _ => 0,
                })
                .collect(),
        ),
        StageSpec::Boundary => StageTarget::Binary(boundary.mask().bits().to_vec()),
        StageSpec::Object { .. } => StageTarget::Classes(
            labels
                .classes()
                .iter()
                .map(|&c| match c {
                    3 => 1,
                    4 => 2,
                    5 => 3,
                    _ => 0,
                })
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ClassId;

    #[test]
    fn channel_counts_are_exact() {
        assert_eq!(StageSpec::Hand.in_channels(), 3);
        assert_eq!(StageSpec::Boundary.in_channels(), 5);
        assert_eq!(StageSpec::Object { with_boundary: true }.in_channels(), 6);
        assert_eq!(StageSpec::Object { with_boundary: false }.in_channels(), 5);
        assert_eq!(StageSpec::Hand.out_channels(), 3);
        assert_eq!(StageSpec::Boundary.out_channels(), 1);
        assert_eq!(StageSpec::Object { with_boundary: true }.out_channels(), 4);
    }

    #[test]
    fn assemble_concatenates_to_stage_width() {
        let image = Tensor::zeros(3, 4, 4);
        let plane = Tensor::zeros(1, 4, 4);

        let hand_in = assemble_stage_inputs(StageSpec::Hand, &image, &[]).unwrap();
        assert_eq!(hand_in.channels(), 3);

        let boundary_in =
            assemble_stage_inputs(StageSpec::Boundary, &image, &[&plane, &plane]).unwrap();
        assert_eq!(boundary_in.channels(), 5);

        let object_in = assemble_stage_inputs(
            StageSpec::Object { with_boundary: true },
            &image,
            &[&plane, &plane, &plane],
        )
        .unwrap();
        assert_eq!(object_in.channels(), 6);
    }

    #[test]
    fn assemble_rejects_wrong_prior_count() {
        let image = Tensor::zeros(3, 4, 4);
        let plane = Tensor::zeros(1, 4, 4);
        assert!(assemble_stage_inputs(StageSpec::Hand, &image, &[&plane]).is_err());
        assert!(assemble_stage_inputs(StageSpec::Boundary, &image, &[&plane]).is_err());
        assert!(assemble_stage_inputs(
            StageSpec::Object { with_boundary: false },
            &image,
            &[&plane, &plane, &plane]
        )
        .is_err());
    }

    #[test]
    fn assemble_rejects_out_of_range_priors() {
        let image = Tensor::zeros(3, 2, 2);
        let mut plane = Tensor::zeros(1, 2, 2);
        plane.data_mut()[0] = 1.5;
        let ok = Tensor::zeros(1, 2, 2);
        assert!(assemble_stage_inputs(StageSpec::Boundary, &image, &[&plane, &ok]).is_err());
    }

    #[test]
    fn targets_remap_class_ids() {
        let mut labels = LabelMap::new(3, 1).unwrap();
        labels.set_class(0, 0, ClassId::RightHand);
        labels.set_class(1, 0, ClassId::TwoHandObject);
        let cb = ContactBoundaryMap::empty(3, 1).unwrap();
        assert_eq!(
            stage_target(StageSpec::Hand, &labels, &cb),
            StageTarget::Classes(vec![2, 0, 0])
        );
        assert_eq!(
            stage_target(StageSpec::Object { with_boundary: true }, &labels, &cb),
            StageTarget::Classes(vec![0, 3, 0])
        );
    }
}
