//! Inference over trained predictors: the three-stage sequential decode and
//! the parallel-decode baseline.

use image::RgbImage;

use super::predictor::DensePredictor;
use super::stage::{assemble_stage_inputs, StageSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::mask::{ClassId, ContactBoundaryMap, LabelMap};

pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 0.5;

/// Per-pixel argmax over channels; ties resolve to the lowest channel index.
pub fn argmax_classes(logits: &Tensor) -> Vec<u8> {
    let (c, h, w) = (logits.channels(), logits.height(), logits.width());
    let mut out = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut best = 0usize;
            let mut best_v = logits.at(0, y, x);
            for ch in 1..c {
                let v = logits.at(ch, y, x);
                if v > best_v {
                    best_v = v;
                    best = ch;
                }
            }
            out[y * w + x] = best as u8;
        }
    }
    out
}

/// The three trained handles of the cascade; `boundary` is absent when the
/// contact-boundary stage is ablated away (the object stage then runs on
/// five input channels).
pub struct SequentialPredictors<P> {
    pub hand: P,
    pub boundary: Option<P>,
    pub object: P,
}

impl<P: DensePredictor> SequentialPredictors<P> {
    pub fn validate(&self) -> Result<()> {
        let object_stage = StageSpec::Object {
            with_boundary: self.boundary.is_some(),
        };
        let checks = [
            (self.hand.in_channels(), self.hand.out_channels(), StageSpec::Hand),
            (self.object.in_channels(), self.object.out_channels(), object_stage),
        ];
        for (cin, cout, stage) in checks {
            if cin != stage.in_channels() || cout != stage.out_channels() {
                return Err(Error::invalid(format!(
                    "{} predictor is ({cin}, {cout}), stage needs ({}, {})",
                    stage.name(),
                    stage.in_channels(),
                    stage.out_channels()
                )));
            }
        }
        if let Some(b) = &self.boundary {
            if b.in_channels() != StageSpec::Boundary.in_channels()
                || b.out_channels() != StageSpec::Boundary.out_channels()
            {
                return Err(Error::invalid("boundary predictor channel mismatch"));
            }
        }
        Ok(())
    }
}

fn check_spatial(stage: &str, t: &Tensor, h: usize, w: usize) -> Result<()> {
    if t.height() != h || t.width() != w {
        return Err(Error::Pipeline(format!(
            "{stage} stage changed spatial dims: expected {w}x{h}, got {}x{}",
            t.width(),
            t.height()
        )));
    }
    Ok(())
}

/// Sequential decode on an image tensor: hands (argmax) feed the boundary
/// stage; the boundary probability (raw, unthresholded) feeds the object
/// stage; hands win argmax conflicts in the merged map. The emitted
/// boundary map is thresholded at `threshold`.
pub fn run_sequential_on_tensor<P: DensePredictor>(
    input: &Tensor,
    predictors: &SequentialPredictors<P>,
    threshold: f64,
) -> Result<(LabelMap, Option<ContactBoundaryMap>)> {
    predictors.validate()?;
    let (h, w) = (input.height(), input.width());

    let hand_logits = predictors.hand.forward(input)?;
    check_spatial("hand", &hand_logits, h, w)?;
    let hand_classes = argmax_classes(&hand_logits);
    let mut left = Tensor::zeros(1, h, w);
    let mut right = Tensor::zeros(1, h, w);
    for (i, &c) in hand_classes.iter().enumerate() {
        if c == 1 {
            left.data_mut()[i] = 1.0;
        } else if c == 2 {
            right.data_mut()[i] = 1.0;
        }
    }

    let boundary_prob = match &predictors.boundary {
        Some(net) => {
            let b_in = assemble_stage_inputs(StageSpec::Boundary, input, &[&left, &right])?;
            let logits = net.forward(&b_in)?;
            check_spatial("boundary", &logits, h, w)?;
            let mut plane = logits;
            for v in plane.data_mut() {
                *v = 1.0 / (1.0 + (-*v).exp());
            }
            Some(plane)
        }
        None => None,
    };

    let object_stage = StageSpec::Object {
        with_boundary: boundary_prob.is_some(),
    };
    let mut priors: Vec<&Tensor> = vec![&left, &right];
    if let Some(b) = &boundary_prob {
        priors.push(b);
    }
    let o_in = assemble_stage_inputs(object_stage, input, &priors)?;
    let object_logits = predictors.object.forward(&o_in)?;
    check_spatial("object", &object_logits, h, w)?;
    let object_classes = argmax_classes(&object_logits);

    let mut labels = LabelMap::new(w as u32, h as u32)?;
    for i in 0..h * w {
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        let object_id = match object_classes[i] {
            1 => 3,
            2 => 4,
            3 => 5,
            _ => 0,
        };
        let id = match hand_classes[i] {
            1 => 1,
            2 => 2,
            _ => object_id,
        };
        labels.set_class(x, y, ClassId::from_u8(id)?);
    }

    let cb = match boundary_prob {
        Some(plane) => Some(ContactBoundaryMap::from_probabilities(
            w as u32, h as u32,
            plane.data(),
            threshold,
        )?),
        None => None,
    };
    Ok((labels, cb))
}

/// Sequential decode on an RGB image.
pub fn run_sequential_inference<P: DensePredictor>(
    image: &RgbImage,
    predictors: &SequentialPredictors<P>,
    threshold: f64,
) -> Result<(LabelMap, Option<ContactBoundaryMap>)> {
    run_sequential_on_tensor(&Tensor::from_rgb(image), predictors, threshold)
}

/// Parallel-decode baseline: argmax over six class channels.
pub fn run_parallel_on_tensor<P: DensePredictor>(
    input: &Tensor,
    predictor: &P,
) -> Result<LabelMap> {
    if predictor.in_channels() != 3 || predictor.out_channels() != 6 {
        return Err(Error::invalid(
            "parallel decoder must map 3 input channels to 6 output channels",
        ));
    }
    let logits = predictor.forward(input)?;
    check_spatial("parallel", &logits, input.height(), input.width())?;
    let classes = argmax_classes(&logits);
    LabelMap::from_classes(input.width() as u32, input.height() as u32, classes)
}

pub fn run_parallel_inference<P: DensePredictor>(
    image: &RgbImage,
    predictor: &P,
) -> Result<LabelMap> {
    run_parallel_on_tensor(&Tensor::from_rgb(image), predictor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{generate_contact_boundary, PairingPolicy};

    /// Test-only predictor that emits fixed logits regardless of pixel
    /// values (dimensions still come from the input).
    struct FixedLogits {
        in_channels: usize,
        planes: Vec<Vec<f64>>, // per-channel, length h*w
    }

    impl DensePredictor for FixedLogits {
        fn in_channels(&self) -> usize {
            self.in_channels
        }
        fn out_channels(&self) -> usize {
            self.planes.len()
        }
        fn forward(&self, input: &Tensor) -> Result<Tensor> {
            let (h, w) = (input.height(), input.width());
            let mut data = Vec::with_capacity(self.planes.len() * h * w);
            for plane in &self.planes {
                assert_eq!(plane.len(), h * w);
                data.extend_from_slice(plane);
            }
            Tensor::from_data(self.planes.len(), h, w, data)
        }
    }

    fn one_hot_planes(ids: &[u8], k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|c| {
                ids.iter()
                    .map(|&id| if id as usize == c { 10.0 } else { -10.0 })
                    .collect()
            })
            .collect()
    }

    fn ground_truth() -> LabelMap {
        let mut labels = LabelMap::new(8, 6).unwrap();
        for y in 1..4 {
            for x in 0..2 {
                labels.set_class(x, y, ClassId::LeftHand);
            }
            labels.set_class(2, y, ClassId::LeftObject);
            for x in 5..7 {
                labels.set_class(x, y, ClassId::RightHand);
            }
            labels.set_class(4, y, ClassId::RightObject);
        }
        labels
    }

    fn oracle_predictors(labels: &LabelMap) -> SequentialPredictors<FixedLogits> {
        let cb = generate_contact_boundary(labels, 1, PairingPolicy::HandSpecific).unwrap();
        let hand_ids: Vec<u8> = labels
            .classes()
            .iter()
            .map(|&c| match c {
                1 => 1,
                2 => 2,
                _ => 0,
            })
            .collect();
        let object_ids: Vec<u8> = labels
            .classes()
            .iter()
            .map(|&c| match c {
                3 => 1,
                4 => 2,
                5 => 3,
                _ => 0,
            })
            .collect();
        let boundary_logits: Vec<f64> = cb
            .mask()
            .bits()
            .iter()
            .map(|&b| if b { 10.0 } else { -10.0 })
            .collect();
        SequentialPredictors {
            hand: FixedLogits {
                in_channels: 3,
                planes: one_hot_planes(&hand_ids, 3),
            },
            boundary: Some(FixedLogits {
                in_channels: 5,
                planes: vec![boundary_logits],
            }),
            object: FixedLogits {
                in_channels: 6,
                planes: one_hot_planes(&object_ids, 4),
            },
        }
    }

    #[test]
    fn oracle_stages_reproduce_ground_truth() {
        let labels = ground_truth();
        let preds = oracle_predictors(&labels);
        let input = Tensor::zeros(3, 6, 8);
        let (out, cb) = run_sequential_on_tensor(&input, &preds, 0.5).unwrap();
        assert_eq!(out.classes(), labels.classes());
        let expected_cb =
            generate_contact_boundary(&labels, 1, PairingPolicy::HandSpecific).unwrap();
        assert_eq!(cb.unwrap(), expected_cb);
    }

    #[test]
    fn all_background_stages_give_empty_outputs() {
        let empty = LabelMap::new(8, 6).unwrap();
        let preds = oracle_predictors(&empty);
        let input = Tensor::zeros(3, 6, 8);
        let (out, cb) = run_sequential_on_tensor(&input, &preds, 0.5).unwrap();
        assert!(out.classes().iter().all(|&c| c == 0));
        assert!(cb.unwrap().is_empty());
    }

    #[test]
    fn output_dims_follow_input_dims() {
        for (w, h) in [(8u32, 6u32), (5, 9)] {
            let mut labels = LabelMap::new(w, h).unwrap();
            labels.set_class(0, 0, ClassId::LeftHand);
            let preds = oracle_predictors(&labels);
            let input = Tensor::zeros(3, h as usize, w as usize);
            let (out, _) = run_sequential_on_tensor(&input, &preds, 0.5).unwrap();
            assert_eq!((out.width(), out.height()), (w, h));
        }
    }

    #[test]
    fn hands_win_conflicts() {
        // Hand net claims pixel 0 as left hand; object net claims the same
        // pixel as right-hand object.
        let preds = SequentialPredictors {
            hand: FixedLogits {
                in_channels: 3,
                planes: one_hot_planes(&[1, 0], 3),
            },
            boundary: None,
            object: FixedLogits {
                in_channels: 5,
                planes: one_hot_planes(&[2, 2], 4),
            },
        };
        let input = Tensor::zeros(3, 1, 2);
        let (out, cb) = run_sequential_on_tensor(&input, &preds, 0.5).unwrap();
        assert!(cb.is_none());
        assert_eq!(out.classes(), &[1, 4]);
    }

    #[test]
    fn parallel_uniform_logits_break_ties_to_background() {
        let predictor = FixedLogits {
            in_channels: 3,
            planes: vec![vec![0.25; 12]; 6],
        };
        let out = run_parallel_on_tensor(&Tensor::zeros(3, 3, 4), &predictor).unwrap();
        assert!(out.classes().iter().all(|&c| c == 0));
    }

    #[test]
    fn parallel_one_hot_recovers_ground_truth() {
        let labels = ground_truth();
        let predictor = FixedLogits {
            in_channels: 3,
            planes: one_hot_planes(labels.classes(), 6),
        };
        let out = run_parallel_on_tensor(&Tensor::zeros(3, 6, 8), &predictor).unwrap();
        assert_eq!(out.classes(), labels.classes());
    }

    #[test]
    fn parallel_rejects_wrong_channel_count() {
        let predictor = FixedLogits {
            in_channels: 3,
            planes: vec![vec![0.0; 4]; 5],
        };
        assert!(run_parallel_on_tensor(&Tensor::zeros(3, 2, 2), &predictor).is_err());
    }
}
