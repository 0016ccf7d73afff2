//! SGD training of the cascade stages and the parallel-decode baseline.
//!
//! One logical training loop; batch items are prepared and differentiated in
//! parallel, then reduced in index order so identical config + seed always
//! yields identical parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::infer::SequentialPredictors;
use super::predictor::{ConvNet, DensePredictor, TrainablePredictor, DEFAULT_HIDDEN_CHANNELS};
use super::stage::{boundary_plane, hand_planes, stage_target, StageSpec, StageTarget};
use super::tensor::Tensor;
use crate::dataio::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::mask::{
    generate_contact_boundary, BinaryMask, ContactBoundaryMap, LabelMap, PairingPolicy,
};

/// Training recipe. Defaults follow the reference recipe: 80k iterations of
/// SGD at batch 8, learning rate 0.01, momentum 0.9, weight decay 5e-4, with
/// random horizontal flip and photometric distortion on.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub random_flip: bool,
    pub photometric_distortion: bool,
    /// Train on compositional-augmentation entries as well.
    pub ccda: bool,
    /// Condition later stages on ground-truth channels during training
    /// (teacher forcing). When false, the pipeline driver materializes
    /// predicted channels from the earlier trained stages instead.
    pub teacher_forcing: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 80_000,
            batch_size: 8,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            random_flip: true,
            photometric_distortion: true,
            ccda: false,
            teacher_forcing: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::invalid("iterations and batch_size must be positive"));
        }
        if self.learning_rate < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::invalid("rates must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: TrainConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("TrainConfig serializes")
    }
}

/// Predicted prior channels attached to a sample when training without
/// teacher forcing.
#[derive(Debug, Clone)]
pub struct PriorPlanes {
    pub left: Tensor,
    pub right: Tensor,
    pub boundary: Option<Tensor>,
}

/// One in-memory training sample: image tensor, labels, and the derived
/// contact-boundary target.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: Tensor,
    pub labels: LabelMap,
    pub boundary: ContactBoundaryMap,
    pub priors: Option<PriorPlanes>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub samples: Vec<TrainSample>,
}

impl LoadedDataset {
    /// Load a manifest split into memory, deriving boundary targets with the
    /// given dilation radius. Augmentation entries are included only when
    /// `include_aug` is set.
    pub fn from_manifest(
        manifest: &DatasetManifest,
        split: Split,
        cb_radius: u32,
        include_aug: bool,
    ) -> Result<Self> {
        let mut samples = Vec::new();
        for entry in &manifest.entries {
            if entry.split != split || (!include_aug && entry.aug.is_some()) {
                continue;
            }
            let (image, labels) = manifest.load_entry(entry)?;
            samples.push(TrainSample::from_parts(
                Tensor::from_rgb(&image),
                labels,
                cb_radius,
            )?);
        }
        Ok(LoadedDataset { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl TrainSample {
    pub fn from_parts(image: Tensor, labels: LabelMap, cb_radius: u32) -> Result<Self> {
        let boundary =
            generate_contact_boundary(&labels, cb_radius, PairingPolicy::HandSpecific)?;
        Ok(TrainSample {
            image,
            labels,
            boundary,
            priors: None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct AugDraw {
    flip: bool,
    photometric: Option<(f64, f64, f64)>, // brightness, contrast, saturation
}

fn draw_augmentation(rng: &mut ChaCha8Rng, config: &TrainConfig) -> AugDraw {
    let flip = config.random_flip && rng.gen_bool(0.5);
    let photometric = if config.photometric_distortion {
        Some((
            rng.gen_range(-32.0 / 255.0..=32.0 / 255.0),
            rng.gen_range(0.5..=1.5),
            rng.gen_range(0.5..=1.5),
        ))
    } else {
        None
    };
    AugDraw { flip, photometric }
}

fn apply_photometric(image: &mut Tensor, (brightness, contrast, saturation): (f64, f64, f64)) {
    let hw = image.pixels();
    for i in 0..hw {
        let (r, g, b) = (
            image.data()[i],
            image.data()[hw + i],
            image.data()[2 * hw + i],
        );
        let adj = |v: f64| (v - 0.5) * contrast + 0.5 + brightness;
        let (r, g, b) = (adj(r), adj(g), adj(b));
        let gray = (r + g + b) / 3.0;
        let sat = |v: f64| (gray + saturation * (v - gray)).clamp(0.0, 1.0);
        image.data_mut()[i] = sat(r);
        image.data_mut()[hw + i] = sat(g);
        image.data_mut()[2 * hw + i] = sat(b);
    }
}

/// Horizontal mirror of a label map. Class ids are kept as-is (no left/right
/// swap), matching common dense-prediction tooling.
fn flip_label_map(labels: &LabelMap) -> LabelMap {
    let (w, h) = (labels.width(), labels.height());
    let mirror_u8 = |src: &[u8]| -> Vec<u8> {
        let mut out = vec![0u8; src.len()];
        for y in 0..h as usize {
            for x in 0..w as usize {
                out[y * w as usize + x] = src[y * w as usize + (w as usize - 1 - x)];
            }
        }
        out
    };
    let mut flipped = LabelMap::from_classes(w, h, mirror_u8(labels.classes()))
        .expect("mirrored classes stay legal");
    if let Some(arm) = labels.arm_layer() {
        let bits: Vec<bool> = arm.bits().to_vec();
        let mirrored: Vec<bool> = {
            let mut out = vec![false; bits.len()];
            for y in 0..h as usize {
                for x in 0..w as usize {
                    out[y * w as usize + x] = bits[y * w as usize + (w as usize - 1 - x)];
                }
            }
            out
        };
        flipped
            .set_arm_layer(BinaryMask::from_bits(w, h, mirrored).unwrap())
            .unwrap();
    }
    if let Some(ind) = labels.indirect_layer() {
        flipped.set_indirect_layer(w, h, mirror_u8(ind)).unwrap();
    }
    flipped
}

fn flip_boundary(cb: &ContactBoundaryMap) -> ContactBoundaryMap {
    let m = cb.mask();
    let (w, h) = (m.width(), m.height());
    let mut out = BinaryMask::new(w, h).unwrap();
    for y in 0..h {
        for x in 0..w {
            if m.get(w - 1 - x, y) {
                out.set(x, y, true);
            }
        }
    }
    ContactBoundaryMap::from_mask(out)
}

/// Assemble one training example for a stage: augmented input tensor plus
/// the matching target. Priors come from the sample's attached predicted
/// planes when present, otherwise from ground truth (teacher forcing).
fn build_example(
    stage: StageSpec,
    sample: &TrainSample,
    draw: &AugDraw,
) -> Result<(Tensor, StageTarget)> {
    let mut image = if draw.flip {
        sample.image.flip_horizontal()
    } else {
        sample.image.clone()
    };
    if let Some(p) = draw.photometric {
        apply_photometric(&mut image, p);
    }
    let labels;
    let boundary;
    if draw.flip {
        labels = flip_label_map(&sample.labels);
        boundary = flip_boundary(&sample.boundary);
    } else {
        labels = sample.labels.clone();
        boundary = sample.boundary.clone();
    }

    let priors: Vec<Tensor> = match stage {
        StageSpec::Hand => Vec::new(),
        StageSpec::Boundary | StageSpec::Object { .. } => {
            let (left, right) = match &sample.priors {
                Some(p) => {
                    let (l, r) = (p.left.clone(), p.right.clone());
                    if draw.flip {
                        (l.flip_horizontal(), r.flip_horizontal())
                    } else {
                        (l, r)
                    }
                }
                None => hand_planes(&labels),
            };
            let mut v = vec![left, right];
            if stage == (StageSpec::Object { with_boundary: true }) {
                let plane = match &sample.priors {
                    Some(PriorPlanes {
                        boundary: Some(b), ..
                    }) => {
                        if draw.flip {
                            b.flip_horizontal()
                        } else {
                            b.clone()
                        }
                    }
                    _ => boundary_plane(&boundary),
                };
                v.push(plane);
            }
            v
        }
    };
    let prior_refs: Vec<&Tensor> = priors.iter().collect();
    let input = super::stage::assemble_stage_inputs(stage, &image, &prior_refs)?;
    let target = stage_target(stage, &labels, &boundary);
    Ok((input, target))
}

/// Per-iteration losses, persisted as `iteration,loss` CSV lines.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve(pub Vec<(u64, f64)>);

impl LossCurve {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in &self.0 {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.0.last().map(|&(_, l)| l)
    }
}

/// The generic loop behind [`train_stage`] and [`train_parallel_decoder`].
fn train_loop<P, F>(predictor: &mut P, config: &TrainConfig, n_samples: usize, build: F) -> Result<LossCurve>
where
    P: TrainablePredictor + Sync,
    F: Fn(usize, &AugDraw) -> Result<(Tensor, StageTarget)> + Sync,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocity = vec![0.0; predictor.param_count()];
    let mut curve = Vec::with_capacity(config.iterations as usize);

    for iteration in 0..config.iterations {
        let batch: Vec<(usize, AugDraw)> = (0..config.batch_size)
            .map(|_| {
                let idx = rng.gen_range(0..n_samples);
                (idx, draw_augmentation(&mut rng, config))
            })
            .collect();

        let results: Vec<Result<(f64, Vec<f64>)>> = batch
            .par_iter()
            .map(|(idx, draw)| {
                let (input, target) = build(*idx, draw)?;
                let logits = predictor.forward(&input)?;
                let (loss, grad_logits) =
                    super::loss::stage_loss_with_grad(&logits, &target)?;
                let mut grad = vec![0.0; predictor.param_count()];
                predictor.backward(&input, &grad_logits, &mut grad)?;
                Ok((loss, grad))
            })
            .collect();

        let mut batch_loss = 0.0;
        let mut grad_sum = vec![0.0; predictor.param_count()];
        for r in results {
            let (loss, grad) = r?;
            batch_loss += loss;
            for (s, g) in grad_sum.iter_mut().zip(&grad) {
                *s += g;
            }
        }
        batch_loss /= config.batch_size as f64;
        if !batch_loss.is_finite() {
            return Err(Error::Training {
                iteration,
                message: format!("loss is {batch_loss}"),
            });
        }

        let mut params = predictor.params();
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad_sum) {
            let grad = g / config.batch_size as f64 + config.weight_decay * *p;
            *v = config.momentum * *v - config.learning_rate * grad;
            *p += *v;
        }
        predictor.set_params(&params)?;
        curve.push((iteration, batch_loss));
    }
    Ok(LossCurve(curve))
}

/// Train one cascade stage. Later stages are conditioned on ground-truth
/// prior channels unless the dataset samples carry predicted priors.
pub fn train_stage<P>(
    stage: StageSpec,
    predictor: &mut P,
    data: &LoadedDataset,
    config: &TrainConfig,
) -> Result<LossCurve>
where
    P: TrainablePredictor + Sync,
{
    if data.is_empty() {
        return Err(Error::invalid("train_stage: empty dataset"));
    }
    if predictor.in_channels() != stage.in_channels()
        || predictor.out_channels() != stage.out_channels()
    {
        return Err(Error::invalid(format!(
            "predictor ({}, {}) does not match stage {} ({}, {})",
            predictor.in_channels(),
            predictor.out_channels(),
            stage.name(),
            stage.in_channels(),
            stage.out_channels()
        )));
    }
    train_loop(predictor, config, data.len(), |idx, draw| {
        build_example(stage, &data.samples[idx], draw)
    })
}

/// Train the parallel-decode baseline: one predictor emitting all six class
/// channels at once from RGB.
pub fn train_parallel_decoder<P>(
    predictor: &mut P,
    data: &LoadedDataset,
    config: &TrainConfig,
) -> Result<LossCurve>
where
    P: TrainablePredictor + Sync,
{
    if data.is_empty() {
        return Err(Error::invalid("train_parallel_decoder: empty dataset"));
    }
    if predictor.in_channels() != 3 || predictor.out_channels() != 6 {
        return Err(Error::invalid(
            "parallel decoder must map 3 input channels to 6 output channels",
        ));
    }
    train_loop(predictor, config, data.len(), |idx, draw| {
        let sample = &data.samples[idx];
        let mut image = if draw.flip {
            sample.image.flip_horizontal()
        } else {
            sample.image.clone()
        };
        if let Some(p) = draw.photometric {
            apply_photometric(&mut image, p);
        }
        let labels = if draw.flip {
            flip_label_map(&sample.labels)
        } else {
            sample.labels.clone()
        };
        Ok((image, StageTarget::Classes(labels.classes().to_vec())))
    })
}

/// Train the full cascade: hand, then (optionally) boundary, then object.
/// With teacher forcing off, each trained stage materializes its predictions
/// as the conditioning channels for the next one.
pub fn train_sequential_pipeline(
    data: &LoadedDataset,
    config: &TrainConfig,
    with_cb: bool,
) -> Result<(SequentialPredictors<ConvNet>, Vec<(StageSpec, LossCurve)>)> {
    let mut data = data.clone();
    let mut curves = Vec::new();

    let mut hand = ConvNet::new(3, 3, DEFAULT_HIDDEN_CHANNELS, config.seed);
    curves.push((
        StageSpec::Hand,
        train_stage(StageSpec::Hand, &mut hand, &data, config)?,
    ));
    if !config.teacher_forcing {
        attach_predicted_hand_priors(&hand, &mut data)?;
    }

    let boundary = if with_cb {
        let mut net = ConvNet::new(5, 1, DEFAULT_HIDDEN_CHANNELS, config.seed.wrapping_add(1));
        curves.push((
            StageSpec::Boundary,
            train_stage(StageSpec::Boundary, &mut net, &data, config)?,
        ));
        if !config.teacher_forcing {
            attach_predicted_boundary_priors(&net, &mut data)?;
        }
        Some(net)
    } else {
        None
    };

    let object_stage = StageSpec::Object { with_boundary: with_cb };
    let mut object = ConvNet::new(
        object_stage.in_channels(),
        object_stage.out_channels(),
        DEFAULT_HIDDEN_CHANNELS,
        config.seed.wrapping_add(2),
    );
    curves.push((
        object_stage,
        train_stage(object_stage, &mut object, &data, config)?,
    ));

    Ok((
        SequentialPredictors {
            hand,
            boundary,
            object,
        },
        curves,
    ))
}

fn attach_predicted_hand_priors(hand: &ConvNet, data: &mut LoadedDataset) -> Result<()> {
    use super::infer::argmax_classes;
    for sample in &mut data.samples {
        let logits = hand.forward(&sample.image)?;
        let classes = argmax_classes(&logits);
        let (h, w) = (logits.height(), logits.width());
        let mut left = Tensor::zeros(1, h, w);
        let mut right = Tensor::zeros(1, h, w);
        for (i, &c) in classes.iter().enumerate() {
            if c == 1 {
                left.data_mut()[i] = 1.0;
            } else if c == 2 {
                right.data_mut()[i] = 1.0;
            }
        }
        sample.priors = Some(PriorPlanes {
            left,
            right,
            boundary: None,
        });
    }
    Ok(())
}

fn attach_predicted_boundary_priors(boundary: &ConvNet, data: &mut LoadedDataset) -> Result<()> {
    for sample in &mut data.samples {
        let priors = sample
            .priors
            .as_ref()
            .ok_or_else(|| Error::Pipeline("hand priors missing before boundary stage".into()))?;
        let input = super::stage::assemble_stage_inputs(
            StageSpec::Boundary,
            &sample.image,
            &[&priors.left, &priors.right],
        )?;
        let logits = boundary.forward(&input)?;
        let mut plane = logits;
        for v in plane.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        sample.priors.as_mut().unwrap().boundary = Some(plane);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ClassId;

    fn tiny_dataset(n: usize) -> LoadedDataset {
        let mut samples = Vec::new();
        for i in 0..n {
            let mut labels = LabelMap::new(8, 8).unwrap();
            let mut image = Tensor::zeros(3, 8, 8);
            let x0 = 1 + (i % 3) as u32;
            for y in 2..5u32 {
                for x in x0..x0 + 2 {
                    labels.set_class(x, y, ClassId::LeftHand);
                    image.set(0, y as usize, x as usize, 0.9);
                }
                labels.set_class(x0 + 2, y, ClassId::LeftObject);
                image.set(1, y as usize, (x0 + 2) as usize, 0.8);
            }
            samples.push(TrainSample::from_parts(image, labels, 1).unwrap());
        }
        LoadedDataset { samples }
    }

    fn quick_config(iterations: u64) -> TrainConfig {
        TrainConfig {
            iterations,
            batch_size: 2,
            random_flip: false,
            photometric_distortion: false,
            ..Default::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let data = tiny_dataset(2);
        let mut net = ConvNet::new(3, 3, 4, 0);
        let before = net.params();
        let config = TrainConfig {
            learning_rate: 0.0,
            weight_decay: 0.0,
            ..quick_config(1)
        };
        train_stage(StageSpec::Hand, &mut net, &data, &config).unwrap();
        assert_eq!(net.params(), before);
    }

    #[test]
    fn same_seed_gives_identical_curves_and_params() {
        let data = tiny_dataset(3);
        let config = TrainConfig {
            random_flip: true,
            photometric_distortion: true,
            ..quick_config(5)
        };
        let run = || {
            let mut net = ConvNet::new(3, 3, 4, 3);
            let curve = train_stage(StageSpec::Hand, &mut net, &data, &config).unwrap();
            (curve, net.params())
        };
        let (c1, p1) = run();
        let (c2, p2) = run();
        assert_eq!(c1, c2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn training_reduces_loss_on_tiny_data() {
        let data = tiny_dataset(4);
        let mut net = ConvNet::new(3, 3, 8, 1);
        let curve =
            train_stage(StageSpec::Hand, &mut net, &data, &quick_config(60)).unwrap();
        let first = curve.0.first().unwrap().1;
        let last = curve.final_loss().unwrap();
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn stage_channel_mismatch_rejected() {
        let data = tiny_dataset(1);
        let mut net = ConvNet::new(5, 3, 4, 0);
        assert!(train_stage(StageSpec::Hand, &mut net, &data, &quick_config(1)).is_err());
        let mut net = ConvNet::new(3, 5, 4, 0);
        assert!(train_parallel_decoder(&mut net, &data, &quick_config(1)).is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let data = LoadedDataset { samples: vec![] };
        let mut net = ConvNet::new(3, 3, 4, 0);
        assert!(matches!(
            train_stage(StageSpec::Hand, &mut net, &data, &quick_config(1)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn config_toml_round_trip_rejects_unknown_keys() {
        let config = TrainConfig::default();
        let text = config.to_toml_string();
        assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), config);
        let bad = format!("{text}\nunknown_knob = 3\n");
        assert!(TrainConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn flip_mirrors_labels_and_boundary_consistently() {
        let mut labels = LabelMap::new(6, 3).unwrap();
        labels.set_class(0, 1, ClassId::LeftHand);
        labels.set_class(1, 1, ClassId::LeftObject);
        let sample = TrainSample::from_parts(Tensor::zeros(3, 3, 6), labels, 1).unwrap();
        let flipped_labels = flip_label_map(&sample.labels);
        assert_eq!(flipped_labels.class_at(5, 1), 1);
        assert_eq!(flipped_labels.class_at(4, 1), 3);
        let flipped_cb = flip_boundary(&sample.boundary);
        let direct = generate_contact_boundary(&flipped_labels, 1, PairingPolicy::HandSpecific)
            .unwrap();
        assert_eq!(flipped_cb, direct);
    }
}
