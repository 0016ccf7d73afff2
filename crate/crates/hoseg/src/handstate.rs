//! Per-hand state classification: five states per hand, two classification
//! heads, and mask-channel input augmentation (RGB alone, RGB + hand masks,
//! or RGB + hand + object masks).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMap;
use crate::pipeline::predictor::{conv3x3_forward, conv3x3_input_grad, conv3x3_param_grad, relu};
use crate::pipeline::Tensor;

pub const STATE_COUNT: usize = 5;

/// The five per-hand interaction states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandState {
    Portable,
    Stationary,
    NoContact,
    SelfContact,
    NotExist,
}

impl HandState {
    pub fn all() -> [HandState; 5] {
        [
            HandState::Portable,
            HandState::Stationary,
            HandState::NoContact,
            HandState::SelfContact,
            HandState::NotExist,
        ]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HandState::Portable => "portable",
            HandState::Stationary => "stationary",
            HandState::NoContact => "no-contact",
            HandState::SelfContact => "self-contact",
            HandState::NotExist => "not-exist",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "portable" => Ok(HandState::Portable),
            "stationary" => Ok(HandState::Stationary),
            "no-contact" => Ok(HandState::NoContact),
            "self-contact" => Ok(HandState::SelfContact),
            "not-exist" => Ok(HandState::NotExist),
            other => Err(Error::invalid(format!("unknown hand state {other:?}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            HandState::Portable => 0,
            HandState::Stationary => 1,
            HandState::NoContact => 2,
            HandState::SelfContact => 3,
            HandState::NotExist => 4,
        }
    }

    pub fn from_index(i: usize) -> HandState {
        Self::all()[i]
    }
}

/// The state of both hands in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandStatePair {
    pub left: HandState,
    pub right: HandState,
}

/// Annotation file: one `basename<TAB>left<TAB>right` record per image,
/// strict five-name token set.
pub fn load_state_annotations(path: &Path) -> Result<Vec<(String, HandStatePair)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                path,
                format!("line {}: expected 3 tab-separated fields", lineno + 1),
            ));
        }
        let pair = HandStatePair {
            left: HandState::parse(fields[1])
                .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?,
            right: HandState::parse(fields[2])
                .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?,
        };
        out.push((fields[0].to_string(), pair));
    }
    Ok(out)
}

pub fn save_state_annotations(records: &[(String, HandStatePair)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (name, pair) in records {
        out.push_str(&format!(
            "{name}\t{}\t{}\n",
            pair.left.as_str(),
            pair.right.as_str()
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Input channel layout for the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateInputMode {
    /// 3 channels.
    Rgb,
    /// 5 channels: RGB + left/right hand masks.
    RgbHand,
    /// 8 channels: RGB + hand masks + left/right/two-hand object masks.
    RgbHandObject,
}

impl StateInputMode {
    pub fn channels(self) -> usize {
        match self {
            StateInputMode::Rgb => 3,
            StateInputMode::RgbHand => 5,
            StateInputMode::RgbHandObject => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateInputMode::Rgb => "rgb",
            StateInputMode::RgbHand => "rgb+hand",
            StateInputMode::RgbHandObject => "rgb+hand+object",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(StateInputMode::Rgb),
            "rgb+hand" => Ok(StateInputMode::RgbHand),
            "rgb+hand+object" => Ok(StateInputMode::RgbHandObject),
            other => Err(Error::invalid(format!("unknown input mode {other:?}"))),
        }
    }
}

fn class_plane(labels: &LabelMap, id: u8) -> Tensor {
    let (h, w) = (labels.height() as usize, labels.width() as usize);
    let mut t = Tensor::zeros(1, h, w);
    for (i, &c) in labels.classes().iter().enumerate() {
        if c == id {
            t.data_mut()[i] = 1.0;
        }
    }
    t
}

/// Stack the classifier input: RGB alone for [`StateInputMode::Rgb`] (labels
/// must be absent), plus one-vs-rest mask channels of the label map for the
/// mask modes (labels required and dimension-matched).
pub fn build_state_input(
    image: &Tensor,
    mode: StateInputMode,
    labels: Option<&LabelMap>,
) -> Result<Tensor> {
    if image.channels() != 3 {
        return Err(Error::invalid("expected a 3-channel image tensor"));
    }
    match (mode, labels) {
        (StateInputMode::Rgb, None) => Ok(image.clone()),
        (StateInputMode::Rgb, Some(_)) => Err(Error::invalid(
            "rgb mode takes no labels; pass None or pick a mask mode",
        )),
        (_, None) => Err(Error::invalid(format!(
            "mode {} requires a label map",
            mode.as_str()
        ))),
        (mode, Some(labels)) => {
            if labels.width() as usize != image.width()
                || labels.height() as usize != image.height()
            {
                return Err(Error::DimensionMismatch {
                    expected_w: image.width() as u32,
                    expected_h: image.height() as u32,
                    got_w: labels.width(),
                    got_h: labels.height(),
                });
            }
            let mut planes = vec![class_plane(labels, 1), class_plane(labels, 2)];
            if mode == StateInputMode::RgbHandObject {
                planes.push(class_plane(labels, 3));
                planes.push(class_plane(labels, 4));
                planes.push(class_plane(labels, 5));
            }
            let mut parts: Vec<&Tensor> = vec![image];
            parts.extend(planes.iter());
            Tensor::concat(&parts)
        }
    }
}

/// Variant fed with predicted (soft) mask planes instead of ground-truth
/// labels; plane count must complete the mode's channel layout.
pub fn build_state_input_soft(
    image: &Tensor,
    mode: StateInputMode,
    planes: &[&Tensor],
) -> Result<Tensor> {
    if image.channels() != 3 {
        return Err(Error::invalid("expected a 3-channel image tensor"));
    }
    let needed = mode.channels() - 3;
    let got: usize = planes.iter().map(|p| p.channels()).sum();
    if got != needed {
        return Err(Error::invalid(format!(
            "mode {} needs {needed} mask channels, got {got}",
            mode.as_str()
        )));
    }
    let mut parts: Vec<&Tensor> = vec![image];
    parts.extend_from_slice(planes);
    Tensor::concat(&parts)
}

const HIDDEN: usize = 8;

/// Reference classifier: two 3x3 conv-ReLU layers, global average pooling,
/// and two linear 5-way heads (left and right hand).
#[derive(Debug, Clone)]
pub struct StateNet {
    in_channels: usize,
    // [w1, b1, w2, b2, w_left, b_left, w_right, b_right]
    params: Vec<f64>,
}

impl StateNet {
    pub fn new(in_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for (fan_in, w_count, b_count) in [
            (in_channels * 9, HIDDEN * in_channels * 9, HIDDEN),
            (HIDDEN * 9, HIDDEN * HIDDEN * 9, HIDDEN),
            (HIDDEN, STATE_COUNT * HIDDEN, STATE_COUNT),
            (HIDDEN, STATE_COUNT * HIDDEN, STATE_COUNT),
        ] {
            let bound = (6.0 / fan_in as f64).sqrt();
            for _ in 0..w_count {
                params.push(rng.gen_range(-bound..bound));
            }
            for _ in 0..b_count {
                params.push(0.0);
            }
        }
        StateNet {
            in_channels,
            params,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::invalid("parameter length mismatch"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn offsets(&self) -> [usize; 9] {
        let c = self.in_channels;
        let sizes = [
            HIDDEN * c * 9,
            HIDDEN,
            HIDDEN * HIDDEN * 9,
            HIDDEN,
            STATE_COUNT * HIDDEN,
            STATE_COUNT,
            STATE_COUNT * HIDDEN,
            STATE_COUNT,
        ];
        let mut out = [0usize; 9];
        for (i, s) in sizes.iter().enumerate() {
            out[i + 1] = out[i] + s;
        }
        out
    }

    fn piece(&self, i: usize) -> &[f64] {
        let o = self.offsets();
        &self.params[o[i]..o[i + 1]]
    }

    fn trunk(&self, input: &Tensor) -> Result<(Tensor, Tensor, [f64; HIDDEN])> {
        if input.channels() != self.in_channels {
            return Err(Error::invalid(format!(
                "classifier expects {} channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        let z1 = conv3x3_forward(input, self.piece(0), self.piece(1), HIDDEN);
        let z2 = conv3x3_forward(&relu(&z1), self.piece(2), self.piece(3), HIDDEN);
        let a2 = relu(&z2);
        let hw = (a2.height() * a2.width()) as f64;
        let mut pooled = [0.0; HIDDEN];
        for (c, p) in pooled.iter_mut().enumerate() {
            *p = a2.channel(c).iter().sum::<f64>() / hw;
        }
        Ok((z1, z2, pooled))
    }

    /// Score vectors of the left and right head.
    pub fn forward(&self, input: &Tensor) -> Result<([f64; STATE_COUNT], [f64; STATE_COUNT])> {
        let (_, _, pooled) = self.trunk(input)?;
        Ok((
            head_scores(self.piece(4), self.piece(5), &pooled),
            head_scores(self.piece(6), self.piece(7), &pooled),
        ))
    }

    pub fn predict(&self, input: &Tensor) -> Result<HandStatePair> {
        let (left, right) = self.forward(input)?;
        Ok(HandStatePair {
            left: HandState::from_index(argmax(&left)),
            right: HandState::from_index(argmax(&right)),
        })
    }

    /// Summed cross entropy of both heads; parameter gradients accumulate
    /// into `grad`.
    pub fn loss_and_grad(
        &self,
        input: &Tensor,
        truth: &HandStatePair,
        grad: &mut [f64],
    ) -> Result<f64> {
        if grad.len() != self.params.len() {
            return Err(Error::invalid("gradient buffer length mismatch"));
        }
        let (z1, z2, pooled) = self.trunk(input)?;
        let left_scores = head_scores(self.piece(4), self.piece(5), &pooled);
        let right_scores = head_scores(self.piece(6), self.piece(7), &pooled);
        let (loss_l, dscores_l) = softmax_ce(&left_scores, truth.left.index());
        let (loss_r, dscores_r) = softmax_ce(&right_scores, truth.right.index());

        let o = self.offsets();
        let mut dpooled = [0.0; HIDDEN];
        for (head, dscores) in [(4usize, &dscores_l), (6usize, &dscores_r)] {
            let w = self.piece(head).to_vec();
            for s in 0..STATE_COUNT {
                for c in 0..HIDDEN {
                    grad[o[head] + s * HIDDEN + c] += dscores[s] * pooled[c];
                    dpooled[c] += dscores[s] * w[s * HIDDEN + c];
                }
                grad[o[head] + STATE_COUNT * HIDDEN + s] += dscores[s];
            }
        }

        // Back through global average pooling and the ReLUs.
        let (h, w) = (input.height(), input.width());
        let hw = (h * w) as f64;
        let mut dz2 = Tensor::zeros(HIDDEN, h, w);
        for c in 0..HIDDEN {
            let g = dpooled[c] / hw;
            for v in &mut dz2.data_mut()[c * h * w..(c + 1) * h * w] {
                *v = g;
            }
        }
        for (g, &z) in dz2.data_mut().iter_mut().zip(z2.data()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }

        let a1 = relu(&z1);
        {
            let (head_grads, _) = grad.split_at_mut(o[4]);
            let (conv1_grads, conv2_grads) = head_grads.split_at_mut(o[2]);
            let (gw1, gb1) = conv1_grads.split_at_mut(o[1]);
            let (gw2, gb2) = conv2_grads.split_at_mut(o[3] - o[2]);
            conv3x3_param_grad(&a1, &dz2, gw2, gb2);
            let mut dz1 = conv3x3_input_grad(&dz2, self.piece(2), HIDDEN);
            for (g, &z) in dz1.data_mut().iter_mut().zip(z1.data()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            conv3x3_param_grad(input, &dz1, gw1, gb1);
        }
        Ok(loss_l + loss_r)
    }
}

fn head_scores(w: &[f64], b: &[f64], features: &[f64; HIDDEN]) -> [f64; STATE_COUNT] {
    let mut out = [0.0; STATE_COUNT];
    for s in 0..STATE_COUNT {
        let mut acc = b[s];
        for c in 0..HIDDEN {
            acc += w[s * HIDDEN + c] * features[c];
        }
        out[s] = acc;
    }
    out
}

fn softmax_ce(scores: &[f64; STATE_COUNT], target: usize) -> (f64, [f64; STATE_COUNT]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: [f64; STATE_COUNT] = std::array::from_fn(|i| (scores[i] - max).exp());
    let sum: f64 = exps.iter().sum();
    let mut grad = [0.0; STATE_COUNT];
    for s in 0..STATE_COUNT {
        grad[s] = exps[s] / sum;
    }
    let loss = -(exps[target] / sum).max(1e-300).ln();
    grad[target] -= 1.0;
    (loss, grad)
}

fn argmax(scores: &[f64; STATE_COUNT]) -> usize {
    let mut best = 0;
    for s in 1..STATE_COUNT {
        if scores[s] > scores[best] {
            best = s;
        }
    }
    best
}

/// One labeled classification example. Labels may be absent for RGB-only
/// training.
pub struct StateExample {
    pub image: Tensor,
    pub labels: Option<LabelMap>,
    pub truth: HandStatePair,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StateTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for StateTrainConfig {
    fn default() -> Self {
        StateTrainConfig {
            epochs: 30,
            batch_size: 8,
            learning_rate: 0.03,
            momentum: 0.9,
            weight_decay: 0.0005,
            seed: 0,
        }
    }
}

/// Training log line: per-epoch mean loss and per-head training accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub left_accuracy: f64,
    pub right_accuracy: f64,
}

/// Train the reference classifier on examples assembled for `mode`.
pub fn train_state_classifier(
    examples: &[StateExample],
    mode: StateInputMode,
    config: &StateTrainConfig,
) -> Result<(StateNet, Vec<EpochLog>)> {
    if examples.is_empty() {
        return Err(Error::invalid("train_state_classifier: empty dataset"));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::invalid("epochs and batch_size must be positive"));
    }
    let inputs: Vec<Tensor> = examples
        .iter()
        .map(|e| build_state_input(&e.image, mode, e.labels.as_ref()))
        .collect::<Result<_>>()?;

    let mut net = StateNet::new(mode.channels(), config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut velocity = vec![0.0; net.param_count()];
    let mut logs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; net.param_count()];
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += net.loss_and_grad(&inputs[i], &examples[i].truth, &mut grad)?;
            }
            batch_loss /= chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    iteration: epoch as u64,
                    message: format!("loss is {batch_loss}"),
                });
            }
            epoch_loss += batch_loss * chunk.len() as f64;
            let mut params = net.params();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                let g = g / chunk.len() as f64 + config.weight_decay * *p;
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
            net.set_params(&params)?;
        }

        let mut correct_left = 0usize;
        let mut correct_right = 0usize;
        for (input, example) in inputs.iter().zip(examples) {
            let pred = net.predict(input)?;
            if pred.left == example.truth.left {
                correct_left += 1;
            }
            if pred.right == example.truth.right {
                correct_right += 1;
            }
        }
        logs.push(EpochLog {
            epoch,
            loss: epoch_loss / examples.len() as f64,
            left_accuracy: correct_left as f64 / examples.len() as f64,
            right_accuracy: correct_right as f64 / examples.len() as f64,
        });
    }
    Ok((net, logs))
}

/// Per-head classification metrics, macro-averaged over the five states.
/// States absent from the truth set drop out of the macro means.
#[derive(Debug, Clone, Serialize)]
pub struct HeadMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// confusion[truth][pred]
    pub confusion: [[u64; STATE_COUNT]; STATE_COUNT],
}

#[derive(Debug, Clone, Serialize)]
pub struct StateMetricsReport {
    pub left: HeadMetrics,
    pub right: HeadMetrics,
}

fn head_metrics(pairs: &[(usize, usize)]) -> HeadMetrics {
    let mut confusion = [[0u64; STATE_COUNT]; STATE_COUNT];
    let mut correct = 0u64;
    for &(truth, pred) in pairs {
        confusion[truth][pred] += 1;
        if truth == pred {
            correct += 1;
        }
    }
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    for s in 0..STATE_COUNT {
        let tp = confusion[s][s];
        let truth_total: u64 = confusion[s].iter().sum();
        let pred_total: u64 = (0..STATE_COUNT).map(|t| confusion[t][s]).sum();
        if truth_total == 0 {
            continue; // absent from truth: dropped from the macro means
        }
        let precision = if pred_total == 0 {
            0.0
        } else {
            tp as f64 / pred_total as f64
        };
        let recall = tp as f64 / truth_total as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        precisions.push(precision);
        recalls.push(recall);
        f1s.push(f1);
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            1.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    HeadMetrics {
        accuracy: if pairs.is_empty() {
            1.0
        } else {
            correct as f64 / pairs.len() as f64
        },
        macro_precision: mean(&precisions),
        macro_recall: mean(&recalls),
        macro_f1: mean(&f1s),
        confusion,
    }
}

/// Compare aligned prediction/truth state sets.
pub fn state_metrics(
    pred: &[HandStatePair],
    truth: &[HandStatePair],
) -> Result<StateMetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "state_metrics: {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    let left: Vec<(usize, usize)> = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t.left.index(), p.left.index()))
        .collect();
    let right: Vec<(usize, usize)> = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t.right.index(), p.right.index()))
        .collect();
    Ok(StateMetricsReport {
        left: head_metrics(&left),
        right: head_metrics(&right),
    })
}

const STATE_CKPT_MAGIC: &[u8; 8] = b"HOSEGST1";

pub fn save_state_net(net: &StateNet, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(STATE_CKPT_MAGIC);
    out.extend_from_slice(&(net.in_channels as u16).to_le_bytes());
    out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    for p in &net.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_state_net(path: &Path) -> Result<StateNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 18 || &bytes[0..8] != STATE_CKPT_MAGIC {
        return Err(Error::format(path, "not a state classifier checkpoint"));
    }
    let in_channels = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    if bytes.len() != 18 + count * 8 {
        return Err(Error::format(path, "truncated state classifier checkpoint"));
    }
    let params: Vec<f64> = bytes[18..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut net = StateNet::new(in_channels, 0);
    net.set_params(&params)?;
    Ok(net)
}
