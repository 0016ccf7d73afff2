//! Per-pixel losses and their logit gradients.

use super::stage::StageTarget;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::mask::ContactBoundaryMap;

/// Per-pixel softmax over the channel axis.
pub fn softmax(logits: &Tensor) -> Tensor {
    let (c, h, w) = (logits.channels(), logits.height(), logits.width());
    let mut out = logits.clone();
    for y in 0..h {
        for x in 0..w {
            let mut max = f64::NEG_INFINITY;
            for ch in 0..c {
                max = max.max(logits.at(ch, y, x));
            }
            let mut sum = 0.0;
            for ch in 0..c {
                let e = (logits.at(ch, y, x) - max).exp();
                out.set(ch, y, x, e);
                sum += e;
            }
            for ch in 0..c {
                out.set(ch, y, x, out.at(ch, y, x) / sum);
            }
        }
    }
    out
}

/// Mean per-pixel multi-class cross entropy and its logit gradient.
pub fn cross_entropy_with_grad(logits: &Tensor, target: &[u8]) -> Result<(f64, Tensor)> {
    let (c, h, w) = (logits.channels(), logits.height(), logits.width());
    if target.len() != h * w {
        return Err(Error::invalid("cross entropy: target length mismatch"));
    }
    if let Some(&t) = target.iter().find(|&&t| (t as usize) >= c) {
        return Err(Error::invalid(format!(
            "cross entropy: target class {t} out of range for {c} channels"
        )));
    }
    let probs = softmax(logits);
    let n = (h * w) as f64;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for y in 0..h {
        for x in 0..w {
            let t = target[y * w + x] as usize;
            loss -= probs.at(t, y, x).max(1e-300).ln();
            grad.set(t, y, x, grad.at(t, y, x) - 1.0);
        }
    }
    for v in grad.data_mut() {
        *v /= n;
    }
    Ok((loss / n, grad))
}

/// Mean binary cross entropy on a single logit channel, numerically stable,
/// with its logit gradient.
pub fn bce_logits_with_grad(logits: &Tensor, target: &[bool]) -> Result<(f64, Tensor)> {
    if logits.channels() != 1 {
        return Err(Error::invalid("bce: expected a single logit channel"));
    }
    if target.len() != logits.pixels() {
        return Err(Error::invalid("bce: target length mismatch"));
    }
    let n = target.len() as f64;
    let mut loss = 0.0;
    let mut grad = logits.clone();
    for (g, (&z, &t)) in grad
        .data_mut()
        .iter_mut()
        .zip(logits.data().iter().zip(target.iter()))
    {
        let t = if t { 1.0 } else { 0.0 };
        // max(z,0) - z*t + ln(1 + exp(-|z|))
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        let p = 1.0 / (1.0 + (-z).exp());
        *g = (p - t) / n;
    }
    Ok((loss / n, grad))
}

/// Loss of a stage's logits against its target.
pub fn stage_loss_with_grad(logits: &Tensor, target: &StageTarget) -> Result<(f64, Tensor)> {
    match target {
        StageTarget::Classes(t) => cross_entropy_with_grad(logits, t),
        StageTarget::Binary(t) => bce_logits_with_grad(logits, t),
    }
}

/// Mean binary cross entropy of a boundary *probability* map against a
/// boundary target. Probabilities must lie strictly inside (0, 1); clamp
/// before calling when predictions may saturate.
pub fn boundary_loss(pred: &Tensor, target: &ContactBoundaryMap) -> Result<f64> {
    if pred.channels() != 1 {
        return Err(Error::invalid("boundary_loss: expected one channel"));
    }
    if pred.height() != target.height() as usize || pred.width() != target.width() as usize {
        return Err(Error::DimensionMismatch {
            expected_w: target.width(),
            expected_h: target.height(),
            got_w: pred.width() as u32,
            got_h: pred.height() as u32,
        });
    }
    if pred.data().iter().any(|&p| p <= 0.0 || p >= 1.0) {
        return Err(Error::invalid(
            "boundary_loss: probabilities must lie strictly inside (0, 1)",
        ));
    }
    let n = pred.pixels() as f64;
    let mut loss = 0.0;
    for (&p, &t) in pred.data().iter().zip(target.mask().bits()) {
        loss -= if t { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(loss / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BinaryMask;

    #[test]
    fn softmax_normalizes_per_pixel() {
        let logits = Tensor::from_data(3, 1, 2, vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let p = softmax(&logits);
        for x in 0..2 {
            let sum: f64 = (0..3).map(|c| p.at(c, 0, x)).sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn boundary_loss_on_near_perfect_prediction() {
        let mut bits = vec![false; 16];
        bits[3] = true;
        bits[9] = true;
        let cb = ContactBoundaryMap::from_mask(BinaryMask::from_bits(4, 4, bits.clone()).unwrap());
        let eps = 1e-7;
        let probs: Vec<f64> = bits
            .iter()
            .map(|&b| if b { 1.0 - eps } else { eps })
            .collect();
        let pred = Tensor::plane(4, 4, probs).unwrap();
        let loss = boundary_loss(&pred, &cb).unwrap();
        assert!(loss <= 2e-7, "loss {loss}");
    }

    #[test]
    fn boundary_loss_at_half_is_ln_two() {
        let cb = ContactBoundaryMap::from_mask(
            BinaryMask::from_bits(3, 3, vec![true, false, true, false, true, false, true, false, true]).unwrap(),
        );
        let pred = Tensor::plane(3, 3, vec![0.5; 9]).unwrap();
        let loss = boundary_loss(&pred, &cb).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn boundary_loss_is_scale_free_under_tiling() {
        // Tiling the content 2x horizontally keeps the mean unchanged.
        let bits = vec![true, false, false, true];
        let probs = vec![0.8, 0.3, 0.1, 0.6];
        let cb1 = ContactBoundaryMap::from_mask(BinaryMask::from_bits(2, 2, bits.clone()).unwrap());
        let pred1 = Tensor::plane(2, 2, probs.clone()).unwrap();

        let mut bits2 = Vec::new();
        let mut probs2 = Vec::new();
        for row in 0..2 {
            for _ in 0..2 {
                bits2.extend_from_slice(&bits[row * 2..row * 2 + 2]);
                probs2.extend_from_slice(&probs[row * 2..row * 2 + 2]);
            }
        }
        let cb2 = ContactBoundaryMap::from_mask(BinaryMask::from_bits(4, 2, bits2).unwrap());
        let pred2 = Tensor::plane(2, 4, probs2).unwrap();

        let a = boundary_loss(&pred1, &cb1).unwrap();
        let b = boundary_loss(&pred2, &cb2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn boundary_loss_rejects_out_of_range() {
        let cb = ContactBoundaryMap::empty(2, 1).unwrap();
        let pred = Tensor::plane(2, 1, vec![0.5, 1.0]).unwrap();
        assert!(boundary_loss(&pred, &cb).is_err());
    }

    #[test]
    fn cross_entropy_gradient_sums_to_zero_per_pixel() {
        let logits = Tensor::from_data(3, 1, 2, vec![0.2, -1.0, 0.7, 2.0, 0.0, -0.5]).unwrap();
        let (_, grad) = cross_entropy_with_grad(&logits, &[2, 0]).unwrap();
        for x in 0..2 {
            let sum: f64 = (0..3).map(|c| grad.at(c, 0, x)).sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn bce_matches_boundary_loss_on_probabilities() {
        let bits = vec![true, false, true, true];
        let logits = Tensor::plane(2, 2, vec![1.2, -0.7, 0.3, 2.5]).unwrap();
        let (bce, _) = bce_logits_with_grad(&logits, &bits).unwrap();
        let probs: Vec<f64> = logits.data().iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect();
        let cb = ContactBoundaryMap::from_mask(BinaryMask::from_bits(2, 2, bits).unwrap());
        let direct = boundary_loss(&Tensor::plane(2, 2, probs).unwrap(), &cb).unwrap();
        assert!((bce - direct).abs() < 1e-12);
    }
}
