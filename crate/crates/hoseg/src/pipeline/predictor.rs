//! The dense-predictor contract and the in-crate reference predictor: a
//! small fully-convolutional stack (3x3 convs, two hidden ReLU layers,
//! linear output) with hand-written backprop. Production backbones attach
//! through the same traits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Inference contract: logits with the declared channel count and the
/// input's spatial dimensions.
pub trait DensePredictor {
    fn in_channels(&self) -> usize;
    fn out_channels(&self) -> usize;
    fn forward(&self, input: &Tensor) -> Result<Tensor>;
}

/// Training contract on top of [`DensePredictor`]: flat parameter access and
/// backprop of a logit gradient into parameter gradients.
pub trait TrainablePredictor: DensePredictor {
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    /// Accumulate d(loss)/d(params) into `grad` given d(loss)/d(logits).
    fn backward(&self, input: &Tensor, grad_logits: &Tensor, grad: &mut [f64]) -> Result<()>;
}

/// 3x3 zero-padded convolution: out[oc] = bias[oc] + sum_ic w[oc][ic] * in[ic].
pub(crate) fn conv3x3_forward(
    input: &Tensor,
    weights: &[f64],
    bias: &[f64],
    out_channels: usize,
) -> Tensor {
    let (c_in, h, w) = (input.channels(), input.height(), input.width());
    let mut out = Tensor::zeros(out_channels, h, w);
    for oc in 0..out_channels {
        let out_plane = &mut out.data_mut()[oc * h * w..(oc + 1) * h * w];
        out_plane.fill(bias[oc]);
    }
    for oc in 0..out_channels {
        for ic in 0..c_in {
            let in_plane = input.channel(ic);
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let wt = weights[((oc * c_in + ic) * 3 + ky) * 3 + kx];
                    if wt == 0.0 {
                        continue;
                    }
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    let y0 = (-dy).max(0) as usize;
                    let y1 = (h as isize).min(h as isize - dy) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize).min(w as isize - dx) as usize;
                    for y in y0..y1 {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let dst_row = (oc * h + y) * w;
                        let src = &in_plane[src_row + ((x0 as isize + dx) as usize)
                            ..src_row + ((x1 as isize + dx) as usize)];
                        let dst = &mut out.data_mut()[dst_row + x0..dst_row + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wt * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient of the 3x3 conv w.r.t. its input.
pub(crate) fn conv3x3_input_grad(
    grad_out: &Tensor,
    weights: &[f64],
    c_in: usize,
) -> Tensor {
    let (c_out, h, w) = (grad_out.channels(), grad_out.height(), grad_out.width());
    let mut grad_in = Tensor::zeros(c_in, h, w);
    for oc in 0..c_out {
        let go_plane = grad_out.channel(oc);
        for ic in 0..c_in {
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let wt = weights[((oc * c_in + ic) * 3 + ky) * 3 + kx];
                    if wt == 0.0 {
                        continue;
                    }
                    // out[y][x] uses in[y+ky-1][x+kx-1], so in[y][x] feeds
                    // out[y-ky+1][x-kx+1].
                    let dy = 1 - ky as isize;
                    let dx = 1 - kx as isize;
                    let y0 = (-dy).max(0) as usize;
                    let y1 = (h as isize).min(h as isize - dy) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize).min(w as isize - dx) as usize;
                    for y in y0..y1 {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let dst_row = (ic * h + y) * w;
                        let src = &go_plane[src_row + ((x0 as isize + dx) as usize)
                            ..src_row + ((x1 as isize + dx) as usize)];
                        let dst = &mut grad_in.data_mut()[dst_row + x0..dst_row + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wt * s;
                        }
                    }
                }
            }
        }
    }
    grad_in
}

/// Gradients of the 3x3 conv w.r.t. weights and bias, accumulated.
pub(crate) fn conv3x3_param_grad(
    input: &Tensor,
    grad_out: &Tensor,
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
) {
    let (c_in, h, w) = (input.channels(), input.height(), input.width());
    let c_out = grad_out.channels();
    for oc in 0..c_out {
        let go_plane = grad_out.channel(oc);
        grad_bias[oc] += go_plane.iter().sum::<f64>();
        for ic in 0..c_in {
            let in_plane = input.channel(ic);
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    let y0 = (-dy).max(0) as usize;
                    let y1 = (h as isize).min(h as isize - dy) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize).min(w as isize - dx) as usize;
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let go_row = y * w;
                        let src = &in_plane[src_row + ((x0 as isize + dx) as usize)
                            ..src_row + ((x1 as isize + dx) as usize)];
                        let go = &go_plane[go_row + x0..go_row + x1];
                        for (s, g) in src.iter().zip(go) {
                            acc += s * g;
                        }
                    }
                    grad_weights[((oc * c_in + ic) * 3 + ky) * 3 + kx] += acc;
                }
            }
        }
    }
}

pub(crate) fn relu(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Layer sizes of the reference predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvNetShape {
    pub in_channels: usize,
    pub hidden: usize,
    pub out_channels: usize,
}

impl ConvNetShape {
    pub fn param_count(&self) -> usize {
        let (c, hdn, k) = (self.in_channels, self.hidden, self.out_channels);
        (hdn * c * 9 + hdn) + (hdn * hdn * 9 + hdn) + (k * hdn * 9 + k)
    }
}

/// Reference fully-convolutional predictor: conv-ReLU, conv-ReLU, conv.
#[derive(Debug, Clone)]
pub struct ConvNet {
    shape: ConvNetShape,
    // [w1, b1, w2, b2, w3, b3] flattened; weights are (out, in, 3, 3).
    params: Vec<f64>,
}

pub const DEFAULT_HIDDEN_CHANNELS: usize = 16;

impl ConvNet {
    /// Seeded uniform He-style initialization; biases start at zero.
    pub fn new(in_channels: usize, out_channels: usize, hidden: usize, seed: u64) -> Self {
        let shape = ConvNetShape {
            in_channels,
            hidden,
            out_channels,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(shape.param_count());
        for (fan_in, w_count, b_count) in [
            (in_channels * 9, hidden * in_channels * 9, hidden),
            (hidden * 9, hidden * hidden * 9, hidden),
            (hidden * 9, out_channels * hidden * 9, out_channels),
        ] {
            let bound = (6.0 / fan_in as f64).sqrt();
            for _ in 0..w_count {
                params.push(rng.gen_range(-bound..bound));
            }
            for _ in 0..b_count {
                params.push(0.0);
            }
        }
        ConvNet { shape, params }
    }

    pub fn with_default_hidden(in_channels: usize, out_channels: usize, seed: u64) -> Self {
        Self::new(in_channels, out_channels, DEFAULT_HIDDEN_CHANNELS, seed)
    }

    /// Rebuild a predictor from a shape and a flat parameter vector (the
    /// checkpoint layout).
    pub fn from_parts(shape: ConvNetShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters for shape {shape:?}, got {}",
                shape.param_count(),
                params.len()
            )));
        }
        Ok(ConvNet { shape, params })
    }

    pub fn shape(&self) -> ConvNetShape {
        self.shape
    }

    fn slices(&self) -> [(usize, usize); 6] {
        let ConvNetShape {
            in_channels: c,
            hidden: hdn,
            out_channels: k,
        } = self.shape;
        let w1 = hdn * c * 9;
        let w2 = hdn * hdn * 9;
        let w3 = k * hdn * 9;
        let mut offsets = [(0usize, 0usize); 6];
        let sizes = [w1, hdn, w2, hdn, w3, k];
        let mut at = 0;
        for (i, &s) in sizes.iter().enumerate() {
            offsets[i] = (at, at + s);
            at += s;
        }
        offsets
    }

    fn piece<'a>(&'a self, i: usize) -> &'a [f64] {
        let (a, b) = self.slices()[i];
        &self.params[a..b]
    }
}

impl DensePredictor for ConvNet {
    fn in_channels(&self) -> usize {
        self.shape.in_channels
    }

    fn out_channels(&self) -> usize {
        self.shape.out_channels
    }

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.channels() != self.shape.in_channels {
            return Err(Error::invalid(format!(
                "predictor expects {} input channels, got {}",
                self.shape.in_channels,
                input.channels()
            )));
        }
        let a1 = relu(&conv3x3_forward(
            input,
            self.piece(0),
            self.piece(1),
            self.shape.hidden,
        ));
        let a2 = relu(&conv3x3_forward(
            &a1,
            self.piece(2),
            self.piece(3),
            self.shape.hidden,
        ));
        Ok(conv3x3_forward(
            &a2,
            self.piece(4),
            self.piece(5),
            self.shape.out_channels,
        ))
    }
}

impl TrainablePredictor for ConvNet {
    fn param_count(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn backward(&self, input: &Tensor, grad_logits: &Tensor, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::invalid("gradient buffer length mismatch"));
        }
        if grad_logits.channels() != self.shape.out_channels
            || grad_logits.height() != input.height()
            || grad_logits.width() != input.width()
        {
            return Err(Error::invalid("grad_logits shape mismatch"));
        }
        // Recompute the forward activations (cheaper than caching for a
        // 3-layer net at these sizes).
        let z1 = conv3x3_forward(input, self.piece(0), self.piece(1), self.shape.hidden);
        let a1 = relu(&z1);
        let z2 = conv3x3_forward(&a1, self.piece(2), self.piece(3), self.shape.hidden);
        let a2 = relu(&z2);

        let s = self.slices();
        let (gw, rest) = grad.split_at_mut(s[0].1);
        let (gb, rest) = rest.split_at_mut(s[1].1 - s[1].0);
        let (gw2, rest) = rest.split_at_mut(s[2].1 - s[2].0);
        let (gb2, rest) = rest.split_at_mut(s[3].1 - s[3].0);
        let (gw3, gb3) = rest.split_at_mut(s[4].1 - s[4].0);

        conv3x3_param_grad(&a2, grad_logits, gw3, gb3);
        let mut da2 = conv3x3_input_grad(grad_logits, self.piece(4), self.shape.hidden);
        for (g, &z) in da2.data_mut().iter_mut().zip(z2.data()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        conv3x3_param_grad(&a1, &da2, gw2, gb2);
        let mut da1 = conv3x3_input_grad(&da2, self.piece(2), self.shape.hidden);
        for (g, &z) in da1.data_mut().iter_mut().zip(z1.data()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        conv3x3_param_grad(input, &da1, gw, gb);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_keeps_spatial_dims() {
        let net = ConvNet::new(3, 4, 8, 1);
        for (h, w) in [(5usize, 7usize), (1, 1), (12, 3)] {
            let input = Tensor::zeros(3, h, w);
            let out = net.forward(&input).unwrap();
            assert_eq!((out.channels(), out.height(), out.width()), (4, h, w));
        }
    }

    #[test]
    fn forward_rejects_wrong_channel_count() {
        let net = ConvNet::new(3, 4, 8, 1);
        assert!(net.forward(&Tensor::zeros(5, 4, 4)).is_err());
    }

    #[test]
    fn same_seed_same_params() {
        let a = ConvNet::new(5, 1, 16, 77);
        let b = ConvNet::new(5, 1, 16, 77);
        assert_eq!(a.params(), b.params());
        let c = ConvNet::new(5, 1, 16, 78);
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn param_count_matches_shape() {
        let net = ConvNet::new(6, 4, 16, 0);
        assert_eq!(net.param_count(), net.shape().param_count());
        assert_eq!(
            net.param_count(),
            (16 * 6 * 9 + 16) + (16 * 16 * 9 + 16) + (4 * 16 * 9 + 4)
        );
    }

    /// Spot-check the analytic parameter gradient against central finite
    /// differences on a tiny net with a quadratic loss. The full-scale
    /// gradient check over the real losses lives in the acceptance suite.
    #[test]
    fn backward_matches_finite_differences() {
        let net = ConvNet::new(2, 2, 3, 5);
        let mut input = Tensor::zeros(2, 4, 4);
        for (i, v) in input.data_mut().iter_mut().enumerate() {
            *v = ((i * 31 % 17) as f64 - 8.0) / 8.0;
        }
        // loss = 0.5 * sum(logits^2)  =>  dloss/dlogits = logits.
        let loss_of = |n: &ConvNet| -> f64 {
            let out = n.forward(&input).unwrap();
            0.5 * out.data().iter().map(|v| v * v).sum::<f64>()
        };
        let logits = net.forward(&input).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&input, &logits, &mut grad).unwrap();

        let params = net.params();
        let h = 1e-6;
        for &pi in &[0usize, 7, 55, params.len() / 2, params.len() - 1] {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = params.clone();
            p[pi] += h;
            plus.set_params(&p).unwrap();
            p[pi] -= 2.0 * h;
            minus.set_params(&p).unwrap();
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let denom = numeric.abs().max(grad[pi].abs()).max(1e-8);
            assert!(
                (numeric - grad[pi]).abs() / denom < 1e-4,
                "param {pi}: analytic {} vs numeric {numeric}",
                grad[pi]
            );
        }
    }
}
