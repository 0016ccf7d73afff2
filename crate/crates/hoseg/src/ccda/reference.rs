//! Deterministic reference handles: a diffusion-fill inpainter and a
//! histogram feature embedder. Both exist so the augmentation pipeline runs
//! end to end without any learned model; production inpainters and deep
//! feature extractors plug in through the same traits.

use image::RgbImage;

use super::{Embedder, Inpainter};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Iterative neighborhood-mean diffusion fill.
///
/// Masked pixels start at the mean of the known pixels and are repeatedly
/// replaced by the mean of their in-bounds 4-neighbors (Jacobi sweeps,
/// known pixels fixed) until convergence or `max_sweeps`. When the mask
/// covers the whole frame there is nothing to diffuse from, so the output
/// is constant at the mean of the original image's border ring.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionInpainter {
    pub max_sweeps: usize,
    /// Convergence threshold on the max per-channel change, in 0-255 units.
    pub tolerance: f64,
}

impl Default for DiffusionInpainter {
    fn default() -> Self {
        DiffusionInpainter {
            max_sweeps: 100,
            tolerance: 0.5,
        }
    }
}

impl Inpainter for DiffusionInpainter {
    fn inpaint(&self, image: &RgbImage, removal: &BinaryMask) -> Result<RgbImage> {
        let (w, h) = image.dimensions();
        if removal.width() != w || removal.height() != h {
            return Err(Error::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                got_w: removal.width(),
                got_h: removal.height(),
            });
        }
        if removal.is_empty() {
            return Ok(image.clone());
        }

        let n = (w as usize) * (h as usize);
        let mut channels = [vec![0f64; n], vec![0f64; n], vec![0f64; n]];
        for (i, p) in image.pixels().enumerate() {
            for c in 0..3 {
                channels[c][i] = p[c] as f64;
            }
        }
        let masked: Vec<bool> = removal.bits().to_vec();
        let known_count = masked.iter().filter(|&&m| !m).count();

        if known_count == 0 {
            let mut sums = [0f64; 3];
            let mut count = 0usize;
            for y in 0..h {
                for x in 0..w {
                    if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                        let p = image.get_pixel(x, y);
                        for c in 0..3 {
                            sums[c] += p[c] as f64;
                        }
                        count += 1;
                    }
                }
            }
            let fill: Vec<u8> = sums
                .iter()
                .map(|s| (s / count as f64).round().clamp(0.0, 255.0) as u8)
                .collect();
            return Ok(RgbImage::from_pixel(
                w,
                h,
                image::Rgb([fill[0], fill[1], fill[2]]),
            ));
        }

        // Seed the masked region at the known-pixel mean.
        for c in 0..3 {
            let mean: f64 = channels[c]
                .iter()
                .zip(&masked)
                .filter(|(_, &m)| !m)
                .map(|(&v, _)| v)
                .sum::<f64>()
                / known_count as f64;
            for (v, &m) in channels[c].iter_mut().zip(&masked) {
                if m {
                    *v = mean;
                }
            }
        }

        let iw = w as i64;
        let ih = h as i64;
        for _ in 0..self.max_sweeps {
            let mut max_delta = 0f64;
            for c in 0..3 {
                let prev = channels[c].clone();
                for y in 0..ih {
                    for x in 0..iw {
                        let i = (y * iw + x) as usize;
                        if !masked[i] {
                            continue;
                        }
                        let mut sum = 0f64;
                        let mut cnt = 0usize;
                        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                            let (nx, ny) = (x + dx, y + dy);
                            if nx >= 0 && nx < iw && ny >= 0 && ny < ih {
                                sum += prev[(ny * iw + nx) as usize];
                                cnt += 1;
                            }
                        }
                        let new = sum / cnt as f64;
                        max_delta = max_delta.max((new - prev[i]).abs());
                        channels[c][i] = new;
                    }
                }
            }
            if max_delta < self.tolerance {
                break;
            }
        }

        let mut out = image.clone();
        for (i, p) in out.pixels_mut().enumerate() {
            if masked[i] {
                for c in 0..3 {
                    p[c] = channels[c][i].round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        Ok(out)
    }
}

/// Scene descriptor: an 8x8x8 RGB color histogram concatenated with 8-bin
/// gradient-orientation histograms over a 4x4 spatial grid, L2-normalized.
/// 512 + 4*4*8 = 640 dimensions.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistogramEmbedder;

impl HistogramEmbedder {
    pub const DIM: usize = 512 + 4 * 4 * 8;
}

impl Embedder for HistogramEmbedder {
    fn dim(&self) -> usize {
        Self::DIM
    }

    fn embed(&self, image: &RgbImage) -> Vec<f64> {
        let mut feat = vec![0f64; Self::DIM];
        let (w, h) = image.dimensions();

        for p in image.pixels() {
            let (r, g, b) = (p[0] as usize / 32, p[1] as usize / 32, p[2] as usize / 32);
            feat[r * 64 + g * 8 + b] += 1.0;
        }

        if w >= 3 && h >= 3 {
            let gray: Vec<f64> = image
                .pixels()
                .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
                .collect();
            let at = |x: u32, y: u32| gray[(y * w + x) as usize];
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let gx = at(x + 1, y) - at(x - 1, y);
                    let gy = at(x, y + 1) - at(x, y - 1);
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let angle = gy.atan2(gx); // [-pi, pi]
                    let bin = (((angle + std::f64::consts::PI)
                        / (2.0 * std::f64::consts::PI))
                        * 8.0)
                        .floor()
                        .min(7.0) as usize;
                    let cell_x = (x as usize * 4) / w as usize;
                    let cell_y = (y as usize * 4) / h as usize;
                    feat[512 + (cell_y * 4 + cell_x) * 8 + bin] += mag;
                }
            }
        }

        let norm: f64 = feat.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut feat {
                *v /= norm;
            }
        }
        feat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_frame_mask_fills_with_border_mean() {
        // 4x4 fixture, hand over the whole frame. The border ring holds
        // twelve pixels; with values 0..12 on the ring and 100s inside, the
        // per-channel fill is mean(0..=11) = 5.5 -> rounds to 6.
        let mut img = RgbImage::new(4, 4);
        let mut ring = 0u8;
        for y in 0..4 {
            for x in 0..4 {
                if x == 0 || y == 0 || x == 3 || y == 3 {
                    img.put_pixel(x, y, image::Rgb([ring, ring, ring]));
                    ring += 1;
                } else {
                    img.put_pixel(x, y, image::Rgb([100, 100, 100]));
                }
            }
        }
        let full = BinaryMask::from_bits(4, 4, vec![true; 16]).unwrap();
        let out = DiffusionInpainter::default().inpaint(&img, &full).unwrap();
        for p in out.pixels() {
            assert_eq!(p.0, [6, 6, 6]);
        }
    }

    #[test]
    fn diffusion_converges_toward_surroundings() {
        // Uniform 80-gray frame with a bright square removed: the fill must
        // come out near 80 everywhere.
        let mut img = RgbImage::from_pixel(16, 16, image::Rgb([80, 80, 80]));
        let mut removal = BinaryMask::new(16, 16).unwrap();
        for y in 6..10 {
            for x in 6..10 {
                img.put_pixel(x, y, image::Rgb([250, 250, 250]));
                removal.set(x, y, true);
            }
        }
        let out = DiffusionInpainter::default().inpaint(&img, &removal).unwrap();
        for y in 6..10 {
            for x in 6..10 {
                let p = out.get_pixel(x, y);
                assert!((p[0] as i32 - 80).abs() <= 1, "pixel ({x},{y}) = {:?}", p);
            }
        }
    }

    #[test]
    fn embedder_dimension_is_fixed_and_normalized() {
        let embedder = HistogramEmbedder;
        for (w, h) in [(8u32, 8u32), (17, 9), (2, 2)] {
            let mut img = RgbImage::new(w, h);
            for (i, p) in img.pixels_mut().enumerate() {
                let v = (i * 37 % 256) as u8;
                *p = image::Rgb([v, v.wrapping_add(91), v.wrapping_mul(3)]);
            }
            let f = embedder.embed(&img);
            assert_eq!(f.len(), HistogramEmbedder::DIM);
            let norm: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn similar_scenes_embed_closer_than_different_ones() {
        let embedder = HistogramEmbedder;
        let textured = |base: [u8; 3]| -> RgbImage {
            let mut img = RgbImage::new(16, 16);
            for y in 0..16u32 {
                for x in 0..16u32 {
                    let t = ((x * 13 + y * 29) % 64) as u8;
                    img.put_pixel(
                        x,
                        y,
                        image::Rgb([
                            base[0].saturating_add(t),
                            base[1].saturating_add(t),
                            base[2].saturating_add(t),
                        ]),
                    );
                }
            }
            img
        };
        let fa = embedder.embed(&textured([20, 150, 30]));
        let fb = embedder.embed(&textured([30, 140, 40]));
        let fc = embedder.embed(&textured([10, 30, 180]));
        let cos = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
        assert!(cos(&fa, &fb) > cos(&fa, &fc));
    }
}
