//! Minimal CHW f64 tensor for the dense predictors.

use image::RgbImage;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    /// RGB image as a 3xHxW tensor scaled to [0, 1].
    pub fn from_rgb(image: &RgbImage) -> Self {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let mut t = Tensor::zeros(3, h, w);
        for (i, p) in image.pixels().enumerate() {
            for c in 0..3 {
                t.data[c * h * w + i] = p[c] as f64 / 255.0;
            }
        }
        t
    }

    /// Single-channel plane from per-pixel values.
    pub fn plane(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Tensor::from_data(1, height, width, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.height * self.width;
        &self.data[c * hw..(c + 1) * hw]
    }

    /// Concatenate along the channel axis. All parts must share spatial dims.
    pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat: no tensors"))?;
        let (h, w) = (first.height, first.width);
        let mut channels = 0;
        for p in parts {
            if p.height != h || p.width != w {
                return Err(Error::DimensionMismatch {
                    expected_w: w as u32,
                    expected_h: h as u32,
                    got_w: p.width as u32,
                    got_h: p.height as u32,
                });
            }
            channels += p.channels;
        }
        let mut data = Vec::with_capacity(channels * h * w);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            channels,
            height: h,
            width: w,
            data,
        })
    }

    /// Horizontal mirror of every channel.
    pub fn flip_horizontal(&self) -> Tensor {
        let mut out = self.clone();
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    out.set(c, y, x, self.at(c, y, self.width - 1 - x));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_conversion_scales_to_unit_range() {
        let mut img = RgbImage::new(2, 2);
        img.put_pixel(0, 0, image::Rgb([255, 0, 51]));
        let t = Tensor::from_rgb(&img);
        assert_eq!(t.channels(), 3);
        assert_eq!(t.at(0, 0, 0), 1.0);
        assert_eq!(t.at(1, 0, 0), 0.0);
        assert!((t.at(2, 0, 0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn concat_stacks_channels() {
        let a = Tensor::from_data(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_data(1, 1, 2, vec![5.0, 6.0]).unwrap();
        let c = Tensor::concat(&[&a, &b]).unwrap();
        assert_eq!(c.channels(), 3);
        assert_eq!(c.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let bad = Tensor::zeros(1, 2, 2);
        assert!(Tensor::concat(&[&a, &bad]).is_err());
    }

    #[test]
    fn flip_mirrors_rows() {
        let t = Tensor::from_data(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let f = t.flip_horizontal();
        assert_eq!(f.data(), &[3.0, 2.0, 1.0, 6.0, 5.0, 4.0]);
    }
}
