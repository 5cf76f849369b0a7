//! Per-pixel hand-crafted features for the toy classifier.

use crate::error::{Error, Result};
use crate::synth::scene::Image;

/// raw RGB (3), normalized (x, y) (2), 3x3 mean (3), 3x3 std (3)
pub const FEATURE_DIM: usize = 11;

/// `height × width × FEATURE_DIM`, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * FEATURE_DIM..(index + 1) * FEATURE_DIM]
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Coordinates use pixel centres: `x = (col + 0.5) / width`.
/// Window statistics replicate edge pixels.
pub fn extract_features(image: &Image) -> Result<FeatureMap> {
    let (h, w) = (image.height, image.width);
    if h == 0 || w == 0 || image.data.len() != h * w * 3 {
        return Err(Error::Shape(format!(
            "image {h}x{w}x3 with {} values",
            image.data.len()
        )));
    }
    let at = |r: usize, c: usize, ch: usize| image.data[(r * w + c) * 3 + ch] as f64;
    let mut data = Vec::with_capacity(h * w * FEATURE_DIM);
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                data.push(at(r, c, ch) as f32);
            }
            data.push(((c as f64 + 0.5) / w as f64) as f32);
            data.push(((r as f64 + 0.5) / h as f64) as f32);
            let mut sum = [0.0f64; 3];
            let mut sq = [0.0f64; 3];
            for dr in -1i64..=1 {
                let rr = (r as i64 + dr).clamp(0, h as i64 - 1) as usize;
                for dc in -1i64..=1 {
                    let cc = (c as i64 + dc).clamp(0, w as i64 - 1) as usize;
                    for ch in 0..3 {
                        let v = at(rr, cc, ch);
                        sum[ch] += v;
                        sq[ch] += v * v;
                    }
                }
            }
            let mean = sum.map(|s| s / 9.0);
            for m in mean {
                data.push(m as f32);
            }
            for ch in 0..3 {
                let var = (sq[ch] / 9.0 - mean[ch] * mean[ch]).max(0.0);
                data.push(var.sqrt() as f32);
            }
        }
    }
    Ok(FeatureMap {
        height: h,
        width: w,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(h: usize, w: usize, v: f32) -> Image {
        Image {
            height: h,
            width: w,
            data: vec![v; h * w * 3],
        }
    }

    #[test]
    fn constant_image_has_zero_std() {
        let f = extract_features(&constant(5, 7, 0.3)).unwrap();
        for i in 0..f.pixels() {
            let px = f.pixel(i);
            assert_eq!(&px[8..11], &[0.0, 0.0, 0.0]);
            assert!((px[5] - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn center_coordinates() {
        let f = extract_features(&constant(128, 128, 0.0)).unwrap();
        let px = f.pixel(64 * 128 + 64);
        assert!((px[3] - 0.5).abs() <= 0.5 / 128.0 + 1e-6);
        assert!((px[4] - 0.5).abs() <= 0.5 / 128.0 + 1e-6);
    }

    #[test]
    fn shape_contract() {
        let f = extract_features(&constant(128, 128, 0.1)).unwrap();
        assert_eq!(
            (f.height, f.width, f.data.len() / f.pixels()),
            (128, 128, 11)
        );
    }

    #[test]
    fn window_stats_with_edge_replication() {
        // 1x2 image: left pixel 0, right pixel 1 (all channels)
        let img = Image {
            height: 1,
            width: 2,
            data: vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        };
        let f = extract_features(&img).unwrap();
        // left window: columns {0,0,1} replicated over 3 rows -> mean 1/3
        let left = f.pixel(0);
        assert!((left[5] - 1.0 / 3.0).abs() < 1e-6);
        let std = ((1.0f64 / 3.0) * (2.0 / 3.0)).sqrt() as f32;
        assert!((left[8] - std).abs() < 1e-6);
        let right = f.pixel(1);
        assert!((right[5] - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_buffer() {
        let img = Image {
            height: 2,
            width: 2,
            data: vec![0.0; 5],
        };
        assert!(extract_features(&img).is_err());
    }
}
