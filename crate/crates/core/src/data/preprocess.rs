//! Image → `(3, 128, 128)` extractor input.

use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

pub const INPUT_SIZE: usize = 128;
pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// Normalized `(3, 128, 128)` tensor, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub data: Vec<f32>,
    pub source_id: String,
}

impl ImageTensor {
    pub const SHAPE: [usize; 3] = [3, INPUT_SIZE, INPUT_SIZE];
    pub const LEN: usize = 3 * INPUT_SIZE * INPUT_SIZE;

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = INPUT_SIZE * INPUT_SIZE;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Separable bilinear resize with half-pixel centers (no corner alignment,
/// no antialiasing) of one `h × w` plane.
pub fn resize_bilinear(src: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    assert_eq!(src.len(), h * w);
    if h == out_h && w == out_w {
        return src.to_vec();
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let rows = taps(h, out_h);
    let cols = taps(w, out_w);
    // horizontal pass then vertical
    let mut tmp = vec![0.0f32; h * out_w];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for (x, &(c0, c1, t)) in cols.iter().enumerate() {
            tmp[y * out_w + x] = line[c0] * (1.0 - t) + line[c1] * t;
        }
    }
    let mut out = vec![0.0f32; out_h * out_w];
    for (y, &(r0, r1, t)) in rows.iter().enumerate() {
        for x in 0..out_w {
            out[y * out_w + x] = tmp[r0 * out_w + x] * (1.0 - t) + tmp[r1 * out_w + x] * t;
        }
    }
    out
}

/// Resizes to 128×128, replicates grayscale to RGB, scales to `[0, 1]` and
/// normalizes with the ImageNet channel statistics.
pub fn preprocess(image: &DynamicImage, source_id: impl Into<String>) -> Result<ImageTensor> {
    let source_id = source_id.into();
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Image {
            path: source_id.into(),
            msg: "empty image".into(),
        });
    }
    // to_rgb32f replicates luma for grayscale inputs and maps u8 to v/255
    let rgb = image.to_rgb32f();
    let raw = rgb.as_raw();
    let plane = INPUT_SIZE * INPUT_SIZE;
    let mut data = vec![0.0f32; 3 * plane];
    for c in 0..3 {
        let chan: Vec<f32> = raw.iter().skip(c).step_by(3).copied().collect();
        let resized = resize_bilinear(&chan, h, w, INPUT_SIZE, INPUT_SIZE);
        for (dst, v) in data[c * plane..(c + 1) * plane].iter_mut().zip(resized) {
            *dst = (v - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Image {
            path: source_id.into(),
            msg: "non-finite pixel values".into(),
        });
    }
    Ok(ImageTensor { data, source_id })
}

pub fn load_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Decodes and preprocesses one file.
pub fn preprocess_file(path: &Path, source_id: impl Into<String>) -> Result<ImageTensor> {
    preprocess(&load_image(path)?, source_id)
}

#[cfg(test)]
mod tests {
    use image::{GrayImage, ImageBuffer, Luma, Rgb, Rgb32FImage};

    use super::*;

    #[test]
    fn grayscale_is_replicated_before_normalization() {
        let img = GrayImage::from_fn(64, 48, |x, y| Luma([((x * 3 + y * 5) % 256) as u8]));
        let t = preprocess(&DynamicImage::ImageLuma8(img), "g").unwrap();
        assert_eq!(t.data.len(), ImageTensor::LEN);
        // undo normalization: every channel holds the same gray level
        for i in 0..INPUT_SIZE * INPUT_SIZE {
            let px: Vec<f32> = (0..3)
                .map(|c| t.channel(c)[i] * IMAGENET_STD[c] + IMAGENET_MEAN[c])
                .collect();
            assert!((px[0] - px[1]).abs() < 1e-5 && (px[1] - px[2]).abs() < 1e-5);
        }
    }

    #[test]
    fn channel_means_normalize_to_zero() {
        let img: Rgb32FImage = ImageBuffer::from_pixel(128, 128, Rgb(IMAGENET_MEAN));
        let t = preprocess(&DynamicImage::ImageRgb32F(img), "m").unwrap();
        assert!(t.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkerboard_matches_hand_interpolation() {
        // 4×4 checkerboard of 0/255 upsampled to 128×128.
        let img = GrayImage::from_fn(4, 4, |x, y| Luma([if (x + y) % 2 == 0 { 255 } else { 0 }]));
        let t = preprocess(&DynamicImage::ImageLuma8(img), "c").unwrap();
        let cell = |x: i64, y: i64| -> f64 {
            let (x, y) = (x.clamp(0, 3), y.clamp(0, 3));
            if (x + y) % 2 == 0 { 1.0 } else { 0.0 }
        };
        for oy in 0..128 {
            for ox in 0..128 {
                // sample position in source pixel units, half-pixel centers
                let sy = ((oy as f64 + 0.5) / 32.0 - 0.5).max(0.0);
                let sx = ((ox as f64 + 0.5) / 32.0 - 0.5).max(0.0);
                let (y0, x0) = (sy.floor() as i64, sx.floor() as i64);
                let (ty, tx) = (sy - y0 as f64, sx - x0 as f64);
                let v = cell(x0, y0) * (1.0 - tx) * (1.0 - ty)
                    + cell(x0 + 1, y0) * tx * (1.0 - ty)
                    + cell(x0, y0 + 1) * (1.0 - tx) * ty
                    + cell(x0 + 1, y0 + 1) * tx * ty;
                for c in 0..3 {
                    let want = (v - IMAGENET_MEAN[c] as f64) / IMAGENET_STD[c] as f64;
                    let got = t.channel(c)[oy * 128 + ox] as f64;
                    assert!((got - want).abs() < 1e-5, "({ox},{oy}) c{c}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn resize_is_stable_at_target_size() {
        let src: Vec<f32> = (0..64).map(|i| i as f32).collect();
        let once = resize_bilinear(&src, 8, 8, 16, 16);
        assert_eq!(resize_bilinear(&once, 16, 16, 16, 16), once);
    }

    #[test]
    fn undecodable_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        std::fs::write(&p, b"not an image").unwrap();
        assert!(matches!(preprocess_file(&p, "bad"), Err(Error::Image { .. })));
    }
}
