//! View augmentations: random horizontal flip, fixed 3x3 Gaussian blur and
//! per-channel standardization.

use serde::{Deserialize, Serialize};

use crate::error::{first_issue, invalid, Error, Result};
use crate::image::Image;
use crate::rng::RngStream;

pub const BLUR_KERNEL: usize = 3;

/// Per-channel mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Identity standardization for `channels` channels.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn compute<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<Self> {
        let mut sum = Vec::new();
        let mut sq = Vec::new();
        let mut count = 0usize;
        for img in images {
            let ch = img.channels();
            if sum.is_empty() {
                sum = vec![0.0; ch];
                sq = vec![0.0; ch];
            } else if sum.len() != ch {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} channels", sum.len()),
                    actual: format!("{ch} channels"),
                });
            }
            for px in img.pixels().chunks_exact(ch) {
                for (c, &v) in px.iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            count += img.pixels().len() / ch;
        }
        if count == 0 {
            return Err(Error::Empty("no pixels to compute channel statistics"));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut std = Vec::with_capacity(mean.len());
        for (c, (&m, &s2)) in mean.iter().zip(&sq).enumerate() {
            let sd = (s2 / n - m * m).max(0.0).sqrt();
            if sd <= 1e-12 {
                return Err(Error::ZeroStd { channel: c });
            }
            std.push(sd);
        }
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_probability: f64,
    pub blur_sigma: f64,
    pub stats: ChannelStats,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            blur_sigma: 1.0,
            stats: ChannelStats::identity(3),
        }
    }
}

impl AugmentConfig {
    pub fn issues(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.flip_probability) {
            out.push(invalid(
                "flip_probability",
                format!("{} (must be in [0, 1])", self.flip_probability),
            ));
        }
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            out.push(invalid(
                "blur_sigma",
                format!("{} (must be > 0)", self.blur_sigma),
            ));
        }
        if self.stats.mean.len() != self.stats.std.len() {
            out.push(invalid("stats", "mean and std lengths differ"));
        }
        if let Some(c) = self.stats.std.iter().position(|&s| s.is_nan() || s <= 0.0) {
            out.push(Error::ZeroStd { channel: c });
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        first_issue(self.issues())
    }
}

pub fn flip_horizontal(image: &Image) -> Image {
    let mut out = image.clone();
    let (w, h) = (image.width(), image.height());
    let ch = image.channels();
    for y in 0..h {
        for x in 0..w {
            let src = image.pixel(w - 1 - x, y);
            for (c, &v) in src.iter().enumerate().take(ch) {
                out.set(x, y, c, v);
            }
        }
    }
    out
}

fn blur_weights(sigma: f64) -> [f64; BLUR_KERNEL] {
    let side = (-1.0 / (2.0 * sigma * sigma)).exp();
    let total = 1.0 + 2.0 * side;
    [side / total, 1.0 / total, side / total]
}

/// Separable 3x3 Gaussian blur; borders replicate the edge pixel.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    let k = blur_weights(sigma);
    let (w, h) = (image.width() as i64, image.height() as i64);
    let ch = image.channels();
    let src = image.pixels();
    let idx = |x: i64, y: i64| ((y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize) * ch;

    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let o = idx(x, y);
            for c in 0..ch {
                tmp[o + c] = k[0] * src[idx(x - 1, y) + c]
                    + k[1] * src[o + c]
                    + k[2] * src[idx(x + 1, y) + c];
            }
        }
    }
    let mut out = image.clone();
    let dst = out.pixels_mut();
    for y in 0..h {
        for x in 0..w {
            let o = idx(x, y);
            for c in 0..ch {
                dst[o + c] = k[0] * tmp[idx(x, y - 1) + c]
                    + k[1] * tmp[o + c]
                    + k[2] * tmp[idx(x, y + 1) + c];
            }
        }
    }
    out
}

pub fn standardize(image: &Image, stats: &ChannelStats) -> Result<Image> {
    let ch = image.channels();
    if stats.mean.len() != ch {
        return Err(Error::ShapeMismatch {
            expected: format!("{ch} channel statistics"),
            actual: format!("{}", stats.mean.len()),
        });
    }
    let mut out = image.clone();
    for px in out.pixels_mut().chunks_exact_mut(ch) {
        for (c, v) in px.iter_mut().enumerate() {
            *v = (*v - stats.mean[c]) / stats.std[c];
        }
    }
    Ok(out)
}

/// Flip with probability `flip_probability`, blur, then standardize.
pub fn augment(image: &Image, cfg: &AugmentConfig, rng: &mut RngStream) -> Result<Image> {
    let flipped = if rng.bernoulli(cfg.flip_probability) {
        flip_horizontal(image)
    } else {
        image.clone()
    };
    standardize(&gaussian_blur(&flipped, cfg.blur_sigma), &cfg.stats)
}

/// The augment-free path used for evaluation: standardization only.
pub fn preprocess(image: &Image, cfg: &AugmentConfig) -> Result<Image> {
    standardize(image, &cfg.stats)
}
