//! Crop samplers: uniform RandomCrop and the Gaussian-centered family.
//!
//! All samplers are pure functions of their inputs and an [`RngStream`].
//! GCC and MGCC may return rects that extend past the image; those views are
//! padded on extraction. CGCC and MCGCC translate every rect back inside the
//! image before extraction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{first_issue, invalid, Error, Result};
use crate::geometry::{center_to_rect, correct_rect, ensure_fits, Rect};
use crate::image::{Image, ImageDims};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    RandomCrop,
    #[serde(rename = "GCC")]
    Gcc,
    #[serde(rename = "CGCC")]
    Cgcc,
    #[serde(rename = "MGCC")]
    Mgcc,
    #[serde(rename = "MCGCC")]
    Mcgcc,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RandomCrop,
        Method::Gcc,
        Method::Cgcc,
        Method::Mgcc,
        Method::Mcgcc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RandomCrop => "RandomCrop",
            Method::Gcc => "GCC",
            Method::Cgcc => "CGCC",
            Method::Mgcc => "MGCC",
            Method::Mcgcc => "MCGCC",
        }
    }

    /// Whether sampled rects are translated back inside the image.
    pub fn is_corrected(self) -> bool {
        matches!(self, Method::Cgcc | Method::Mcgcc)
    }

    /// Whether the Gaussian mean is itself drawn per call.
    pub fn samples_mean(self) -> bool {
        matches!(self, Method::Mgcc | Method::Mcgcc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                invalid(
                    "method",
                    format!("unknown method {s:?} (expected RandomCrop, GCC, CGCC, MGCC or MCGCC)"),
                )
            })
    }
}

/// Fill used for view pixels that fall outside the source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PadPolicy {
    #[default]
    Zero,
    ClampToEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropperConfig {
    pub method: Method,
    /// Variance scale: the center covariance is `diag(alpha * w, alpha * h)`.
    pub alpha: f64,
    /// Area fraction of the view; side lengths scale by its square root.
    pub crop_size: f64,
    /// `(a, b)` bounds of the uniform mean, as fractions of the image dims.
    pub uniform_bounds: (f64, f64),
    pub n_views: usize,
    pub pad_policy: PadPolicy,
}

impl Default for CropperConfig {
    fn default() -> Self {
        Self {
            method: Method::Gcc,
            alpha: 0.5,
            crop_size: 0.6,
            uniform_bounds: (0.25, 0.75),
            n_views: 2,
            pad_policy: PadPolicy::Zero,
        }
    }
}

impl CropperConfig {
    pub fn new(method: Method, alpha: f64, crop_size: f64) -> Self {
        Self {
            method,
            alpha,
            crop_size,
            ..Self::default()
        }
    }

    pub fn with_bounds(mut self, a: f64, b: f64) -> Self {
        self.uniform_bounds = (a, b);
        self
    }

    /// Every problem with the config, in field order.
    pub fn issues(&self) -> Vec<Error> {
        let mut out: Vec<Error> = [
            check_alpha(self.alpha),
            check_crop_size(self.crop_size),
            check_bounds(self.uniform_bounds),
        ]
        .into_iter()
        .filter_map(Result::err)
        .collect();
        if self.n_views < 2 {
            out.push(invalid(
                "n_views",
                format!("{} (must be >= 2)", self.n_views),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        first_issue(self.issues())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(invalid(
            "alpha",
            format!("{alpha} (must be finite and >= 0)"),
        ));
    }
    Ok(())
}

fn check_crop_size(crop_size: f64) -> Result<()> {
    if !(crop_size > 0.0 && crop_size <= 1.0) {
        return Err(invalid(
            "crop_size",
            format!("{crop_size} (must be in (0, 1])"),
        ));
    }
    Ok(())
}

fn check_bounds((a, b): (f64, f64)) -> Result<()> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
        return Err(invalid(
            "uniform_bounds",
            format!("({a}, {b}) (need 0 <= a <= b <= 1)"),
        ));
    }
    Ok(())
}

/// View side lengths `round(sqrt(crop_size) * (w, h))`, at least one pixel each.
pub fn compute_view_dims(crop_size: f64, dims: ImageDims) -> Result<(u32, u32)> {
    check_crop_size(crop_size)?;
    let s = crop_size.sqrt();
    let side = |n: u32| ((s * n as f64).round() as u32).clamp(1, n);
    Ok((side(dims.width), side(dims.height)))
}

fn draw_centers(
    rng: &mut RngStream,
    mean: (f64, f64),
    dims: ImageDims,
    alpha: f64,
    n_views: usize,
) -> Vec<(f64, f64)> {
    let sx = (alpha * dims.width as f64).sqrt();
    let sy = (alpha * dims.height as f64).sqrt();
    (0..n_views)
        .map(|_| {
            let (zx, zy) = rng.standard_normal_pair();
            (mean.0 + sx * zx, mean.1 + sy * zy)
        })
        .collect()
}

/// Centers drawn i.i.d. from `N((w/2, h/2), diag(alpha*w, alpha*h))`.
pub fn sample_gcc_centers(
    rng: &mut RngStream,
    dims: ImageDims,
    alpha: f64,
    n_views: usize,
) -> Result<Vec<(f64, f64)>> {
    check_alpha(alpha)?;
    Ok(draw_centers(rng, dims.center(), dims, alpha, n_views))
}

/// Draws the mean once from `U(a*w, b*w) x U(a*h, b*h)`, then `n_views`
/// centers from the Gaussian around it. Returns `(mean, centers)`.
pub fn sample_mgcc_centers(
    rng: &mut RngStream,
    dims: ImageDims,
    alpha: f64,
    bounds: (f64, f64),
    n_views: usize,
) -> Result<((f64, f64), Vec<(f64, f64)>)> {
    check_alpha(alpha)?;
    check_bounds(bounds)?;
    let (a, b) = bounds;
    let (w, h) = (dims.width as f64, dims.height as f64);
    let mu_x = rng.uniform_range(a * w, b * w);
    let mu_y = rng.uniform_range(a * h, b * h);
    let mean = (mu_x, mu_y);
    Ok((mean, draw_centers(rng, mean, dims, alpha, n_views)))
}

/// Uniform over every fully in-bounds position of a `crop_size` view.
pub fn sample_random_crop(rng: &mut RngStream, dims: ImageDims, crop_size: f64) -> Result<Rect> {
    let (w, h) = compute_view_dims(crop_size, dims)?;
    let left = rng.below_inclusive((dims.width - w) as u64) as i64;
    let top = rng.below_inclusive((dims.height - h) as u64) as i64;
    Ok(Rect::new(left, top, w, h))
}

/// Copy the region under `rect`; pixels outside the image follow `pad`.
pub fn extract_view(image: &Image, rect: &Rect, pad: PadPolicy) -> Result<Image> {
    let dims = image.dims();
    ensure_fits(rect, dims)?;
    let ch = image.channels();
    let (vw, vh) = (rect.width as usize, rect.height as usize);
    let mut out = vec![0.0; vw * vh * ch];
    let (iw, ih) = (dims.width as i64, dims.height as i64);
    for vy in 0..vh {
        let sy = rect.top + vy as i64;
        let y_in = (0..ih).contains(&sy);
        for vx in 0..vw {
            let sx = rect.left + vx as i64;
            let inside = y_in && (0..iw).contains(&sx);
            let src = match (inside, pad) {
                (true, _) => Some((sx, sy)),
                (false, PadPolicy::ClampToEdge) => Some((sx.clamp(0, iw - 1), sy.clamp(0, ih - 1))),
                (false, PadPolicy::Zero) => None,
            };
            if let Some((x, y)) = src {
                let o = (vy * vw + vx) * ch;
                out[o..o + ch].copy_from_slice(image.pixel(x as u32, y as u32));
            }
        }
    }
    Image::new(ImageDims::new(rect.width, rect.height)?, ch, out)
}

/// Rects (and sampled Gaussian mean, when there is one) for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSample {
    pub rects: Vec<Rect>,
    pub sampled_mean: Option<(f64, f64)>,
}

/// Sample the view rects for one image without touching pixels.
pub fn sample_rects(
    dims: ImageDims,
    config: &CropperConfig,
    rng: &mut RngStream,
) -> Result<RectSample> {
    config.validate()?;
    let view_dims = compute_view_dims(config.crop_size, dims)?;
    let (centers, mean) = match config.method {
        Method::RandomCrop => {
            let rects = (0..config.n_views)
                .map(|_| sample_random_crop(rng, dims, config.crop_size))
                .collect::<Result<Vec<_>>>()?;
            return Ok(RectSample {
                rects,
                sampled_mean: None,
            });
        }
        Method::Gcc | Method::Cgcc => (
            sample_gcc_centers(rng, dims, config.alpha, config.n_views)?,
            dims.center(),
        ),
        Method::Mgcc | Method::Mcgcc => {
            let (mean, centers) = sample_mgcc_centers(
                rng,
                dims,
                config.alpha,
                config.uniform_bounds,
                config.n_views,
            )?;
            (centers, mean)
        }
    };
    let rects = centers
        .into_iter()
        .map(|c| {
            let r = center_to_rect(c, view_dims);
            if config.method.is_corrected() {
                correct_rect(r, dims)
            } else {
                Ok(r)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RectSample {
        rects,
        sampled_mean: Some(mean),
    })
}

/// The views generated for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub rects: Vec<Rect>,
    pub views: Vec<Image>,
    /// Mean of the Gaussian the centers were drawn from; `None` for RandomCrop.
    pub sampled_mean: Option<(f64, f64)>,
}

pub fn generate_views(
    image: &Image,
    config: &CropperConfig,
    rng: &mut RngStream,
) -> Result<ViewSet> {
    let RectSample {
        rects,
        sampled_mean,
    } = sample_rects(image.dims(), config, rng)?;
    let views = rects
        .iter()
        .map(|r| extract_view(image, r, config.pad_policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(ViewSet {
        rects,
        views,
        sampled_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(w: u32, h: u32) -> ImageDims {
        ImageDims::new(w, h).unwrap()
    }

    fn gradient_image(dims: ImageDims) -> Image {
        let mut px = Vec::new();
        for y in 0..dims.height {
            for x in 0..dims.width {
                px.extend([x as f64 / 64.0, y as f64 / 64.0, 0.5]);
            }
        }
        Image::new(dims, 3, px).unwrap()
    }

    #[test]
    fn view_dims_examples() {
        assert_eq!(compute_view_dims(0.25, d(32, 32)).unwrap(), (16, 16));
        assert_eq!(compute_view_dims(1.0, d(17, 23)).unwrap(), (17, 23));
        // 32 * sqrt(0.4) = 20.239...
        assert_eq!(compute_view_dims(0.4, d(32, 32)).unwrap(), (20, 20));
        assert_eq!(compute_view_dims(1e-6, d(4, 4)).unwrap(), (1, 1));
    }

    #[test]
    fn view_dims_rejects_out_of_range() {
        for bad in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(compute_view_dims(bad, d(32, 32)).is_err(), "{bad}");
        }
    }

    #[test]
    fn zero_alpha_collapses_to_center() {
        let mut rng = RngStream::new(1);
        let c = sample_gcc_centers(&mut rng, d(32, 32), 0.0, 2).unwrap();
        assert_eq!(c, vec![(16.0, 16.0), (16.0, 16.0)]);
        let (mu, c) = sample_mgcc_centers(&mut rng, d(32, 32), 0.0, (0.5, 0.5), 3).unwrap();
        assert_eq!(mu, (16.0, 16.0));
        assert!(c.iter().all(|&p| p == (16.0, 16.0)));
    }

    #[test]
    fn negative_alpha_and_bad_bounds_rejected() {
        let mut rng = RngStream::new(1);
        assert!(sample_gcc_centers(&mut rng, d(8, 8), -0.1, 2).is_err());
        assert!(sample_mgcc_centers(&mut rng, d(8, 8), 1.0, (0.7, 0.3), 2).is_err());
    }

    #[test]
    fn random_crop_full_size_is_whole_image() {
        let mut rng = RngStream::new(2);
        for _ in 0..100 {
            assert_eq!(
                sample_random_crop(&mut rng, d(17, 9), 1.0).unwrap(),
                Rect::new(0, 0, 17, 9)
            );
        }
    }

    #[test]
    fn random_crop_left_mean() {
        // left ~ U{0..16}: mean 8, variance (17^2 - 1) / 12 = 24
        let mut rng = RngStream::new(3);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| sample_random_crop(&mut rng, d(32, 32), 0.25).unwrap().left as f64)
            .sum();
        let se = (24.0f64 / n as f64).sqrt();
        assert!((sum / n as f64 - 8.0).abs() < 3.0 * se);
    }

    #[test]
    fn extract_in_bounds_is_subraster() {
        let img = gradient_image(d(12, 10));
        let r = Rect::new(3, 2, 5, 4);
        let v = extract_view(&img, &r, PadPolicy::Zero).unwrap();
        assert_eq!((v.width(), v.height()), (5, 4));
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(v.pixel(x, y), img.pixel(x + 3, y + 2));
            }
        }
    }

    #[test]
    fn extract_zero_and_clamp_padding() {
        let img = Image::filled(d(16, 16), 3, 0.7).unwrap();
        let r = Rect::new(-4, 0, 8, 8);
        let z = extract_view(&img, &r, PadPolicy::Zero).unwrap();
        let c = extract_view(&img, &r, PadPolicy::ClampToEdge).unwrap();
        let grad = gradient_image(d(16, 16));
        let cg = extract_view(&grad, &r, PadPolicy::ClampToEdge).unwrap();
        for y in 0..8 {
            for x in 0..4 {
                assert!(z.pixel(x, y).iter().all(|&p| p == 0.0));
                assert!(c.pixel(x, y).iter().all(|&p| p == 0.7));
                assert_eq!(cg.pixel(x, y), grad.pixel(0, y));
            }
            assert!(z.pixel(4, y).iter().all(|&p| p == 0.7));
        }
    }

    #[test]
    fn extract_rejects_oversized() {
        let img = Image::filled(d(8, 8), 1, 0.0).unwrap();
        assert!(extract_view(&img, &Rect::new(0, 0, 9, 2), PadPolicy::Zero).is_err());
    }

    #[test]
    fn gcc_zero_alpha_views_identical() {
        let img = gradient_image(d(32, 32));
        let cfg = CropperConfig::new(Method::Gcc, 0.0, 0.4);
        let vs = generate_views(&img, &cfg, &mut RngStream::new(9)).unwrap();
        assert_eq!(vs.views.len(), 2);
        assert_eq!(vs.views[0], vs.views[1]);
        assert_eq!(vs.sampled_mean, Some((16.0, 16.0)));
    }

    #[test]
    fn method_parse_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("gauss".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CropperConfig::default().validate().is_ok());
        let mut c = CropperConfig::default();
        c.n_views = 1;
        assert!(c.validate().is_err());
        assert!(CropperConfig::new(Method::Gcc, -1.0, 0.5)
            .validate()
            .is_err());
        assert!(CropperConfig::new(Method::Gcc, 1.0, 0.0)
            .validate()
            .is_err());
    }

    proptest! {
        #[test]
        fn views_match_rect_dims(
            seed in any::<u64>(), w in 4u32..48, h in 4u32..48,
            alpha in 0.0f64..8.0, cs in 0.05f64..1.0, m in 0usize..5,
        ) {
            let img = gradient_image(d(w, h));
            let mut cfg = CropperConfig::new(Method::ALL[m], alpha, cs);
            cfg.n_views = 3;
            let vs = generate_views(&img, &cfg, &mut RngStream::new(seed)).unwrap();
            prop_assert_eq!(vs.rects.len(), 3);
            let first = vs.views[0].dims();
            for (r, v) in vs.rects.iter().zip(&vs.views) {
                prop_assert_eq!((v.width(), v.height()), (r.width, r.height));
                prop_assert_eq!(v.dims(), first);
                if cfg.method.is_corrected() || cfg.method == Method::RandomCrop {
                    prop_assert!(r.is_inside(img.dims()));
                }
            }
        }

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), m in 0usize..5) {
            let cfg = CropperConfig::new(Method::ALL[m], 1.5, 0.3);
            let a = sample_rects(d(40, 24), &cfg, &mut RngStream::new(seed)).unwrap();
            let b = sample_rects(d(40, 24), &cfg, &mut RngStream::new(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
