//! Monte Carlo measurements of crop geometry and of false-positive view pairs.

use serde::{Deserialize, Serialize};

use crate::crop::{sample_rects, CropperConfig};
use crate::error::{invalid, Error, Result};
use crate::geometry::Rect;
pub use crate::geometry::{iou, oob_fraction};
use crate::image::ImageDims;
use crate::rng::RngStream;

pub const DEFAULT_GRID: usize = 16;
pub const DEFAULT_FP_TAU: f64 = 0.2;

/// An image's dimensions together with its ground-truth object boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub dims: ImageDims,
    pub objects: Vec<Rect>,
}

impl Scene {
    pub fn new(dims: ImageDims, objects: Vec<Rect>) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Empty("scene has no objects"));
        }
        if let Some(o) = objects.iter().find(|o| !o.is_inside(dims)) {
            return Err(invalid(
                "scene object",
                format!("{o:?} is not inside the image"),
            ));
        }
        Ok(Self { dims, objects })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub mean_pair_iou: f64,
    pub mean_center_distance: f64,
    pub oob_area_fraction: f64,
    /// Row-major `grid x grid`; each cell is the fraction of views covering the cell center.
    pub coverage_grid: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpEstimate {
    pub fp_rate: f64,
    pub n_samples: usize,
    pub tau: f64,
    pub standard_error: f64,
}

impl FpEstimate {
    fn from_counts(fp: usize, n: usize, tau: f64) -> Self {
        let p = fp as f64 / n as f64;
        Self {
            fp_rate: p,
            n_samples: n,
            tau,
            standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

/// True when no single object covers at least `tau` of both views' areas.
pub fn is_false_positive(v1: &Rect, v2: &Rect, objects: &[Rect], tau: f64) -> bool {
    let covers = |o: &Rect, v: &Rect| o.intersection_area(v) as f64 / v.area() as f64 >= tau;
    !objects.iter().any(|o| covers(o, v1) && covers(o, v2))
}

fn center_distance(a: &Rect, b: &Rect) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

pub fn geometry_stats(
    config: &CropperConfig,
    dims: ImageDims,
    n_samples: usize,
    grid: usize,
    rng: &mut RngStream,
) -> Result<GeometryStats> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be >= 1"));
    }
    if grid == 0 {
        return Err(invalid("grid", "must be >= 1"));
    }
    let (w, h) = (dims.width as f64, dims.height as f64);
    let mut counts = vec![vec![0u64; grid]; grid];
    let (mut iou_sum, mut dist_sum, mut oob_sum) = (0.0, 0.0, 0.0);
    let (mut pairs, mut views) = (0u64, 0u64);

    for _ in 0..n_samples {
        let rects = sample_rects(dims, config, rng)?.rects;
        for (i, a) in rects.iter().enumerate() {
            for b in &rects[i + 1..] {
                iou_sum += iou(a, b);
                dist_sum += center_distance(a, b);
                pairs += 1;
            }
            oob_sum += oob_fraction(a, dims);
            views += 1;
            for (gy, row) in counts.iter_mut().enumerate() {
                let py = (gy as f64 + 0.5) * h / grid as f64;
                if py < a.top as f64 || py >= a.bottom() as f64 {
                    continue;
                }
                for (gx, cell) in row.iter_mut().enumerate() {
                    let px = (gx as f64 + 0.5) * w / grid as f64;
                    if px >= a.left as f64 && px < a.right() as f64 {
                        *cell += 1;
                    }
                }
            }
        }
    }

    Ok(GeometryStats {
        mean_pair_iou: iou_sum / pairs as f64,
        mean_center_distance: dist_sum / pairs as f64,
        oob_area_fraction: oob_sum / views as f64,
        coverage_grid: counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / views as f64).collect())
            .collect(),
    })
}

pub fn estimate_fp_rate(
    config: &CropperConfig,
    scene: &Scene,
    tau: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<FpEstimate> {
    estimate_fp_rate_over(config, std::slice::from_ref(scene), tau, n_samples, rng)
}

/// FP rate over several scenes; sample `k` is drawn on scene `k % scenes.len()`.
pub fn estimate_fp_rate_over(
    config: &CropperConfig,
    scenes: &[Scene],
    tau: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<FpEstimate> {
    if scenes.is_empty() {
        return Err(Error::Empty("no scenes"));
    }
    if scenes.iter().any(|s| s.objects.is_empty()) {
        return Err(Error::Empty("scene has no objects"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid("tau", format!("{tau} (must be in (0, 1))")));
    }
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be >= 1"));
    }
    let mut fp = 0;
    for k in 0..n_samples {
        let scene = &scenes[k % scenes.len()];
        let rects = sample_rects(scene.dims, config, rng)?.rects;
        if is_false_positive(&rects[0], &rects[1], &scene.objects, tau) {
            fp += 1;
        }
    }
    Ok(FpEstimate::from_counts(fp, n_samples, tau))
}
