//! Synthetic labeled scenes with known object boxes.
//!
//! Every class has its own shape and color, so a crop of any size that
//! overlaps an object carries class signal. Images are drawn from per-index
//! forked streams, so image `i` does not depend on how many images precede it.

use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::analytics::Scene;
use crate::error::{first_issue, invalid, Error, Result};
use crate::geometry::Rect;
use crate::image::{Image, ImageDims};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Centered,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub dims: ImageDims,
    pub class_count: usize,
    /// Inclusive range of objects per image; all objects share the image's class.
    pub objects_per_image: (usize, usize),
    /// Inclusive range of object side length as a fraction of the shorter image side.
    pub object_size_range: (f64, f64),
    pub placement: Placement,
    /// Standard deviation of per-pixel Gaussian noise.
    pub noise_level: f64,
    /// Half-width of the per-image uniform jitter of the background color.
    pub background_variation: f64,
    /// Half-width of the per-image uniform jitter of the object color.
    pub color_jitter: f64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            dims: ImageDims {
                width: 32,
                height: 32,
            },
            class_count: 4,
            objects_per_image: (1, 1),
            object_size_range: (0.4, 0.6),
            placement: Placement::Centered,
            noise_level: 0.1,
            background_variation: 0.2,
            color_jitter: 0.1,
        }
    }
}

const MIN_SIDE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Square,
    Disk,
    Plus,
    Diamond,
    Frame,
    Ring,
    Cross,
    Stripes,
}

const SHAPES: [Shape; 8] = [
    Shape::Square,
    Shape::Disk,
    Shape::Plus,
    Shape::Diamond,
    Shape::Frame,
    Shape::Ring,
    Shape::Cross,
    Shape::Stripes,
];

const PALETTE: [[f64; 3]; 8] = [
    [0.90, 0.15, 0.15],
    [0.15, 0.75, 0.20],
    [0.20, 0.30, 0.90],
    [0.95, 0.85, 0.15],
    [0.85, 0.20, 0.85],
    [0.15, 0.85, 0.85],
    [0.95, 0.55, 0.10],
    [0.55, 0.35, 0.15],
];

impl Shape {
    /// Membership of the pixel whose center sits at `(u, v)` in box coordinates `[-1, 1]^2`.
    fn contains(self, u: f64, v: f64) -> bool {
        let (au, av) = (u.abs(), v.abs());
        let r2 = u * u + v * v;
        match self {
            Shape::Square => true,
            Shape::Disk => r2 <= 1.0,
            Shape::Plus => au <= 1.0 / 3.0 || av <= 1.0 / 3.0,
            Shape::Diamond => au + av <= 1.0 + 1e-9,
            Shape::Frame => au.max(av) >= 0.5,
            Shape::Ring => (0.3..=1.0).contains(&r2),
            Shape::Cross => (au - av).abs() <= 0.35,
            Shape::Stripes => av <= 0.2 || av >= 0.6,
        }
    }
}

impl SyntheticSceneSpec {
    /// One small object per image, exactly centered, on a busy background.
    /// Small objects make the crop position matter for what a view contains.
    pub fn centered_benchmark() -> Self {
        Self {
            object_size_range: (0.2, 0.3),
            noise_level: 0.2,
            background_variation: 0.4,
            color_jitter: 0.5,
            ..Self::default()
        }
    }

    /// One to three objects per image at uniformly random positions.
    pub fn multi_object_benchmark() -> Self {
        Self {
            objects_per_image: (1, 3),
            object_size_range: (0.3, 0.45),
            placement: Placement::UniformRandom,
            noise_level: 0.1,
            background_variation: 0.3,
            color_jitter: 0.3,
            ..Self::default()
        }
    }

    pub fn issues(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if self.class_count < 2 || self.class_count > SHAPES.len() {
            out.push(invalid(
                "class_count",
                format!("{} (must be in 2..={})", self.class_count, SHAPES.len()),
            ));
        }
        let (lo, hi) = self.objects_per_image;
        if lo == 0 || lo > hi {
            out.push(invalid("objects_per_image", format!("({lo}, {hi})")));
        }
        let (a, b) = self.object_size_range;
        if !(a > 0.0 && a <= b && b <= 1.0) {
            out.push(invalid(
                "object_size_range",
                format!("({a}, {b}) (need 0 < min <= max <= 1)"),
            ));
        }
        let short = self.dims.width.min(self.dims.height);
        if short < MIN_SIDE || (b * short as f64).round() < MIN_SIDE as f64 {
            out.push(invalid(
                "object_size_range",
                format!("objects must be at least {MIN_SIDE} px and fit a {short} px side"),
            ));
        }
        for (name, v) in [
            ("noise_level", self.noise_level),
            ("background_variation", self.background_variation),
            ("color_jitter", self.color_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(invalid(name, format!("{v} (must be >= 0)")));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        first_issue(self.issues())
    }
}

struct Placed {
    left: i64,
    top: i64,
    width: u32,
    height: u32,
}

fn place(spec: &SyntheticSceneSpec, rng: &mut RngStream) -> Placed {
    let (w, h) = (spec.dims.width, spec.dims.height);
    let short = w.min(h) as f64;
    let (a, b) = spec.object_size_range;
    let side = (rng.uniform_range(a, b) * short)
        .round()
        .clamp(MIN_SIDE as f64, short) as u32;
    match spec.placement {
        Placement::Centered => {
            // each extent shares parity with its image side so the box is exactly centered
            let fit = |dim: u32| {
                if (dim - side).is_multiple_of(2) {
                    side
                } else if side > MIN_SIDE {
                    side - 1
                } else {
                    side + 1
                }
            };
            let (bw, bh) = (fit(w), fit(h));
            Placed {
                left: ((w - bw) / 2) as i64,
                top: ((h - bh) / 2) as i64,
                width: bw,
                height: bh,
            }
        }
        Placement::UniformRandom => Placed {
            left: rng.below_inclusive((w - side) as u64) as i64,
            top: rng.below_inclusive((h - side) as u64) as i64,
            width: side,
            height: side,
        },
    }
}

/// Renders one object, returning the tight bounding box of the pixels it painted.
fn render(img: &mut Image, p: &Placed, shape: Shape, color: [f64; 3]) -> Rect {
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for dy in 0..p.height {
        for dx in 0..p.width {
            let u = (dx as f64 + 0.5) / p.width as f64 * 2.0 - 1.0;
            let v = (dy as f64 + 0.5) / p.height as f64 * 2.0 - 1.0;
            if !shape.contains(u, v) {
                continue;
            }
            let (x, y) = (p.left + dx as i64, p.top + dy as i64);
            for (c, &val) in color.iter().enumerate() {
                img.set(x as u32, y as u32, c, val);
            }
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    Rect::new(x0, y0, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32)
}

fn generate_one(
    spec: &SyntheticSceneSpec,
    label: usize,
    rng: &mut RngStream,
) -> Result<(Image, Scene)> {
    let bg: Vec<f64> = (0..3)
        .map(|_| 0.5 + rng.uniform_range(-spec.background_variation, spec.background_variation))
        .collect();
    let mut img = Image::filled(spec.dims, 3, 0.0)?;
    for px in img.pixels_mut().chunks_exact_mut(3) {
        px.copy_from_slice(&bg);
    }
    let (lo, hi) = spec.objects_per_image;
    let count = lo + rng.below_inclusive((hi - lo) as u64) as usize;
    let shape = SHAPES[label];
    let mut objects = Vec::with_capacity(count);
    for _ in 0..count {
        let placed = place(spec, rng);
        let mut color = PALETTE[label];
        for c in &mut color {
            *c += rng.uniform_range(-spec.color_jitter, spec.color_jitter);
        }
        objects.push(render(&mut img, &placed, shape, color));
    }
    if spec.noise_level > 0.0 {
        for v in img.pixels_mut() {
            *v += spec.noise_level * rng.standard_normal();
        }
    }
    for v in img.pixels_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((img, Scene::new(spec.dims, objects)?))
}

/// `n` images with balanced labels (`i % class_count`) and their object boxes.
pub fn gen_synthetic(
    spec: &SyntheticSceneSpec,
    n: usize,
    rng: &RngStream,
) -> Result<(LabeledDataset, Vec<Scene>)> {
    spec.validate()?;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut scenes = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % spec.class_count;
        let (img, scene) = generate_one(spec, label, &mut rng.fork(i as u64))?;
        images.push(img);
        labels.push(label);
        scenes.push(scene);
    }
    Ok((
        LabeledDataset::new(images, labels, spec.class_count)?,
        scenes,
    ))
}
