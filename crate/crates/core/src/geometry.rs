//! Crop rectangles and the integer geometry shared by samplers and analytics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageDims;

/// Crop rectangle in image coordinates.
///
/// `left`/`top` may be negative and the far edges may run past the image:
/// the uncorrected Gaussian samplers produce such rects and the view
/// extractor pads them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub left: i64,
    pub top: i64,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub const fn new(left: i64, top: i64, width: u32, height: u32) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    /// The whole image.
    pub fn full(dims: ImageDims) -> Self {
        Self::new(0, 0, dims.width, dims.height)
    }

    pub fn right(&self) -> i64 {
        self.left + self.width as i64
    }

    pub fn bottom(&self) -> i64 {
        self.top + self.height as i64
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.left as f64 + self.width as f64 / 2.0,
            self.top as f64 + self.height as f64 / 2.0,
        )
    }

    pub fn intersection_area(&self, other: &Rect) -> u64 {
        let w = self.right().min(other.right()) - self.left.max(other.left);
        let h = self.bottom().min(other.bottom()) - self.top.max(other.top);
        if w <= 0 || h <= 0 {
            0
        } else {
            w as u64 * h as u64
        }
    }

    pub fn is_inside(&self, dims: ImageDims) -> bool {
        self.left >= 0
            && self.top >= 0
            && self.right() <= dims.width as i64
            && self.bottom() <= dims.height as i64
    }

    fn check_fits(&self, dims: ImageDims) -> Result<()> {
        if self.width > dims.width || self.height > dims.height {
            return Err(Error::RectTooLarge {
                rect_w: self.width,
                rect_h: self.height,
                img_w: dims.width,
                img_h: dims.height,
            });
        }
        Ok(())
    }
}

/// Rect of size `view_dims` centered on `center`, corners rounded half away from zero.
pub fn center_to_rect(center: (f64, f64), view_dims: (u32, u32)) -> Rect {
    let (x, y) = center;
    let (w, h) = view_dims;
    Rect::new(
        (x - w as f64 / 2.0).round() as i64,
        (y - h as f64 / 2.0).round() as i64,
        w,
        h,
    )
}

/// Translate `rect` the minimal distance along each axis so it lies inside the image.
///
/// Each violated axis moves toward the image center; in-bounds rects are returned unchanged.
pub fn correct_rect(rect: Rect, dims: ImageDims) -> Result<Rect> {
    rect.check_fits(dims)?;
    let max_left = (dims.width - rect.width) as i64;
    let max_top = (dims.height - rect.height) as i64;
    Ok(Rect {
        left: rect.left.clamp(0, max_left),
        top: rect.top.clamp(0, max_top),
        ..rect
    })
}

pub(crate) fn ensure_fits(rect: &Rect, dims: ImageDims) -> Result<()> {
    rect.check_fits(dims)
}

/// Intersection over union of two rects, in `[0, 1]`.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Fraction of the rect's area that falls outside the image.
pub fn oob_fraction(rect: &Rect, dims: ImageDims) -> f64 {
    let inside = rect.intersection_area(&Rect::full(dims));
    1.0 - inside as f64 / rect.area() as f64
}
