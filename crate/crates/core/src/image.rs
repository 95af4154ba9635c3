use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Width and height of an image in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("dims", format!("{width}x{height} has a zero side")));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// Geometric center `(w/2, h/2)`.
    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// Owned raster, row-major with interleaved channels, values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    dims: ImageDims,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(dims: ImageDims, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(invalid("channels", format!("{channels} (expected 1 or 3)")));
        }
        let expected = dims.area() as usize * channels;
        if pixels.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} samples"),
                actual: format!("{} samples", pixels.len()),
            });
        }
        Ok(Self {
            dims,
            channels,
            pixels,
        })
    }

    pub fn filled(dims: ImageDims, channels: usize, value: f64) -> Result<Self> {
        Self::new(dims, channels, vec![value; dims.area() as usize * channels])
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn width(&self) -> u32 {
        self.dims.width
    }

    pub fn height(&self) -> u32 {
        self.dims.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.dims.width as usize + x as usize) * self.channels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: usize) -> f64 {
        self.pixels[self.offset(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: usize, v: f64) {
        let o = self.offset(x, y);
        self.pixels[o + c] = v;
    }

    /// All channels of one pixel.
    pub fn pixel(&self, x: u32, y: u32) -> &[f64] {
        let o = self.offset(x, y);
        &self.pixels[o..o + self.channels]
    }
}
