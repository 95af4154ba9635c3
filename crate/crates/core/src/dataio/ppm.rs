//! Binary PPM (P6, maxval 255).

use crate::error::{Error, Result};
use crate::image::{Image, ImageDims};

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "PPM",
        reason: reason.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("{what} out of range")))
    }
}

/// Decode a P6 file; samples are scaled to `[0, 1]`.
pub fn load_ppm(bytes: &[u8]) -> Result<Image> {
    match bytes.get(..2) {
        Some(b"P6") => {}
        Some(m) if m[0] == b'P' => {
            return Err(format_err(format!(
                "unsupported variant {} (only binary P6)",
                String::from_utf8_lossy(m)
            )))
        }
        _ => return Err(format_err("missing P6 magic")),
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(format_err(format!("maxval {maxval} (only 255 supported)")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(format_err("missing whitespace after header")),
    }
    let dims = ImageDims::new(width, height).map_err(|_| format_err("zero image dimension"))?;
    let expected = dims.area() as usize * 3;
    let payload = &bytes[h.pos..];
    if payload.len() < expected {
        return Err(format_err(format!(
            "truncated payload: {} of {expected} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(format_err(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let px = payload.iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(dims, 3, px)
}

/// Encode as P6 with a canonical `P6\n<w> <h>\n255\n` header.
///
/// Values are clamped to `[0, 1]`, scaled and rounded; single-channel images
/// are written as gray RGB.
pub fn save_ppm(image: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.dims().area() as usize * 3);
    out.extend_from_slice(header.as_bytes());
    let to_byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    for px in image.pixels().chunks_exact(image.channels()) {
        if px.len() == 1 {
            out.extend([to_byte(px[0]); 3]);
        } else {
            out.extend(px.iter().map(|&v| to_byte(v)));
        }
    }
    out
}
