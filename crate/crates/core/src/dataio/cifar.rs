//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 32x32 planar R, G, B bytes.

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::image::{Image, ImageDims};

pub const CIFAR10_RECORD_LEN: usize = 3073;
pub const CIFAR10_CLASSES: usize = 10;
const SIDE: u32 = 32;
const PLANE: usize = (SIDE * SIDE) as usize;

pub fn load_cifar10_bin(bytes: &[u8]) -> Result<LabeledDataset> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR10_RECORD_LEN) {
        return Err(Error::Format {
            format: "CIFAR-10",
            reason: format!(
                "length {} is not a positive multiple of {CIFAR10_RECORD_LEN}",
                bytes.len()
            ),
        });
    }
    let dims = ImageDims::new(SIDE, SIDE)?;
    let n = bytes.len() / CIFAR10_RECORD_LEN;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(CIFAR10_RECORD_LEN).enumerate() {
        let label = rec[0] as usize;
        if label >= CIFAR10_CLASSES {
            return Err(Error::Format {
                format: "CIFAR-10",
                reason: format!("record {i} has label byte {label}"),
            });
        }
        let planes = &rec[1..];
        let mut px = Vec::with_capacity(PLANE * 3);
        for p in 0..PLANE {
            for c in 0..3 {
                px.push(planes[c * PLANE + p] as f64 / 255.0);
            }
        }
        images.push(Image::new(dims, 3, px)?);
        labels.push(label);
    }
    LabeledDataset::new(images, labels, CIFAR10_CLASSES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_record() {
        let ds = load_cifar10_bin(&[0u8; CIFAR10_RECORD_LEN]).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels(), &[0]);
        assert!(ds.images()[0].pixels().iter().all(|&p| p == 0.0));
        assert_eq!(ds.images()[0].dims(), ImageDims::new(32, 32).unwrap());
    }

    #[test]
    fn planar_layout_becomes_interleaved() {
        let mut rec = vec![0u8; 2 * CIFAR10_RECORD_LEN];
        rec[CIFAR10_RECORD_LEN] = 7;
        let second = &mut rec[CIFAR10_RECORD_LEN + 1..];
        // pixel (1, 0): R = 255, G = 0, B = 51
        second[1] = 255;
        second[2 * PLANE + 1] = 51;
        let ds = load_cifar10_bin(&rec).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[0, 7]);
        assert_eq!(ds.images()[1].pixel(1, 0), &[1.0, 0.0, 0.2]);
    }

    #[test]
    fn rejects_bad_length_and_label() {
        assert!(load_cifar10_bin(&[]).is_err());
        assert!(load_cifar10_bin(&[0u8; CIFAR10_RECORD_LEN + 1]).is_err());
        let mut rec = vec![0u8; CIFAR10_RECORD_LEN];
        rec[0] = 10;
        assert!(matches!(load_cifar10_bin(&rec), Err(Error::Format { .. })));
    }
}
