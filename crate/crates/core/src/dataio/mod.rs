//! Dataset and result I/O, plus the synthetic scene generator.

mod cifar;
mod ppm;
mod results;
mod synthetic;

pub use cifar::{load_cifar10_bin, CIFAR10_CLASSES, CIFAR10_RECORD_LEN};
pub use ppm::{load_ppm, save_ppm};
pub use results::{
    parse_results_csv, parse_results_json, write_pivot_csv, write_results, write_summary_csv,
    PivotMetric, ResultFormat, RESULTS_CSV_HEADER, SUMMARY_CSV_HEADER,
};
pub use synthetic::{gen_synthetic, Placement, SyntheticSceneSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Images with class labels in `0..class_count`; all images share dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<Image>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", images.len()),
                actual: format!("{}", labels.len()),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Label {
                label,
                classes: class_count,
            });
        }
        if let Some(first) = images.first() {
            let key = (first.dims(), first.channels());
            if images.iter().any(|i| (i.dims(), i.channels()) != key) {
                return Err(Error::ShapeMismatch {
                    expected: "uniform image dimensions".into(),
                    actual: "mixed dimensions".into(),
                });
            }
        }
        Ok(Self {
            images,
            labels,
            class_count,
        })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// First `n` records and the rest.
    pub fn split_at(&self, n: usize) -> (LabeledDataset, LabeledDataset) {
        let n = n.min(self.len());
        let part = |r: std::ops::Range<usize>| LabeledDataset {
            images: self.images[r.clone()].to_vec(),
            labels: self.labels[r].to_vec(),
            class_count: self.class_count,
        };
        (part(0..n), part(n..self.len()))
    }
}

/// Dataset source named in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Cifar10Bin { path: std::path::PathBuf },
    Synthetic(SyntheticSceneSpec),
}
