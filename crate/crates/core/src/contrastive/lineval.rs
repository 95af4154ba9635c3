//! Linear evaluation: a softmax classifier trained on frozen encoder features.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::augment::{preprocess, AugmentConfig};
use super::encoder::EncoderParams;
use super::train::shuffled;
use crate::crop::{compute_view_dims, extract_view, PadPolicy};
use crate::dataio::LabeledDataset;
use crate::error::{first_issue, invalid, Error, Result};
use crate::geometry::Rect;
use crate::geometry::{center_to_rect, correct_rect};
use crate::image::{Image, ImageDims};
use crate::rng::RngStream;

/// Which encoder layer the linear classifier reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeatureLayer {
    /// The final embedding (the NT-Xent input).
    #[default]
    Embedding,
    /// The last hidden layer.
    Backbone,
}

/// How evaluation views are cut from an image at the encoder's input size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EvalViews {
    /// The single centered window.
    #[default]
    Center,
    /// Mean features over a 3x3 grid of windows spanning the whole image
    /// (offsets 0, middle and far edge on each axis).
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearEvalConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub features: FeatureLayer,
    pub views: EvalViews,
}

impl Default for LinearEvalConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.1,
            batch_size: 64,
            features: FeatureLayer::default(),
            views: EvalViews::default(),
        }
    }
}

impl LinearEvalConfig {
    pub fn issues(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            out.push(invalid("lr", format!("{} (must be > 0)", self.lr)));
        }
        if self.batch_size == 0 {
            out.push(invalid("batch_size", "must be >= 1"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        first_issue(self.issues())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearEvalReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Evaluation windows for an image, all in-bounds and at the view size.
pub fn eval_rects(dims: ImageDims, crop_size: f64, mode: EvalViews) -> Result<Vec<Rect>> {
    let (w, h) = compute_view_dims(crop_size, dims)?;
    match mode {
        EvalViews::Center => Ok(vec![correct_rect(
            center_to_rect(dims.center(), (w, h)),
            dims,
        )?]),
        EvalViews::Grid => {
            let offsets = |slack: u32| -> Vec<i64> {
                let mut o = vec![0, slack.div_ceil(2) as i64, slack as i64];
                o.dedup();
                o
            };
            let xs = offsets(dims.width - w);
            let ys = offsets(dims.height - h);
            Ok(ys
                .iter()
                .flat_map(|&t| xs.iter().map(move |&l| Rect::new(l, t, w, h)))
                .collect())
        }
    }
}

/// Features of the evaluation views of every image, averaged over windows.
pub fn extract_features(
    encoder: &EncoderParams,
    images: &[Image],
    crop_size: f64,
    aug: &AugmentConfig,
    cfg: &LinearEvalConfig,
) -> Result<Array2<f64>> {
    let Some(first) = images.first() else {
        return Err(Error::Empty("evaluation images"));
    };
    let rects = eval_rects(first.dims(), crop_size, cfg.views)?;
    let mut views = Vec::with_capacity(images.len() * rects.len());
    for img in images {
        for r in &rects {
            views.push(preprocess(&extract_view(img, r, PadPolicy::Zero)?, aug)?);
        }
    }
    let feats = match cfg.features {
        FeatureLayer::Embedding => encoder.forward(&views)?,
        FeatureLayer::Backbone => encoder.features(&views)?,
    };
    let k = rects.len();
    let mut out = Array2::zeros((images.len(), feats.ncols()));
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let block = feats.slice(ndarray::s![i * k..(i + 1) * k, ..]);
        row.assign(&block.mean_axis(Axis(0)).expect("at least one window"));
    }
    Ok(out)
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    logits
}

fn accuracy(scores: &Array2<f64>, labels: &[usize]) -> f64 {
    let hits = scores
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(row, &l)| {
            let best = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |b, (i, &v)| if v > b.1 { (i, v) } else { b },
                );
            best.0 == l
        })
        .count();
    hits as f64 / labels.len() as f64
}

fn check_labels(labels: &[usize], classes: usize, rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows} labels"),
            actual: format!("{}", labels.len()),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label { label, classes });
    }
    Ok(())
}

/// Train a softmax regression on `train` features and report accuracies.
///
/// Features are standardized with statistics from the training split.
pub fn linear_probe(
    train: &Array2<f64>,
    train_labels: &[usize],
    test: &Array2<f64>,
    test_labels: &[usize],
    classes: usize,
    cfg: &LinearEvalConfig,
    rng: &RngStream,
) -> Result<LinearEvalReport> {
    cfg.validate()?;
    if train.nrows() == 0 || test.nrows() == 0 {
        return Err(Error::Empty("linear evaluation split"));
    }
    if classes < 2 {
        return Err(invalid("class_count", format!("{classes} (must be >= 2)")));
    }
    check_labels(train_labels, classes, train.nrows())?;
    check_labels(test_labels, classes, test.nrows())?;
    if train.ncols() != test.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} features", train.ncols()),
            actual: format!("{}", test.ncols()),
        });
    }
    let mean = train.mean_axis(Axis(0)).expect("non-empty");
    let std = train
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-8 { s } else { 1.0 });
    let norm = |x: &Array2<f64>| (x - &mean) / &std;
    let (xtr, xte) = (norm(train), norm(test));

    let f = xtr.ncols();
    let mut w = Array2::<f64>::zeros((f, classes));
    let mut b = Array1::<f64>::zeros(classes);
    for epoch in 0..cfg.epochs {
        let order = shuffled(xtr.nrows(), &mut rng.fork(epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            let x = xtr.select(Axis(0), chunk);
            let mut delta = softmax_rows(x.dot(&w) + &b);
            for (mut row, &i) in delta.axis_iter_mut(Axis(0)).zip(chunk) {
                row[train_labels[i]] -= 1.0;
            }
            let scale = cfg.lr / chunk.len() as f64;
            w.scaled_add(-scale, &x.t().dot(&delta));
            b.scaled_add(-scale, &delta.sum_axis(Axis(0)));
        }
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("linear classifier weights"));
    }
    Ok(LinearEvalReport {
        train_accuracy: accuracy(&(xtr.dot(&w) + &b), train_labels),
        test_accuracy: accuracy(&(xte.dot(&w) + &b), test_labels),
    })
}

/// Linear evaluation of a frozen encoder. The encoder is only read.
pub fn linear_eval(
    frozen: &EncoderParams,
    train: &LabeledDataset,
    test: &LabeledDataset,
    crop_size: f64,
    aug: &AugmentConfig,
    cfg: &LinearEvalConfig,
    rng: &RngStream,
) -> Result<LinearEvalReport> {
    if train.class_count() != test.class_count() {
        return Err(invalid(
            "class_count",
            format!(
                "train has {} classes, test has {}",
                train.class_count(),
                test.class_count()
            ),
        ));
    }
    let ftr = extract_features(frozen, train.images(), crop_size, aug, cfg)?;
    let fte = extract_features(frozen, test.images(), crop_size, aug, cfg)?;
    linear_probe(
        &ftr,
        train.labels(),
        &fte,
        test.labels(),
        train.class_count(),
        cfg,
        rng,
    )
}
