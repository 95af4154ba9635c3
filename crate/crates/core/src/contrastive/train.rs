//! Contrastive pretraining with plain SGD.

use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentConfig};
use super::encoder::{Activation, EncoderParams, EncoderShape};
use super::loss::{nt_xent_loss_and_grad, EmbeddingBatch, LossReport, DEFAULT_TEMPERATURE};
use crate::crop::{compute_view_dims, generate_views, CropperConfig};
use crate::error::{first_issue, invalid, Error, Result};
use crate::image::{Image, ImageDims};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TEMPERATURE,
            lr: 0.05,
            epochs: 10,
            batch_size: 64,
            hidden: vec![128],
            embedding_dim: 32,
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn issues(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            out.push(invalid("tau", format!("{} (must be > 0)", self.tau)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            out.push(invalid("lr", format!("{} (must be >= 0)", self.lr)));
        }
        if self.batch_size < 2 {
            out.push(invalid(
                "batch_size",
                format!("{} (must be >= 2)", self.batch_size),
            ));
        }
        if self.embedding_dim == 0 || self.hidden.contains(&0) {
            out.push(invalid("hidden", "layer widths must be positive"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        first_issue(self.issues())
    }

    /// Encoder shape for views cropped at `crop_size` out of `dims` images.
    pub fn encoder_shape(
        &self,
        dims: ImageDims,
        channels: usize,
        crop_size: f64,
    ) -> Result<EncoderShape> {
        let (w, h) = compute_view_dims(crop_size, dims)?;
        Ok(EncoderShape {
            input: (w, h, channels),
            hidden: self.hidden.clone(),
            embedding_dim: self.embedding_dim,
            activation: self.activation,
        })
    }
}

/// One SGD step on the NT-Xent loss of the views generated from `images`.
///
/// Image `k` contributes embedding rows `2k` and `2k + 1`.
pub fn train_step(
    params: &mut EncoderParams,
    images: &[&Image],
    cropper: &CropperConfig,
    aug: &AugmentConfig,
    tau: f64,
    lr: f64,
    rng: &RngStream,
) -> Result<LossReport> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(invalid("lr", format!("{lr} (must be >= 0)")));
    }
    if cropper.n_views != 2 {
        return Err(invalid(
            "n_views",
            "contrastive training uses view pairs (n_views = 2)",
        ));
    }
    if images.len() < 2 {
        return Err(Error::Empty(
            "a contrastive batch needs at least two images",
        ));
    }
    let mut views = Vec::with_capacity(2 * images.len());
    for (k, img) in images.iter().enumerate() {
        let mut r = rng.fork(k as u64);
        let set = generate_views(img, cropper, &mut r)?;
        for v in &set.views {
            views.push(augment(v, aug, &mut r)?);
        }
    }
    let cache = params.forward_cached(params.flatten(&views)?)?;
    let batch = EmbeddingBatch::new(cache.embeddings().clone())?;
    let (report, grad) = nt_xent_loss_and_grad(&batch, tau)?;
    if lr > 0.0 {
        let grads = params.backward(&cache, &grad);
        params.sgd_step(&grads, lr);
        if !params.is_finite() {
            return Err(Error::NonFinite("encoder parameters after update"));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainResult {
    pub params: EncoderParams,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Deterministic Fisher–Yates permutation of `0..n`.
pub(crate) fn shuffled(n: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below_inclusive(i as u64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Run `cfg.epochs` epochs of shuffled mini-batch training starting from `initial`.
///
/// A trailing batch with a single image is skipped.
pub fn pretrain(
    initial: EncoderParams,
    images: &[Image],
    cropper: &CropperConfig,
    aug: &AugmentConfig,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<PretrainResult> {
    cfg.validate()?;
    cropper.validate()?;
    aug.validate()?;
    if images.len() < 2 {
        return Err(Error::Empty("pretraining needs at least two images"));
    }
    let mut params = initial;
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = shuffled(images.len(), &mut rng.fork2(epoch as u64, u64::MAX));
        let (mut total, mut steps) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<&Image> = chunk.iter().map(|&i| &images[i]).collect();
            let step_rng = rng.fork2(epoch as u64, b as u64);
            let report = train_step(
                &mut params,
                &batch,
                cropper,
                aug,
                cfg.tau,
                cfg.lr,
                &step_rng,
            )?;
            total += report.loss;
            steps += 1;
        }
        let mean = total / steps as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("epoch loss"));
        }
        loss_curve.push(mean);
    }
    Ok(PretrainResult { params, loss_curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrastive::augment::ChannelStats;
    use crate::crop::Method;

    fn toy_images(n: usize, seed: u64) -> Vec<Image> {
        let mut rng = RngStream::new(seed);
        let d = ImageDims::new(8, 8).unwrap();
        (0..n)
            .map(|_| {
                let px = (0..8 * 8 * 3).map(|_| rng.uniform()).collect();
                Image::new(d, 3, px).unwrap()
            })
            .collect()
    }

    fn setup() -> (
        Vec<Image>,
        CropperConfig,
        AugmentConfig,
        TrainConfig,
        EncoderParams,
    ) {
        let images = toy_images(4, 1);
        let cropper = CropperConfig::new(Method::Gcc, 0.2, 0.5);
        let aug = AugmentConfig {
            stats: ChannelStats::compute(&images).unwrap(),
            ..AugmentConfig::default()
        };
        let cfg = TrainConfig {
            hidden: vec![16],
            embedding_dim: 8,
            lr: 0.1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let shape = cfg.encoder_shape(images[0].dims(), 3, 0.5).unwrap();
        let params = EncoderParams::init(shape, &mut RngStream::new(2)).unwrap();
        (images, cropper, aug, cfg, params)
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let (images, cropper, aug, cfg, params) = setup();
        let refs: Vec<&Image> = images.iter().collect();
        let mut p = params.clone();
        let r = train_step(
            &mut p,
            &refs,
            &cropper,
            &aug,
            cfg.tau,
            0.0,
            &RngStream::new(3),
        )
        .unwrap();
        assert_eq!(p, params);
        assert!(r.loss > 0.0);
    }

    #[test]
    fn loss_decreases_on_toy_batch() {
        let (images, cropper, aug, cfg, mut params) = setup();
        let refs: Vec<&Image> = images.iter().collect();
        let rng = RngStream::new(4);
        let mut losses = Vec::new();
        for step in 0..50 {
            let r = train_step(
                &mut params,
                &refs,
                &cropper,
                &aug,
                cfg.tau,
                cfg.lr,
                &rng.fork(step),
            )
            .unwrap();
            losses.push(r.loss);
        }
        assert!(losses[49] < losses[0], "{losses:?}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let (images, cropper, aug, mut cfg, params) = setup();
        cfg.epochs = 3;
        cfg.batch_size = 2;
        let a = pretrain(
            params.clone(),
            &images,
            &cropper,
            &aug,
            &cfg,
            &RngStream::new(5),
        )
        .unwrap();
        let b = pretrain(params, &images, &cropper, &aug, &cfg, &RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.loss_curve.len(), 3);
        assert!(a.loss_curve.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (images, cropper, aug, mut cfg, params) = setup();
        cfg.epochs = 0;
        let r = pretrain(
            params.clone(),
            &images,
            &cropper,
            &aug,
            &cfg,
            &RngStream::new(5),
        )
        .unwrap();
        assert_eq!(r.params, params);
        assert!(r.loss_curve.is_empty());
    }

    #[test]
    fn multi_view_config_rejected() {
        let (images, mut cropper, aug, cfg, mut params) = setup();
        cropper.n_views = 3;
        let refs: Vec<&Image> = images.iter().collect();
        assert!(train_step(
            &mut params,
            &refs,
            &cropper,
            &aug,
            cfg.tau,
            cfg.lr,
            &RngStream::new(0)
        )
        .is_err());
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut p = shuffled(100, &mut RngStream::new(0));
        p.sort_unstable();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }
}
