//! Grid sweeps over (method, alpha, crop_size, seed).
//!
//! Each cell is independent and derives all of its randomness from the master
//! seed and its replicate seed, so cells can run in parallel and the output
//! does not depend on scheduling. For a fixed replicate seed every method
//! starts from the same encoder weights and sees the same batch order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    estimate_fp_rate_over, geometry_stats, GeometryStats, Scene, DEFAULT_FP_TAU, DEFAULT_GRID,
};
use crate::contrastive::{
    linear_eval, pretrain, AugmentConfig, EncoderParams, LinearEvalConfig, LinearEvalReport,
    TrainConfig,
};
use crate::crop::{CropperConfig, Method};
use crate::dataio::LabeledDataset;
use crate::error::{first_issue, invalid, Error, Result};
use crate::image::ImageDims;
use crate::rng::RngStream;

pub const DEFAULT_SEEDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: Method,
    pub alpha: f64,
    pub crop_size: f64,
    pub seed: u64,
    pub fp_rate: Option<f64>,
    pub geometry: GeometryStats,
    pub lep_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub crop_sizes: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn issues(&self) -> Vec<Error> {
        let mut out = Vec::new();
        for (name, len) in [
            ("grid.methods", self.methods.len()),
            ("grid.alphas", self.alphas.len()),
            ("grid.crop_sizes", self.crop_sizes.len()),
            ("grid.seeds", self.seeds.len()),
        ] {
            if len == 0 {
                out.push(invalid(name, "must not be empty"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        first_issue(self.issues())
    }

    /// Cells in row-major order: method, alpha, crop size, seed.
    pub fn cells(&self) -> Vec<(Method, f64, f64, u64)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            for &a in &self.alphas {
                for &c in &self.crop_sizes {
                    for &s in &self.seeds {
                        out.push((m, a, c, s));
                    }
                }
            }
        }
        out
    }
}

/// Everything needed to pretrain and linearly evaluate one cell.
#[derive(Debug, Clone)]
pub struct LepSetup {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub train_cfg: TrainConfig,
    pub aug: AugmentConfig,
    pub lep: LinearEvalConfig,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Template for per-cell cropper configs (bounds, views, padding).
    pub base: CropperConfig,
    pub dims: ImageDims,
    /// Scenes for false-positive estimation; empty disables it.
    pub scenes: Vec<Scene>,
    pub fp_tau: f64,
    pub fp_samples: usize,
    pub geometry_samples: usize,
    pub grid: usize,
    pub lep: Option<LepSetup>,
}

impl SweepOptions {
    pub fn new(dims: ImageDims) -> Self {
        Self {
            base: CropperConfig::default(),
            dims,
            scenes: Vec::new(),
            fp_tau: DEFAULT_FP_TAU,
            fp_samples: 10_000,
            geometry_samples: 10_000,
            grid: DEFAULT_GRID,
            lep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: Method,
    pub alpha: f64,
    pub crop_size: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<CellFailure>,
}

/// Streams shared by every cell with the same replicate seed.
#[derive(Debug, Clone)]
pub struct SeedStreams {
    pub init: RngStream,
    pub train: RngStream,
    pub fp: RngStream,
    pub geometry: RngStream,
    pub lep: RngStream,
}

impl SeedStreams {
    pub fn new(master_seed: u64, seed: u64) -> Self {
        let base = RngStream::new(master_seed).fork(seed);
        Self {
            init: base.fork(0),
            train: base.fork(1),
            fp: base.fork(2),
            geometry: base.fork(3),
            lep: base.fork(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub loss_curve: Vec<f64>,
    pub report: LinearEvalReport,
}

/// Pretrain a fresh encoder with `cropper` and evaluate it linearly.
/// With `cropper = None` the encoder is evaluated untrained.
pub fn run_experiment(
    cropper: Option<&CropperConfig>,
    crop_size: f64,
    setup: &LepSetup,
    streams: &SeedStreams,
) -> Result<ExperimentResult> {
    let first = setup
        .train
        .images()
        .first()
        .ok_or(Error::Empty("training dataset"))?;
    let shape = setup
        .train_cfg
        .encoder_shape(first.dims(), first.channels(), crop_size)?;
    let init = EncoderParams::init(shape, &mut streams.init.clone())?;
    let (params, loss_curve) = match cropper {
        Some(c) => {
            let r = pretrain(
                init,
                setup.train.images(),
                c,
                &setup.aug,
                &setup.train_cfg,
                &streams.train,
            )?;
            (r.params, r.loss_curve)
        }
        None => (init, Vec::new()),
    };
    let report = linear_eval(
        &params,
        &setup.train,
        &setup.test,
        crop_size,
        &setup.aug,
        &setup.lep,
        &streams.lep,
    )?;
    Ok(ExperimentResult { loss_curve, report })
}

fn run_cell(
    cell: (Method, f64, f64, u64),
    master_seed: u64,
    opts: &SweepOptions,
) -> Result<SweepRecord> {
    let (method, alpha, crop_size, seed) = cell;
    let cropper = CropperConfig {
        method,
        alpha,
        crop_size,
        ..opts.base
    };
    cropper.validate()?;
    let streams = SeedStreams::new(master_seed, seed);
    let geometry = geometry_stats(
        &cropper,
        opts.dims,
        opts.geometry_samples,
        opts.grid,
        &mut streams.geometry.clone(),
    )?;
    let fp_rate = if opts.scenes.is_empty() {
        None
    } else {
        Some(
            estimate_fp_rate_over(
                &cropper,
                &opts.scenes,
                opts.fp_tau,
                opts.fp_samples,
                &mut streams.fp.clone(),
            )?
            .fp_rate,
        )
    };
    let lep_accuracy = match &opts.lep {
        Some(setup) => Some(
            run_experiment(Some(&cropper), crop_size, setup, &streams)?
                .report
                .test_accuracy,
        ),
        None => None,
    };
    Ok(SweepRecord {
        method,
        alpha,
        crop_size,
        seed,
        fp_rate,
        geometry,
        lep_accuracy,
    })
}

/// Run every grid cell. Failing cells are reported and do not stop the sweep.
pub fn run_sweep(grid: &SweepGrid, opts: &SweepOptions, master_seed: u64) -> Result<SweepOutcome> {
    grid.validate()?;
    let results: Vec<_> = grid
        .cells()
        .into_par_iter()
        .map(|cell| (cell, run_cell(cell, master_seed, opts)))
        .collect();
    let mut out = SweepOutcome::default();
    for ((method, alpha, crop_size, seed), r) in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.failures.push(CellFailure {
                method,
                alpha,
                crop_size,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

/// Aggregate over seeds for one (method, alpha, crop_size) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub alpha: f64,
    pub crop_size: f64,
    pub n_seeds: usize,
    pub fp_rate: Option<MeanStd>,
    pub mean_pair_iou: MeanStd,
    pub mean_center_distance: MeanStd,
    pub oob_area_fraction: MeanStd,
    pub lep_accuracy: Option<MeanStd>,
}

/// Group records by cell, keeping first-appearance order.
pub fn summarize(records: &[SweepRecord]) -> Vec<CellSummary> {
    let mut groups: Vec<((Method, u64, u64), Vec<&SweepRecord>)> = Vec::new();
    for r in records {
        let key = (r.method, r.alpha.to_bits(), r.crop_size.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| {
            let col = |f: &dyn Fn(&SweepRecord) -> f64| -> MeanStd {
                MeanStd::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>()).expect("non-empty group")
            };
            let opt_col = |f: &dyn Fn(&SweepRecord) -> Option<f64>| -> Option<MeanStd> {
                let v: Option<Vec<f64>> = g.iter().map(|r| f(r)).collect();
                v.and_then(|v| MeanStd::of(&v))
            };
            CellSummary {
                method: g[0].method,
                alpha: g[0].alpha,
                crop_size: g[0].crop_size,
                n_seeds: g.len(),
                fp_rate: opt_col(&|r| r.fp_rate),
                mean_pair_iou: col(&|r| r.geometry.mean_pair_iou),
                mean_center_distance: col(&|r| r.geometry.mean_center_distance),
                oob_area_fraction: col(&|r| r.geometry.oob_area_fraction),
                lep_accuracy: opt_col(&|r| r.lep_accuracy),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn opts() -> SweepOptions {
        let dims = ImageDims::new(32, 32).unwrap();
        let mut o = SweepOptions::new(dims);
        o.scenes = vec![Scene::new(dims, vec![Rect::new(8, 8, 16, 16)]).unwrap()];
        o.fp_samples = 500;
        o.geometry_samples = 500;
        o.grid = 4;
        o
    }

    #[test]
    fn one_record_per_seed() {
        let grid = SweepGrid {
            methods: vec![Method::Gcc],
            alphas: vec![1.0],
            crop_sizes: vec![0.4],
            seeds: vec![0, 1, 2, 3],
        };
        let out = run_sweep(&grid, &opts(), 9).unwrap();
        assert!(out.failures.is_empty());
        let seeds: Vec<u64> = out.records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2, 3]);
        assert!(out
            .records
            .iter()
            .all(|r| r.fp_rate.is_some() && r.lep_accuracy.is_none()));
        assert_eq!(run_sweep(&grid, &opts(), 9).unwrap(), out);
    }

    #[test]
    fn empty_grid_rejected() {
        let grid = SweepGrid {
            methods: vec![],
            alphas: vec![1.0],
            crop_sizes: vec![0.4],
            seeds: vec![0],
        };
        assert!(run_sweep(&grid, &opts(), 0).is_err());
    }

    #[test]
    fn bad_cells_recorded_not_fatal() {
        let grid = SweepGrid {
            methods: vec![Method::Cgcc],
            alphas: vec![-1.0, 0.5],
            crop_sizes: vec![0.4],
            seeds: vec![0],
        };
        let out = run_sweep(&grid, &opts(), 0).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].alpha, -1.0);
    }

    #[test]
    fn summary_mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[7.0]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());

        let grid = SweepGrid {
            methods: vec![Method::Gcc, Method::RandomCrop],
            alphas: vec![0.5, 1.0],
            crop_sizes: vec![0.4],
            seeds: vec![0, 1, 2],
        };
        let out = run_sweep(&grid, &opts(), 1).unwrap();
        let s = summarize(&out.records);
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|c| c.n_seeds == 3 && c.lep_accuracy.is_none()));
        assert_eq!(s[0].method, Method::Gcc);
        assert_eq!(s[1].alpha, 1.0);
    }
}
