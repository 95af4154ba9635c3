//! Subcommand implementations. Every command computes all of its results
//! before touching the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gccrop::analytics::{estimate_fp_rate_over, FpEstimate, GeometryStats};
use gccrop::contrastive::{
    linear_eval, pretrain, AugmentConfig, ChannelStats, EncoderParams, LinearEvalReport,
    TrainConfig,
};
use gccrop::dataio::{
    gen_synthetic, load_cifar10_bin, load_ppm, save_ppm, write_pivot_csv, write_results,
    write_summary_csv, DatasetSource, LabeledDataset, PivotMetric, ResultFormat,
};
use gccrop::sweep::{run_sweep, summarize, LepSetup, SeedStreams, SweepGrid, SweepOptions};
use gccrop::{generate_views, geometry_stats, Image, Method, RngStream, Scene};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

// Stream keys far from the small replicate seeds used by sweeps.
const DATA_STREAM: u64 = u64::MAX - 1;
const DEMO_STREAM: u64 = u64::MAX - 2;
const STATS_STREAM: u64 = u64::MAX - 3;

/// Replicate seed used by the single-run commands `pretrain` and `linear-eval`.
const RUN_REPLICATE: u64 = 0;

fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Write all files at once, creating the output directory if needed.
fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            Ok(path)
        })
        .collect()
}

struct Data {
    train: LabeledDataset,
    test: Option<LabeledDataset>,
    scenes: Vec<Scene>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Load the configured dataset. `with_test` asks for a held-out split;
/// `scenes` is the number of object-annotated scenes wanted (synthetic only).
fn load_data(cfg: &RunConfig, with_test: bool, scenes: usize) -> Result<Data> {
    let d = &cfg.dataset;
    let wanted = if with_test {
        d.train_size + d.test_size
    } else {
        d.train_size
    };
    match &d.source {
        DatasetSource::Synthetic(spec) => {
            let n = wanted.max(scenes).max(1);
            let (ds, all_scenes) =
                gen_synthetic(spec, n, &RngStream::new(cfg.seed).fork(DATA_STREAM))?;
            let (train, rest) = ds.split_at(d.train_size.min(n));
            let test = with_test.then(|| rest.split_at(d.test_size).0);
            Ok(Data {
                train,
                test,
                scenes: all_scenes.into_iter().take(scenes).collect(),
            })
        }
        DatasetSource::Cifar10Bin { path } => {
            let ds = load_cifar10_bin(&read(path)?)
                .with_context(|| format!("decoding {}", path.display()))?;
            let (train, rest) = match &d.test_path {
                Some(tp) => {
                    let test = load_cifar10_bin(&read(tp)?)
                        .with_context(|| format!("decoding {}", tp.display()))?;
                    (ds, test)
                }
                None => ds.split_at(d.train_size.min(ds.len())),
            };
            if train.len() < d.train_size {
                bail!(
                    "dataset has {} training records, train_size is {}",
                    train.len(),
                    d.train_size
                );
            }
            let train = train.split_at(d.train_size).0;
            let test = if with_test {
                if rest.len() < d.test_size {
                    bail!(
                        "dataset has {} test records, test_size is {}",
                        rest.len(),
                        d.test_size
                    );
                }
                Some(rest.split_at(d.test_size).0)
            } else {
                None
            };
            Ok(Data {
                train,
                test,
                scenes: Vec::new(),
            })
        }
    }
}

fn augment_config(cfg: &RunConfig, train: &LabeledDataset) -> Result<AugmentConfig> {
    Ok(AugmentConfig {
        flip_probability: cfg.augment.flip_probability,
        blur_sigma: cfg.augment.blur_sigma,
        stats: ChannelStats::compute(train.images()).context("standardization statistics")?,
    })
}

pub fn demo_crops(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let image = match &cfg.demo_image {
        Some(p) => load_ppm(&read(p)?).with_context(|| format!("decoding {}", p.display()))?,
        None => load_data(cfg, false, 0)?
            .train
            .images()
            .first()
            .cloned()
            .context("dataset is empty")?,
    };
    let views = generate_views(
        &image,
        &cfg.cropper,
        &mut RngStream::new(cfg.seed).fork(DEMO_STREAM),
    )?;
    let mut files = vec![
        ("rects.json".to_string(), to_json(&views.rects)),
        ("source.ppm".to_string(), save_ppm(&image)),
    ];
    for (i, v) in views.views.iter().enumerate() {
        files.push((format!("view_{i}.ppm"), save_ppm(v)));
    }
    write_outputs(&cfg.out_dir, &files)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsReport {
    pub method: Method,
    pub alpha: f64,
    pub crop_size: f64,
    pub geometry: GeometryStats,
    pub fp: Option<FpEstimate>,
}

pub fn stats(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let a = &cfg.analysis;
    let data = load_data(cfg, false, a.fp_scenes)?;
    let dims = match data.train.images().first() {
        Some(img) => img.dims(),
        None => bail!("dataset is empty"),
    };
    let root = RngStream::new(cfg.seed).fork(STATS_STREAM);
    eprintln!(
        "stats: {} samples of {} on {}x{}",
        a.n_samples, cfg.cropper.method, dims.width, dims.height
    );
    let geometry = geometry_stats(&cfg.cropper, dims, a.n_samples, a.grid, &mut root.fork(0))?;
    let fp = if data.scenes.is_empty() {
        None
    } else {
        Some(estimate_fp_rate_over(
            &cfg.cropper,
            &data.scenes,
            a.fp_tau,
            a.n_samples,
            &mut root.fork(1),
        )?)
    };
    let report = StatsReport {
        method: cfg.cropper.method,
        alpha: cfg.cropper.alpha,
        crop_size: cfg.cropper.crop_size,
        geometry,
        fp,
    };
    write_outputs(&cfg.out_dir, &[("stats.json".into(), to_json(&report))])
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = &cfg.sweep;
    let a = &cfg.analysis;
    let grid = SweepGrid {
        methods: s.methods.clone(),
        alphas: s.alphas.clone(),
        crop_sizes: s.crop_sizes.clone(),
        seeds: s.seeds.clone(),
    };
    let data = load_data(cfg, s.lep, a.fp_scenes)?;
    let dims = match data.train.images().first() {
        Some(img) => img.dims(),
        None => bail!("dataset is empty"),
    };
    let lep = match data.test {
        Some(test) if s.lep => Some(LepSetup {
            aug: augment_config(cfg, &data.train)?,
            train: data.train,
            test,
            train_cfg: cfg.train.clone(),
            lep: cfg.lep.clone(),
        }),
        _ => None,
    };
    let mut opts = SweepOptions::new(dims);
    opts.base = cfg.cropper;
    opts.scenes = data.scenes;
    opts.fp_tau = a.fp_tau;
    opts.fp_samples = a.n_samples;
    opts.geometry_samples = a.n_samples;
    opts.grid = a.grid;
    opts.lep = lep;
    eprintln!(
        "sweep: {} cells{}",
        grid.cells().len(),
        if opts.lep.is_some() {
            " with pretraining"
        } else {
            ""
        }
    );
    let outcome = run_sweep(&grid, &opts, cfg.seed)?;
    let cells = summarize(&outcome.records);
    let metric = PivotMetric::best_available(&cells);
    let mut files = vec![
        (
            "records.csv".to_string(),
            write_results(&outcome.records, ResultFormat::Csv),
        ),
        (
            "records.json".to_string(),
            write_results(&outcome.records, ResultFormat::Json),
        ),
        ("summary.csv".to_string(), write_summary_csv(&cells)),
        (
            "alpha_curves.csv".to_string(),
            write_pivot_csv(&cells, metric),
        ),
    ];
    if !outcome.failures.is_empty() {
        files.push(("failures.json".to_string(), to_json(&outcome.failures)));
    }
    let written = write_outputs(&cfg.out_dir, &files)?;
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!(
                "cell {} alpha={} crop_size={} seed={} failed: {}",
                f.method, f.alpha, f.crop_size, f.seed, f.error
            );
        }
        bail!(
            "{} of {} sweep cells failed",
            outcome.failures.len(),
            grid.cells().len()
        );
    }
    Ok(written)
}

/// Saved encoder: parameters plus the view geometry they were trained for.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedEncoder {
    pub crop_size: f64,
    pub params: EncoderParams,
}

fn initial_encoder(
    cfg: &RunConfig,
    train_cfg: &TrainConfig,
    first: &Image,
    streams: &SeedStreams,
) -> Result<EncoderParams> {
    let shape = train_cfg.encoder_shape(first.dims(), first.channels(), cfg.cropper.crop_size)?;
    Ok(EncoderParams::init(shape, &mut streams.init.clone())?)
}

pub fn pretrain_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg, false, 0)?;
    let first = data.train.images().first().context("dataset is empty")?;
    let streams = SeedStreams::new(cfg.seed, RUN_REPLICATE);
    let init = initial_encoder(cfg, &cfg.train, first, &streams)?;
    let aug = augment_config(cfg, &data.train)?;
    eprintln!(
        "pretrain: {} images, {} epochs, {} alpha={} crop_size={}",
        data.train.len(),
        cfg.train.epochs,
        cfg.cropper.method,
        cfg.cropper.alpha,
        cfg.cropper.crop_size
    );
    let result = pretrain(
        init,
        data.train.images(),
        &cfg.cropper,
        &aug,
        &cfg.train,
        &streams.train,
    )?;
    let mut curve = String::from("epoch,loss\n");
    for (e, l) in result.loss_curve.iter().enumerate() {
        eprintln!("  epoch {e}: loss {l:.4}");
        curve.push_str(&format!("{e},{l}\n"));
    }
    let saved = SavedEncoder {
        crop_size: cfg.cropper.crop_size,
        params: result.params,
    };
    write_outputs(
        &cfg.out_dir,
        &[
            ("encoder.json".into(), to_json(&saved)),
            ("loss_curve.csv".into(), curve.into_bytes()),
        ],
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LinearEvalOutput {
    /// Path of the evaluated encoder, or `None` for the untrained baseline.
    pub encoder: Option<PathBuf>,
    pub crop_size: f64,
    pub class_count: usize,
    pub chance_accuracy: f64,
    #[serde(flatten)]
    pub report: LinearEvalReport,
}

pub fn linear_eval_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg, true, 0)?;
    let test = data.test.context("no test split")?;
    let first = data.train.images().first().context("dataset is empty")?;
    let streams = SeedStreams::new(cfg.seed, RUN_REPLICATE);
    let (params, crop_size) = match &cfg.encoder {
        Some(p) => {
            let saved: SavedEncoder = serde_json::from_slice(&read(p)?)
                .with_context(|| format!("decoding encoder {}", p.display()))?;
            let expected = cfg
                .train
                .encoder_shape(first.dims(), first.channels(), saved.crop_size)?
                .input;
            if saved.params.shape.input != expected {
                bail!(
                    "encoder {} expects {:?} views, the dataset gives {:?} at crop_size {}",
                    p.display(),
                    saved.params.shape.input,
                    expected,
                    saved.crop_size
                );
            }
            (saved.params, saved.crop_size)
        }
        None => (
            initial_encoder(cfg, &cfg.train, first, &streams)?,
            cfg.cropper.crop_size,
        ),
    };
    let aug = augment_config(cfg, &data.train)?;
    eprintln!(
        "linear-eval: {} train / {} test images",
        data.train.len(),
        test.len()
    );
    let report = linear_eval(
        &params,
        &data.train,
        &test,
        crop_size,
        &aug,
        &cfg.lep,
        &streams.lep,
    )?;
    eprintln!(
        "  train {:.4} test {:.4}",
        report.train_accuracy, report.test_accuracy
    );
    let out = LinearEvalOutput {
        encoder: cfg.encoder.clone(),
        crop_size,
        class_count: data.train.class_count(),
        chance_accuracy: 1.0 / data.train.class_count() as f64,
        report,
    };
    write_outputs(&cfg.out_dir, &[("linear_eval.json".into(), to_json(&out))])
}
