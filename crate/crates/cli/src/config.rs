//! The JSON run configuration and its validation.

use std::path::{Path, PathBuf};

use gccrop::analytics::{DEFAULT_FP_TAU, DEFAULT_GRID};
use gccrop::contrastive::{LinearEvalConfig, TrainConfig};
use gccrop::dataio::{DatasetSource, SyntheticSceneSpec};
use gccrop::{CropperConfig, Method};
use serde::{Deserialize, Serialize};

/// Flip and blur settings. Standardization statistics are always computed
/// from the training split, so they are not configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSettings {
    pub flip_probability: f64,
    pub blur_sigma: f64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            blur_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Separate CIFAR-10 batch for the test split. Without it the test split
    /// is taken from the records following the training split.
    pub test_path: Option<PathBuf>,
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::Synthetic(SyntheticSceneSpec::default()),
            test_path: None,
            train_size: 2000,
            test_size: 1000,
        }
    }
}

/// Monte Carlo settings shared by `stats` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    pub n_samples: usize,
    pub grid: usize,
    pub fp_tau: f64,
    /// Synthetic scenes used for false-positive estimation; 0 disables it.
    pub fp_scenes: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            grid: DEFAULT_GRID,
            fp_tau: DEFAULT_FP_TAU,
            fp_scenes: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub crop_sizes: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Also pretrain and linearly evaluate every cell (slow).
    pub lep: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            alphas: vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0],
            crop_sizes: vec![0.2, 0.4, 0.6, 0.8],
            seeds: (0..gccrop::sweep::DEFAULT_SEEDS as u64).collect(),
            lep: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub cropper: CropperConfig,
    pub augment: AugmentSettings,
    pub train: TrainConfig,
    pub lep: LinearEvalConfig,
    pub dataset: DatasetConfig,
    pub analysis: AnalysisSettings,
    pub sweep: SweepSettings,
    /// Input image for `demo-crops`; the first dataset image when absent.
    pub demo_image: Option<PathBuf>,
    /// Encoder parameters for `linear-eval`; an untrained encoder when absent.
    pub encoder: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cropper: CropperConfig::default(),
            augment: AugmentSettings::default(),
            train: TrainConfig::default(),
            lep: LinearEvalConfig::default(),
            dataset: DatasetConfig::default(),
            analysis: AnalysisSettings::default(),
            sweep: SweepSettings::default(),
            demo_image: None,
            encoder: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Which subcommand a config is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DemoCrops,
    Stats,
    Sweep,
    Pretrain,
    LinearEval,
}

impl Command {
    /// Files the command writes, relative to the output directory.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            // plus one view_<i>.ppm per view
            Command::DemoCrops => &["rects.json", "source.ppm"],
            Command::Stats => &["stats.json"],
            Command::Sweep => &[
                "records.csv",
                "records.json",
                "summary.csv",
                "alpha_curves.csv",
                "failures.json",
            ],
            Command::Pretrain => &["encoder.json", "loss_curve.csv"],
            Command::LinearEval => &["linear_eval.json"],
        }
    }

    fn uses_dataset(self, cfg: &RunConfig) -> bool {
        match self {
            Command::DemoCrops => cfg.demo_image.is_none(),
            // the others read it at least for the image dimensions
            _ => true,
        }
    }

    fn trains(self, cfg: &RunConfig) -> bool {
        match self {
            Command::Pretrain | Command::LinearEval => true,
            Command::Sweep => cfg.sweep.lep,
            _ => false,
        }
    }
}

fn push_all(out: &mut Vec<String>, prefix: &str, issues: Vec<gccrop::Error>) {
    out.extend(issues.into_iter().map(|e| match e {
        gccrop::Error::InvalidConfig { field, reason } => {
            format!("invalid {prefix}.{field}: {reason}")
        }
        other => format!("invalid {prefix}: {other}"),
    }));
}

fn check_input(out: &mut Vec<String>, field: &str, path: &Path, outputs: &[PathBuf]) {
    if !path.is_file() {
        out.push(format!(
            "invalid {field}: {} is not a readable file",
            path.display()
        ));
    }
    if outputs.iter().any(|o| o == path) {
        out.push(format!(
            "invalid {field}: {} is also an output of this command",
            path.display()
        ));
    }
}

impl RunConfig {
    pub fn output_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Every problem with the config for `cmd`, as `invalid <field>: <reason>` lines.
    pub fn diagnostics(&self, cmd: Command) -> Vec<String> {
        let mut out = Vec::new();
        push_all(&mut out, "cropper", self.cropper.issues());

        let aug = &self.augment;
        if !(0.0..=1.0).contains(&aug.flip_probability) {
            out.push(format!(
                "invalid augment.flip_probability: {} (must be in [0, 1])",
                aug.flip_probability
            ));
        }
        if !(aug.blur_sigma > 0.0 && aug.blur_sigma.is_finite()) {
            out.push(format!(
                "invalid augment.blur_sigma: {} (must be > 0)",
                aug.blur_sigma
            ));
        }

        if cmd.trains(self) {
            push_all(&mut out, "train", self.train.issues());
            push_all(&mut out, "lep", self.lep.issues());
            if self.cropper.n_views != 2 {
                out.push(format!(
                    "invalid cropper.n_views: {} (training uses view pairs, must be 2)",
                    self.cropper.n_views
                ));
            }
        }

        let a = &self.analysis;
        if matches!(cmd, Command::Stats | Command::Sweep) {
            if a.n_samples == 0 {
                out.push("invalid analysis.n_samples: must be >= 1".into());
            }
            if a.grid == 0 {
                out.push("invalid analysis.grid: must be >= 1".into());
            }
            if !(a.fp_tau > 0.0 && a.fp_tau < 1.0) {
                out.push(format!(
                    "invalid analysis.fp_tau: {} (must be in (0, 1))",
                    a.fp_tau
                ));
            }
            if a.fp_scenes > 0 && !matches!(self.dataset.source, DatasetSource::Synthetic(_)) {
                out.push("invalid analysis.fp_scenes: object boxes are only known for synthetic datasets; set it to 0".into());
            }
        }

        if cmd == Command::Sweep {
            let s = &self.sweep;
            for (name, empty) in [
                ("methods", s.methods.is_empty()),
                ("alphas", s.alphas.is_empty()),
                ("crop_sizes", s.crop_sizes.is_empty()),
                ("seeds", s.seeds.is_empty()),
            ] {
                if empty {
                    out.push(format!("invalid sweep.{name}: must not be empty"));
                }
            }
            for (i, &alpha) in s.alphas.iter().enumerate() {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    out.push(format!(
                        "invalid sweep.alphas[{i}]: {alpha} (must be finite and >= 0)"
                    ));
                }
            }
            for (i, &c) in s.crop_sizes.iter().enumerate() {
                if !(c > 0.0 && c <= 1.0) {
                    out.push(format!(
                        "invalid sweep.crop_sizes[{i}]: {c} (must be in (0, 1])"
                    ));
                }
            }
            let mut seen = s.seeds.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != s.seeds.len() {
                out.push("invalid sweep.seeds: duplicate seeds".into());
            }
        }

        let outputs: Vec<PathBuf> = cmd.outputs().iter().map(|n| self.output_path(n)).collect();
        if cmd.uses_dataset(self) {
            let d = &self.dataset;
            match &d.source {
                DatasetSource::Synthetic(spec) => {
                    push_all(&mut out, "dataset.source.synthetic", spec.issues())
                }
                DatasetSource::Cifar10Bin { path } => {
                    check_input(&mut out, "dataset.source.cifar10_bin.path", path, &outputs)
                }
            }
            if let Some(p) = &d.test_path {
                check_input(&mut out, "dataset.test_path", p, &outputs);
            }
            if cmd.trains(self) {
                if d.train_size < 2 {
                    out.push(format!(
                        "invalid dataset.train_size: {} (must be >= 2)",
                        d.train_size
                    ));
                }
                if d.test_size == 0 {
                    out.push("invalid dataset.test_size: must be >= 1".into());
                }
            }
        }
        if cmd == Command::DemoCrops {
            if let Some(p) = &self.demo_image {
                check_input(&mut out, "demo_image", p, &outputs);
            }
        }
        if cmd == Command::LinearEval {
            if let Some(p) = &self.encoder {
                check_input(&mut out, "encoder", p, &outputs);
            }
        }
        if self.out_dir.as_os_str().is_empty() {
            out.push("invalid out_dir: must not be empty".into());
        } else if self.out_dir.is_file() {
            out.push(format!(
                "invalid out_dir: {} is a file",
                self.out_dir.display()
            ));
        }
        out
    }
}
