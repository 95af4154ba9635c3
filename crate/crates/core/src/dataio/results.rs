//! Sweep result writers. CSV columns are fixed; JSON mirrors the record fields.

use crate::analytics::GeometryStats;
use crate::crop::Method;
use crate::error::{Error, Result};
use crate::sweep::{CellSummary, MeanStd, SweepRecord};

pub const RESULTS_CSV_HEADER: [&str; 9] = [
    "method",
    "alpha",
    "crop_size",
    "seed",
    "fp_rate",
    "mean_pair_iou",
    "mean_center_distance",
    "oob_area_fraction",
    "lep_accuracy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Format {
        format: "CSV",
        reason: e.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results(records: &[SweepRecord], format: ResultFormat) -> Vec<u8> {
    match format {
        ResultFormat::Json => {
            let mut out = serde_json::to_vec_pretty(records).expect("records serialize");
            out.push(b'\n');
            out
        }
        ResultFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(RESULTS_CSV_HEADER).expect("in-memory write");
            for r in records {
                w.write_record([
                    r.method.to_string(),
                    r.alpha.to_string(),
                    r.crop_size.to_string(),
                    r.seed.to_string(),
                    opt(r.fp_rate),
                    r.geometry.mean_pair_iou.to_string(),
                    r.geometry.mean_center_distance.to_string(),
                    r.geometry.oob_area_fraction.to_string(),
                    opt(r.lep_accuracy),
                ])
                .expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}

pub const SUMMARY_CSV_HEADER: [&str; 14] = [
    "method",
    "alpha",
    "crop_size",
    "n_seeds",
    "fp_rate_mean",
    "fp_rate_std",
    "mean_pair_iou_mean",
    "mean_pair_iou_std",
    "mean_center_distance_mean",
    "mean_center_distance_std",
    "oob_area_fraction_mean",
    "oob_area_fraction_std",
    "lep_accuracy_mean",
    "lep_accuracy_std",
];

fn mean_std(v: Option<MeanStd>) -> [String; 2] {
    match v {
        Some(m) => [m.mean.to_string(), m.std.to_string()],
        None => [String::new(), String::new()],
    }
}

/// One row per (method, alpha, crop_size) cell with mean and std over seeds.
pub fn write_summary_csv(cells: &[CellSummary]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_CSV_HEADER).expect("in-memory write");
    for c in cells {
        let mut row = vec![
            c.method.to_string(),
            c.alpha.to_string(),
            c.crop_size.to_string(),
            c.n_seeds.to_string(),
        ];
        for v in [
            c.fp_rate,
            Some(c.mean_pair_iou),
            Some(c.mean_center_distance),
            Some(c.oob_area_fraction),
            c.lep_accuracy,
        ] {
            row.extend(mean_std(v));
        }
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Summary column plotted against alpha in the pivot table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotMetric {
    LepAccuracy,
    FpRate,
    MeanPairIou,
}

impl PivotMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            PivotMetric::LepAccuracy => "lep_accuracy",
            PivotMetric::FpRate => "fp_rate",
            PivotMetric::MeanPairIou => "mean_pair_iou",
        }
    }

    fn get(self, c: &CellSummary) -> Option<MeanStd> {
        match self {
            PivotMetric::LepAccuracy => c.lep_accuracy,
            PivotMetric::FpRate => c.fp_rate,
            PivotMetric::MeanPairIou => Some(c.mean_pair_iou),
        }
    }

    /// The most informative metric every cell has: accuracy, then FP rate, then IoU.
    pub fn best_available(cells: &[CellSummary]) -> Self {
        [PivotMetric::LepAccuracy, PivotMetric::FpRate]
            .into_iter()
            .find(|m| !cells.is_empty() && cells.iter().all(|c| m.get(c).is_some()))
            .unwrap_or(PivotMetric::MeanPairIou)
    }
}

/// Wide table with one row per (method, alpha) and a mean/std column pair per
/// crop size: alpha on the x axis, one series per crop size.
pub fn write_pivot_csv(cells: &[CellSummary], metric: PivotMetric) -> Vec<u8> {
    let mut crops: Vec<f64> = Vec::new();
    let mut rows: Vec<(Method, f64)> = Vec::new();
    for c in cells {
        if !crops.iter().any(|x| x.to_bits() == c.crop_size.to_bits()) {
            crops.push(c.crop_size);
        }
        if !rows
            .iter()
            .any(|&(m, a)| m == c.method && a.to_bits() == c.alpha.to_bits())
        {
            rows.push((c.method, c.alpha));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "method".to_string(),
        "alpha".to_string(),
        "metric".to_string(),
    ];
    for c in &crops {
        header.push(format!("crop_{c}_mean"));
        header.push(format!("crop_{c}_std"));
    }
    w.write_record(&header).expect("in-memory write");
    for (m, a) in rows {
        let mut row = vec![m.to_string(), a.to_string(), metric.as_str().to_string()];
        for crop in &crops {
            let cell = cells.iter().find(|c| {
                c.method == m
                    && c.alpha.to_bits() == a.to_bits()
                    && c.crop_size.to_bits() == crop.to_bits()
            });
            row.extend(mean_std(cell.and_then(|c| metric.get(c))));
        }
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Parse a results CSV. The coverage grid is not part of the CSV and comes back empty.
pub fn parse_results_csv(bytes: &[u8]) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULTS_CSV_HEADER) {
        return Err(csv_err(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(csv_err);
    let opt_num = |s: &str| {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    rdr.records()
        .map(|row| {
            let row = row.map_err(csv_err)?;
            Ok(SweepRecord {
                method: row[0].parse::<Method>()?,
                alpha: num(&row[1])?,
                crop_size: num(&row[2])?,
                seed: row[3].parse().map_err(csv_err)?,
                fp_rate: opt_num(&row[4])?,
                geometry: GeometryStats {
                    mean_pair_iou: num(&row[5])?,
                    mean_center_distance: num(&row[6])?,
                    oob_area_fraction: num(&row[7])?,
                    coverage_grid: Vec::new(),
                },
                lep_accuracy: opt_num(&row[8])?,
            })
        })
        .collect()
}

pub fn parse_results_json(bytes: &[u8]) -> Result<Vec<SweepRecord>> {
    serde_json::from_slice(bytes).map_err(|e| Error::Format {
        format: "JSON",
        reason: e.to_string(),
    })
}
