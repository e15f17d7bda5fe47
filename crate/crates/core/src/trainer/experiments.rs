use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::{cluster_and_score, evaluate, train, Ablation, TrainConfig};
use crate::cluster::Metrics;
use crate::data::{apply_partial_alignment, MultiViewDataset};
use crate::error::{Error, Result};
use crate::Matrix;

/// Named objective variants compared by the ablation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    RecOnly,
    RecVda,
    RecSmc,
    NoGuidance,
    NoCfa,
    NoCma,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::RecOnly,
        Variant::RecVda,
        Variant::RecSmc,
        Variant::NoGuidance,
        Variant::NoCfa,
        Variant::NoCma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RecOnly => "rec_only",
            Variant::RecVda => "rec+vda",
            Variant::RecSmc => "rec+smc",
            Variant::NoGuidance => "no_guidance",
            Variant::NoCfa => "no_cfa",
            Variant::NoCma => "no_cma",
        }
    }

    /// Accepts `rec+vda` and `rec_vda` spellings.
    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().replace('+', "_");
        Self::ALL
            .into_iter()
            .find(|v| v.name().replace('+', "_") == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }

    pub fn ablations(self) -> &'static [Ablation] {
        match self {
            Variant::Full => &[],
            Variant::RecOnly => &[Ablation::NoVda, Ablation::NoSmc],
            Variant::RecVda => &[Ablation::NoSmc],
            Variant::RecSmc => &[Ablation::NoVda],
            Variant::NoGuidance => &[Ablation::NoGuidance],
            Variant::NoCfa => &[Ablation::NoCfa],
            Variant::NoCma => &[Ablation::NoCma],
        }
    }

    /// `cfg` with this variant's switches added to any already present.
    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let mut out = cfg.clone();
        out.ablation.extend(self.ablations().iter().copied());
        out
    }
}

/// One training-plus-evaluation run inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub label: String,
    pub eta: Option<f64>,
    pub seed: u64,
    pub metrics: Metrics,
    /// Graph purity per non-anchor view.
    pub purity: Vec<f64>,
    /// Epoch-mean total loss.
    pub loss_totals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub median: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                median: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self { mean, std, median }
    }
}

/// Aggregate of all runs sharing a label (and alignment rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub eta: Option<f64>,
    pub runs: usize,
    pub acc: MetricSummary,
    pub nmi: MetricSummary,
    pub ari: MetricSummary,
}

/// Groups runs by `(label, eta)` in first-seen order.
pub fn summarize(runs: &[SeedRun]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Option<f64>)> = Vec::new();
    for r in runs {
        let key = (r.label.clone(), r.eta);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(label, eta)| {
            let group: Vec<&SeedRun> = runs.iter().filter(|r| r.label == label && r.eta == eta).collect();
            let pick = |f: fn(&Metrics) -> f64| MetricSummary::of(&group.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
            SummaryRow {
                runs: group.len(),
                acc: pick(|m| m.acc),
                nmi: pick(|m| m.nmi),
                ari: pick(|m| m.ari),
                label,
                eta,
            }
        })
        .collect()
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str =
        "label,eta,runs,acc_mean,acc_std,acc_median,nmi_mean,nmi_std,nmi_median,ari_mean,ari_std,ari_median";

    pub fn csv_line(&self) -> String {
        let eta = self.eta.map(|e| e.to_string()).unwrap_or_default();
        let m = |s: &MetricSummary| format!("{},{},{}", s.mean, s.std, s.median);
        format!("{},{},{},{},{},{}", self.label, eta, self.runs, m(&self.acc), m(&self.nmi), m(&self.ari))
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    summary: &'a [SummaryRow],
    runs: &'a [SeedRun],
}

/// Writes the summary table as CSV and everything, including per-seed
/// runs, as a JSON sidecar.
pub fn write_summary(csv_path: &Path, json_path: &Path, summary: &[SummaryRow], runs: &[SeedRun]) -> Result<()> {
    let io = |e| Error::io(csv_path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(csv_path).map_err(io)?);
    writeln!(out, "{}", SummaryRow::CSV_HEADER).map_err(io)?;
    for row in summary {
        writeln!(out, "{}", row.csv_line()).map_err(io)?;
    }
    out.flush().map_err(io)?;
    let json = serde_json::to_string_pretty(&Sidecar { summary, runs }).expect("summary serializes");
    std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
}

/// Runs `f` over `jobs`, in parallel when the `parallel` feature is on.
/// Output order follows input order.
fn run_jobs<T: Sync, R: Send>(jobs: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(f).collect()
    }
}

fn train_and_score(ds: &MultiViewDataset, cfg: &TrainConfig, label: &str, eta: Option<f64>) -> Result<SeedRun> {
    let (model, log) = train(ds, cfg)?;
    let ev = evaluate(&model, ds, cfg)?;
    Ok(SeedRun {
        label: label.to_string(),
        eta,
        seed: cfg.seed,
        metrics: ev.metrics(),
        purity: ev.purity,
        loss_totals: log.totals(),
    })
}

fn with_seed(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.clone() }
}

/// Trains every variant once per seed on the same dataset. Returns per-run
/// records in `(variant, seed)` order.
pub fn run_ablation_suite(ds: &MultiViewDataset, cfg: &TrainConfig, variants: &[Variant], seeds: &[u64]) -> Result<Vec<SeedRun>> {
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    run_jobs(&jobs, |&(variant, seed)| {
        train_and_score(ds, &with_seed(&variant.apply(cfg), seed), variant.name(), None)
    })
}

/// For every alignment rate and seed: re-simulates the alignment of the
/// fully aligned `ds` with that seed, trains and evaluates.
pub fn sweep_alignment(ds: &MultiViewDataset, cfg: &TrainConfig, etas: &[f64], seeds: &[u64]) -> Result<Vec<SeedRun>> {
    if let Some(e) = etas.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::InvalidArgument(format!("alignment rate {e} outside (0, 1]")));
    }
    let jobs: Vec<(f64, u64)> = etas
        .iter()
        .flat_map(|&e| seeds.iter().map(move |&s| (e, s)))
        .collect();
    run_jobs(&jobs, |&(eta, seed)| {
        let partial = apply_partial_alignment(ds, eta, seed)?;
        train_and_score(&partial, &with_seed(cfg, seed), "eta", Some(eta))
    })
}

/// Fusion by re-pairing: each non-anchor view contributes the row whose
/// features are Euclidean-nearest to the anchor row, searched among that
/// view's unaligned rows. Aligned rows keep their own counterpart.
pub fn correspondence_fusion(features: &[Matrix], aligned: &[bool]) -> Result<Matrix> {
    let (n, d) = features[0].dim();
    if features.iter().any(|h| h.dim() != (n, d)) || aligned.len() != n {
        return Err(Error::Shape("correspondence inputs disagree in shape".into()));
    }
    let unaligned: Vec<usize> = (0..n).filter(|&i| !aligned[i]).collect();
    let mut out = Array2::zeros((n, d * features.len()));
    out.slice_mut(s![.., 0..d]).assign(&features[0]);
    for (v, h) in features.iter().enumerate().skip(1) {
        let col = v * d;
        for i in 0..n {
            let src = if aligned[i] {
                i
            } else {
                let anchor = features[0].row(i);
                let mut best = (f64::INFINITY, unaligned[0]);
                for &k in &unaligned {
                    let dist: f64 = anchor.iter().zip(h.row(k)).map(|(a, b)| (a - b).powi(2)).sum();
                    if dist < best.0 {
                        best = (dist, k);
                    }
                }
                best.1
            };
            out.slice_mut(s![i, col..col + d]).assign(&h.row(src));
        }
    }
    Ok(out)
}

/// Per-seed metric pairs from [`compare_matching`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingComparison {
    pub semantic: Vec<SeedRun>,
    pub correspondence: Vec<SeedRun>,
}

impl MatchingComparison {
    pub fn runs(&self) -> Vec<SeedRun> {
        self.semantic.iter().chain(&self.correspondence).cloned().collect()
    }
}

pub const SEMANTIC_LABEL: &str = "semantic_matching";
pub const CORRESPONDENCE_LABEL: &str = "correspondence";

/// Trains the full model once per seed and scores both fusion paths on
/// the same projected features.
pub fn compare_matching(ds: &MultiViewDataset, cfg: &TrainConfig, seeds: &[u64]) -> Result<MatchingComparison> {
    let pairs = run_jobs(seeds, |&seed| {
        let cfg = with_seed(cfg, seed);
        let (model, log) = train(ds, &cfg)?;
        let ev = evaluate(&model, ds, &cfg)?;
        let fused = correspondence_fusion(&ev.features, ds.aligned_mask())?;
        let corr = cluster_and_score(&fused, ds, &cfg)?;
        let run = |label: &str, metrics: Metrics| SeedRun {
            label: label.to_string(),
            eta: None,
            seed,
            metrics,
            purity: ev.purity.clone(),
            loss_totals: log.totals(),
        };
        Ok((
            run(SEMANTIC_LABEL, ev.metrics()),
            run(CORRESPONDENCE_LABEL, corr.metrics.expect("scored")),
        ))
    })?;
    let (semantic, correspondence) = pairs.into_iter().unzip();
    Ok(MatchingComparison { semantic, correspondence })
}
