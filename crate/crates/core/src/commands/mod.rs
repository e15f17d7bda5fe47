//! In-process implementations of every CLI command. Each writes its outputs
//! plus a [`RunManifest`] into an output directory.

mod manifest;
mod selfcheck;

pub use manifest::{sha256_file, InputHash, RunManifest, MANIFEST_FILE};
pub use selfcheck::{run_selfcheck, CheckResult, Fault, SelfCheckReport};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::cluster::Metrics;
use crate::data::{apply_partial_alignment, generate_synthetic, load_dataset, zscore_views, MultiViewDataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::graph::GraphMeta;
use crate::io::{write_labels, write_matrix};
use crate::trainer::{
    self, correspondence_fusion, summarize, write_summary, Evaluation, MatchingComparison, SeedRun, SummaryRow,
    TrainConfig, Variant,
};

pub const METRICS_FILE: &str = "metrics.json";
pub const LOSS_LOG_FILE: &str = "loss_log.csv";
pub const GRAPH_EDGES_FILE: &str = "graph_edges.csv";
pub const GRAPH_META_FILE: &str = "graph_meta.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_ECHO_FILE: &str = "config_echo.toml";
pub const LABELS_FILE: &str = "labels.txt";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- gen-data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataArgs {
    pub n: usize,
    pub k: usize,
    pub views: usize,
    pub dims: Vec<usize>,
    pub sep: f64,
    pub noise: f64,
    pub seed: u64,
    /// Write views as raw binary instead of CSV.
    pub binary: bool,
}

/// Writes `view_<v>.csv` (or `.bin`) per view, `labels.txt` and the manifest.
pub fn gen_data(args: &GenDataArgs, out_dir: &Path) -> Result<RunManifest> {
    if args.dims.len() != args.views {
        return Err(Error::InvalidArgument(format!(
            "--dims lists {} sizes but --views is {}",
            args.dims.len(),
            args.views
        )));
    }
    let mut manifest = RunManifest::start("gen-data", args);
    let ds = generate_synthetic(&SyntheticSpec {
        n: args.n,
        k: args.k,
        view_dims: args.dims.clone(),
        cluster_sep: args.sep,
        noise_std: args.noise,
        seed: args.seed,
    })?;
    create_dir(out_dir)?;
    let ext = if args.binary { "bin" } else { "csv" };
    for (v, x) in ds.views().iter().enumerate() {
        let name = format!("view_{v}.{ext}");
        write_matrix(&out_dir.join(&name), x)?;
        manifest.add_artifact(name);
    }
    write_labels(&out_dir.join(LABELS_FILE), ds.labels())?;
    manifest.add_artifact(LABELS_FILE);
    manifest.finish(out_dir)
}

// ---------------------------------------------------------------- data input

/// Where a command reads its dataset from and how it is prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataArgs {
    pub data_dir: PathBuf,
    /// Alignment rate simulated on the loaded data.
    pub eta: f64,
    /// Seed of the alignment shuffle; the training seed when unset.
    pub alignment_seed: Option<u64>,
    pub zscore: bool,
}

impl DataArgs {
    pub fn new(data_dir: impl Into<PathBuf>, eta: f64) -> Self {
        Self {
            data_dir: data_dir.into(),
            eta,
            alignment_seed: None,
            zscore: true,
        }
    }
}

/// View files `view_<v>.{csv,bin}` in index order, plus `labels.txt`.
pub fn data_dir_files(dir: &Path) -> Result<(Vec<PathBuf>, PathBuf)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("");
        if let Some(idx) = stem.strip_prefix("view_").and_then(|s| s.parse::<usize>().ok()) {
            if ext == "csv" || ext == "bin" {
                views.push((idx, path));
            }
        }
    }
    views.sort();
    if views.iter().enumerate().any(|(i, (idx, _))| i != *idx) {
        return Err(Error::data(dir, None, "view files must be numbered 0, 1, ... without gaps or duplicates"));
    }
    let labels = dir.join(LABELS_FILE);
    Ok((views.into_iter().map(|(_, p)| p).collect(), labels))
}

/// Loads, normalizes and misaligns a dataset directory. Returns the
/// dataset and the files read.
pub fn prepare_data(args: &DataArgs, default_seed: u64) -> Result<(MultiViewDataset, Vec<PathBuf>)> {
    let (views, labels) = data_dir_files(&args.data_dir)?;
    let ds = load_dataset(&views, &labels, None)?;
    let ds = if args.zscore { zscore_views(&ds) } else { ds };
    let ds = apply_partial_alignment(&ds, args.eta, args.alignment_seed.unwrap_or(default_seed))?;
    let mut files = views;
    files.push(labels);
    Ok((ds, files))
}

// ---------------------------------------------------------------- train / evaluate

/// Contents of `metrics.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub inertia: f64,
    pub seed: u64,
    pub k: usize,
}

impl MetricsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path, None, e.to_string()))
    }
}

fn write_evaluation(out_dir: &Path, ev: &Evaluation, ds: &MultiViewDataset, manifest: &mut RunManifest) -> Result<MetricsFile> {
    let m = ev.metrics();
    let metrics = MetricsFile {
        acc: m.acc,
        nmi: m.nmi,
        ari: m.ari,
        inertia: ev.result.inertia,
        seed: ev.result.seed,
        k: ds.n_classes(),
    };
    write_json(&out_dir.join(METRICS_FILE), &metrics)?;
    manifest.add_artifact(METRICS_FILE);

    let mut meta = Vec::with_capacity(ev.graphs.len());
    for (i, g) in ev.graphs.iter().enumerate() {
        let view = i + 1;
        let name = if view == 1 {
            GRAPH_EDGES_FILE.to_string()
        } else {
            format!("graph_edges_view{view}.csv")
        };
        g.write_edges_csv(&out_dir.join(&name))?;
        manifest.add_artifact(name);
        meta.push(GraphMeta::new(view, g, Some(ev.purity[i])));
    }
    write_json(&out_dir.join(GRAPH_META_FILE), &meta)?;
    manifest.add_artifact(GRAPH_META_FILE);
    Ok(metrics)
}

/// Trains on the prepared dataset, evaluates, and writes every run artifact.
pub fn train_cmd(data: &DataArgs, cfg: &TrainConfig, out_dir: &Path) -> Result<MetricsFile> {
    cfg.validate()?;
    let mut manifest = RunManifest::start("train", serde_json::json!({ "data": data, "train": cfg }));
    let (ds, inputs) = prepare_data(data, cfg.seed)?;
    for f in &inputs {
        manifest.add_input(f)?;
    }
    create_dir(out_dir)?;
    std::fs::write(out_dir.join(CONFIG_ECHO_FILE), cfg.to_toml_string()).map_err(|e| Error::io(out_dir, e))?;
    manifest.add_artifact(CONFIG_ECHO_FILE);

    let (model, log) = trainer::train(&ds, cfg)?;
    log.write_csv(&out_dir.join(LOSS_LOG_FILE))?;
    manifest.add_artifact(LOSS_LOG_FILE);
    checkpoint::save(&out_dir.join(CHECKPOINT_FILE), &model, cfg)?;
    manifest.add_artifact(CHECKPOINT_FILE);

    let ev = trainer::evaluate(&model, &ds, cfg)?;
    let metrics = write_evaluation(out_dir, &ev, &ds, &mut manifest)?;
    manifest.finish(out_dir)?;
    Ok(metrics)
}

/// Re-evaluates a saved model. `seed` overrides the stored K-means and
/// alignment seed.
pub fn evaluate_cmd(data: &DataArgs, checkpoint_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<MetricsFile> {
    let (model, mut cfg) = checkpoint::load(checkpoint_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut manifest = RunManifest::start("evaluate", serde_json::json!({ "data": data, "train": cfg }));
    manifest.add_input(checkpoint_path)?;
    let (ds, inputs) = prepare_data(data, cfg.seed)?;
    for f in &inputs {
        manifest.add_input(f)?;
    }
    if ds.view_dims() != model.encoders.iter().map(|e| e.input_dim()).collect::<Vec<_>>() {
        return Err(Error::data(&data.data_dir, None, "view widths do not match the checkpoint"));
    }
    create_dir(out_dir)?;
    let ev = trainer::evaluate(&model, &ds, &cfg)?;
    let metrics = write_evaluation(out_dir, &ev, &ds, &mut manifest)?;
    manifest.finish(out_dir)?;
    Ok(metrics)
}

// ---------------------------------------------------------------- experiments

fn finish_table(
    name: &str,
    out_dir: &Path,
    runs: &[SeedRun],
    mut manifest: RunManifest,
) -> Result<Vec<SummaryRow>> {
    let summary = summarize(runs);
    let (csv, json) = (format!("{name}.csv"), format!("{name}.json"));
    write_summary(&out_dir.join(&csv), &out_dir.join(&json), &summary, runs)?;
    manifest.add_artifact(csv);
    manifest.add_artifact(json);
    manifest.finish(out_dir)?;
    Ok(summary)
}

pub fn ablate_cmd(data: &DataArgs, cfg: &TrainConfig, variants: &[Variant], seeds: &[u64], out_dir: &Path) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let mut manifest = RunManifest::start(
        "ablate",
        serde_json::json!({ "data": data, "train": cfg, "variants": variants, "seeds": seeds }),
    );
    let (ds, inputs) = prepare_data(data, cfg.seed)?;
    for f in &inputs {
        manifest.add_input(f)?;
    }
    create_dir(out_dir)?;
    let runs = trainer::run_ablation_suite(&ds, cfg, variants, seeds)?;
    finish_table("ablation", out_dir, &runs, manifest)
}

/// `data.eta` is ignored; each rate in `etas` is simulated per seed.
pub fn sweep_alignment_cmd(data: &DataArgs, cfg: &TrainConfig, etas: &[f64], seeds: &[u64], out_dir: &Path) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let mut manifest = RunManifest::start(
        "sweep-alignment",
        serde_json::json!({ "data": data, "train": cfg, "etas": etas, "seeds": seeds }),
    );
    let full = DataArgs { eta: 1.0, ..data.clone() };
    let (ds, inputs) = prepare_data(&full, cfg.seed)?;
    for f in &inputs {
        manifest.add_input(f)?;
    }
    create_dir(out_dir)?;
    let runs = trainer::sweep_alignment(&ds, cfg, etas, seeds)?;
    finish_table("sweep_alignment", out_dir, &runs, manifest)
}

/// Scores semantic-matching fusion against nearest-neighbor re-pairing.
/// With a checkpoint the saved model is used once; otherwise a model is
/// trained per seed.
pub fn compare_matching_cmd(
    data: &DataArgs,
    cfg: &TrainConfig,
    seeds: &[u64],
    checkpoint_path: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let mut manifest = RunManifest::start(
        "compare-matching",
        serde_json::json!({ "data": data, "train": cfg, "seeds": seeds, "checkpoint": checkpoint_path }),
    );
    let comparison = match checkpoint_path {
        Some(path) => {
            manifest.add_input(path)?;
            let (model, saved) = checkpoint::load(path)?;
            let cfg = TrainConfig { seed: cfg.seed, ..saved };
            let (ds, inputs) = prepare_data(data, cfg.seed)?;
            for f in &inputs {
                manifest.add_input(f)?;
            }
            let ev = trainer::evaluate(&model, &ds, &cfg)?;
            let fused = correspondence_fusion(&ev.features, ds.aligned_mask())?;
            let corr = trainer::cluster_and_score(&fused, &ds, &cfg)?;
            let run = |label: &str, metrics: Metrics| SeedRun {
                label: label.to_string(),
                eta: None,
                seed: cfg.seed,
                metrics,
                purity: ev.purity.clone(),
                loss_totals: Vec::new(),
            };
            MatchingComparison {
                semantic: vec![run(trainer::SEMANTIC_LABEL, ev.metrics())],
                correspondence: vec![run(trainer::CORRESPONDENCE_LABEL, corr.metrics.expect("scored"))],
            }
        }
        None => {
            let (ds, inputs) = prepare_data(data, cfg.seed)?;
            for f in &inputs {
                manifest.add_input(f)?;
            }
            trainer::compare_matching(&ds, cfg, seeds)?
        }
    };
    create_dir(out_dir)?;
    finish_table("compare_matching", out_dir, &comparison.runs(), manifest)
}

/// Runs the numerical self-test and, given a directory, writes
/// `selfcheck.json` plus the manifest there.
pub fn selfcheck_cmd(fault: Fault, seed: u64, out_dir: Option<&Path>) -> Result<SelfCheckReport> {
    let report = run_selfcheck(fault, seed)?;
    if let Some(dir) = out_dir {
        let mut manifest = RunManifest::start("selfcheck", serde_json::json!({ "seed": seed, "fault": fault }));
        create_dir(dir)?;
        write_json(&dir.join("selfcheck.json"), &report)?;
        manifest.add_artifact("selfcheck.json");
        manifest.finish(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(dir: &Path) {
        let args = GenDataArgs {
            n: 40,
            k: 2,
            views: 2,
            dims: vec![4, 3],
            sep: 5.0,
            noise: 0.1,
            seed: 7,
            binary: false,
        };
        gen_data(&args, dir).unwrap();
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            d: 3,
            hidden_dims: vec![6],
            epochs: 2,
            batch_size: 20,
            lr: 1e-3,
            kmeans_restarts: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn gen_data_rejects_dims_arity() {
        let dir = tempfile::tempdir().unwrap();
        let args = GenDataArgs {
            n: 10,
            k: 2,
            views: 2,
            dims: vec![3],
            sep: 1.0,
            noise: 0.0,
            seed: 0,
            binary: false,
        };
        let err = gen_data(&args, dir.path()).unwrap_err();
        assert_eq!(err.class(), crate::ErrorClass::Config);
    }

    #[test]
    fn train_then_evaluate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        gen(&data);
        let out = dir.path().join("run");
        let args = DataArgs::new(&data, 0.5);
        let m = train_cmd(&args, &small_cfg(), &out).unwrap();
        for f in [METRICS_FILE, LOSS_LOG_FILE, GRAPH_EDGES_FILE, GRAPH_META_FILE, CHECKPOINT_FILE, CONFIG_ECHO_FILE, MANIFEST_FILE] {
            assert!(out.join(f).exists(), "{f}");
        }
        assert_eq!(MetricsFile::load(&out.join(METRICS_FILE)).unwrap(), m);
        let manifest = RunManifest::load(&out).unwrap();
        assert_eq!(manifest.inputs.len(), 3);
        assert!(manifest.stale_inputs().unwrap().is_empty());

        let eval_dir = dir.path().join("eval");
        let again = evaluate_cmd(&args, &out.join(CHECKPOINT_FILE), None, &eval_dir).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn data_dir_needs_contiguous_views() {
        let dir = tempfile::tempdir().unwrap();
        gen(dir.path());
        std::fs::rename(dir.path().join("view_1.csv"), dir.path().join("view_2.csv")).unwrap();
        assert!(data_dir_files(dir.path()).is_err());
    }
}
