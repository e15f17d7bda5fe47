//! WebAssembly bindings for the static demo page in `www/`.
//!
//! A [`Session`] holds one synthetic dataset and the model trained on it.
//! Every method returns a JSON string for the page to render.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pvclust::data::{apply_partial_alignment, generate_synthetic, zscore_views, MultiViewDataset, SyntheticSpec};
use pvclust::graph::{build_graph_blocked, graph_purity, SemanticGraph};
use pvclust::trainer::{cluster_and_score, correspondence_fusion, evaluate, train, Evaluation, Model, TrainConfig};
use pvclust::{Error, Result};

#[derive(Serialize)]
struct DatasetInfo {
    n: usize,
    k: usize,
    dims: Vec<usize>,
    aligned: usize,
}

#[derive(Serialize)]
struct Scores {
    acc: f64,
    nmi: f64,
    ari: f64,
}

#[derive(Serialize)]
struct TrainReport {
    losses: Vec<f64>,
    scores: Scores,
    threshold: f64,
    purity: f64,
}

#[derive(Serialize)]
struct GraphReport {
    threshold: f64,
    purity: f64,
    edges: usize,
    /// Side length of the heatmap.
    size: usize,
    /// Row-major mean edge weight per cell, rows and columns sorted by class.
    cells: Vec<f64>,
    /// Class boundaries in heatmap cells.
    boundaries: Vec<usize>,
}

#[derive(Serialize)]
struct CompareReport {
    semantic: Scores,
    correspondence: Scores,
}

struct Trained {
    model: Model,
    cfg: TrainConfig,
    eval: Evaluation,
}

#[wasm_bindgen]
#[derive(Default)]
pub struct Session {
    data: Option<MultiViewDataset>,
    trained: Option<Trained>,
}

fn scores(m: pvclust::cluster::Metrics) -> Scores {
    Scores {
        acc: m.acc,
        nmi: m.nmi,
        ari: m.ari,
    }
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("report serializes")
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

impl Session {
    fn dataset(&self) -> Result<&MultiViewDataset> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("generate a dataset first".into()))
    }

    fn trained(&self) -> Result<&Trained> {
        self.trained
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("train a model first".into()))
    }

    pub fn try_generate(&mut self, n: usize, k: usize, sep: f64, noise: f64, eta: f64, seed: u64) -> Result<String> {
        let spec = SyntheticSpec {
            n,
            k,
            view_dims: vec![20, 15],
            cluster_sep: sep,
            noise_std: noise,
            seed,
        };
        let ds = apply_partial_alignment(&zscore_views(&generate_synthetic(&spec)?), eta, seed)?;
        let info = DatasetInfo {
            n,
            k,
            dims: ds.view_dims(),
            aligned: ds.n_aligned(),
        };
        self.data = Some(ds);
        self.trained = None;
        Ok(to_json(&info))
    }

    pub fn try_train(&mut self, epochs: usize, lambda1: f64, lambda2: f64, tau: f64, seed: u64) -> Result<String> {
        let ds = self.dataset()?;
        let cfg = TrainConfig {
            epochs,
            lambda1,
            lambda2,
            tau,
            seed,
            batch_size: TrainConfig::small_synthetic().batch_size.min(ds.n_samples()),
            kmeans_restarts: 5,
            ..TrainConfig::small_synthetic()
        };
        let (model, log) = train(ds, &cfg)?;
        let eval = evaluate(&model, ds, &cfg)?;
        let report = TrainReport {
            losses: log.totals(),
            scores: scores(eval.metrics()),
            threshold: eval.graphs[0].threshold(),
            purity: eval.purity[0],
        };
        self.trained = Some(Trained { model, cfg, eval });
        Ok(to_json(&report))
    }

    pub fn try_graph(&self, threshold: f64, size: usize) -> Result<String> {
        let ds = self.dataset()?;
        let t = self.trained()?;
        let z = t.model.embed(ds.views())?;
        let g = build_graph_blocked(&z[0], &z[1], ds.aligned_mask(), threshold, t.cfg.graph_block_rows)?;
        let labels_b = ds.view_labels(1);
        let purity = graph_purity(&g, ds.labels(), &labels_b)?;
        let (cells, boundaries) = heatmap(&g, ds.labels(), &labels_b, size.max(1));
        Ok(to_json(&GraphReport {
            threshold,
            purity,
            edges: g.edge_count(),
            size: size.max(1),
            cells,
            boundaries,
        }))
    }

    pub fn try_compare(&self) -> Result<String> {
        let ds = self.dataset()?;
        let t = self.trained()?;
        let fused = correspondence_fusion(&t.eval.features, ds.aligned_mask())?;
        let corr = cluster_and_score(&fused, ds, &t.cfg)?;
        Ok(to_json(&CompareReport {
            semantic: scores(t.eval.metrics()),
            correspondence: scores(corr.metrics.expect("scored against labels")),
        }))
    }
}

/// Rank of every row when stably sorted by label.
fn class_order(labels: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.sort_by_key(|&i| labels[i]);
    let mut rank = vec![0; labels.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Averages edge weights into a `size x size` grid with rows sorted by
/// `labels_a` and columns by `labels_b`.
fn heatmap(g: &SemanticGraph, labels_a: &[usize], labels_b: &[usize], size: usize) -> (Vec<f64>, Vec<usize>) {
    let n = g.n();
    let (ra, rb) = (class_order(labels_a), class_order(labels_b));
    let cell = |rank: usize| rank * size / n.max(1);
    let mut sums = vec![0.0; size * size];
    for (i, k, w) in g.edges() {
        sums[cell(ra[i]) * size + cell(rb[k])] += w;
    }
    let per_cell = (n as f64 / size as f64).powi(2).max(1.0);
    let cells = sums.into_iter().map(|s| s / per_cell).collect();
    let mut sorted = labels_a.to_vec();
    sorted.sort_unstable();
    let boundaries = (1..n).filter(|&r| sorted[r] != sorted[r - 1]).map(cell).collect();
    (cells, boundaries)
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Session {
        Session::default()
    }

    /// Two-view synthetic data with dimensions 20 and 15.
    pub fn generate(&mut self, n: usize, k: usize, sep: f64, noise: f64, eta: f64, seed: u32) -> std::result::Result<String, JsError> {
        js(self.try_generate(n, k, sep, noise, eta, seed.into()))
    }

    /// Trains and evaluates; returns the loss curve and scores.
    pub fn train(&mut self, epochs: usize, lambda1: f64, lambda2: f64, tau: f64, seed: u32) -> std::result::Result<String, JsError> {
        js(self.try_train(epochs, lambda1, lambda2, tau, seed.into()))
    }

    /// Rebuilds the cross-view graph at `threshold` and summarizes it.
    pub fn graph(&self, threshold: f64, size: usize) -> std::result::Result<String, JsError> {
        js(self.try_graph(threshold, size))
    }

    /// Scores graph-matched fusion against nearest-neighbor re-pairing.
    pub fn compare(&self) -> std::result::Result<String, JsError> {
        js(self.try_compare())
    }
}
