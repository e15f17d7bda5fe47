//! Joint single-stage optimization of all networks, evaluation through
//! graph-guided fusion and K-means, and the experiment drivers built on
//! top of them.

mod config;
mod experiments;
mod model;

pub use config::{Ablation, GraphMode, TrainConfig};
pub use experiments::{
    compare_matching, correspondence_fusion, run_ablation_suite, summarize, sweep_alignment, write_summary,
    MatchingComparison, MetricSummary, SeedRun, SummaryRow, Variant, CORRESPONDENCE_LABEL, SEMANTIC_LABEL,
};
pub use model::Model;

use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, ClusterResult, KMeansParams};
use crate::data::{make_batches, MultiViewDataset};
use crate::error::{Error, Result};
use crate::graph::{build_graph, build_graph_blocked, fuse, graph_purity, FusedRepresentation, SemanticGraph};
use crate::losses::{loss_rec, loss_smc, loss_total, loss_vda_terms, LossBreakdown, VdaTerms};
use crate::nn::{AdamState, MlpGrads, RowNormalized};
use crate::stats::{cross_cov, paired_pearson, threshold_from_diag};
use crate::Matrix;

/// One row of the training log: epoch means of every loss term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub rec: f64,
    pub cfa: f64,
    pub cma: f64,
    pub vda: f64,
    pub smc: f64,
    pub total: f64,
    pub aligned_per_batch: f64,
    pub smc_skipped_rows: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    /// `(epoch, acc)` from intermediate evaluations, if requested.
    pub evaluations: Vec<(usize, f64)>,
}

impl TrainLog {
    pub fn totals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.total).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "epoch,rec,cfa,cma,vda,smc,total,aligned_per_batch,smc_skipped_rows,wall_time_s").map_err(io)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.epoch, r.rec, r.cfa, r.cma, r.vda, r.smc, r.total, r.aligned_per_batch, r.smc_skipped_rows, r.wall_time_s
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// View pairs coupled by the alignment and contrastive terms.
pub(crate) fn view_pairs(n_views: usize, all_pairs: bool) -> Vec<(usize, usize)> {
    if all_pairs {
        (0..n_views)
            .flat_map(|a| (a + 1..n_views).map(move |b| (a, b)))
            .collect()
    } else {
        (1..n_views).map(|v| (0, v)).collect()
    }
}

struct StepStats {
    breakdown: LossBreakdown,
    aligned: usize,
    skipped: usize,
}

/// Threshold memory carried across batches, one slot per view pair.
struct GraphState {
    last_threshold: Vec<Option<f64>>,
    /// Epoch-level graphs in [`GraphMode::Global`].
    global: Option<Vec<SemanticGraph>>,
}

fn aligned_threshold(za: &Matrix, zb: &Matrix, aligned_rows: &[usize]) -> Result<Option<f64>> {
    if aligned_rows.is_empty() {
        return Ok(None);
    }
    let a = za.select(Axis(0), aligned_rows);
    let b = zb.select(Axis(0), aligned_rows);
    Ok(Some(threshold_from_diag(&paired_pearson(&a, &b)?)?))
}

fn induced_subgraph(g: &SemanticGraph, batch: &[usize], aligned: &[bool]) -> Result<SemanticGraph> {
    let mut pos = vec![usize::MAX; g.n()];
    for (p, &i) in batch.iter().enumerate() {
        pos[i] = p;
    }
    let rows = batch
        .iter()
        .map(|&i| {
            g.rows()[i]
                .iter()
                .filter(|(k, _)| pos[*k] != usize::MAX)
                .map(|&(k, w)| (pos[k], w))
                .collect()
        })
        .collect();
    SemanticGraph::from_rows(rows, g.threshold(), aligned.to_vec())
}

fn add_rows(target: &mut Matrix, rows: &[usize], src: &Matrix, scale: f64) {
    for (r, &i) in rows.iter().enumerate() {
        target.row_mut(i).scaled_add(scale, &src.row(r));
    }
}

fn train_step(
    model: &mut Model,
    adam: &mut AdamState,
    ds: &MultiViewDataset,
    batch: &[usize],
    cfg: &TrainConfig,
    pairs: &[(usize, usize)],
    state: &mut GraphState,
) -> Result<StepStats> {
    let n_views = ds.n_views();
    let b = batch.len();
    let mask = ds.aligned_mask();
    let aligned: Vec<bool> = batch.iter().map(|&i| mask[i]).collect();
    let aligned_rows: Vec<usize> = (0..b).filter(|&p| aligned[p]).collect();
    let use_vda = !cfg.has(Ablation::NoVda) && cfg.lambda1 > 0.0;
    let use_smc = !cfg.has(Ablation::NoSmc) && cfg.lambda2 > 0.0;
    let npairs = pairs.len() as f64;

    // encode and reconstruct
    let xs: Vec<Matrix> = (0..n_views).map(|v| ds.view(v).select(Axis(0), batch)).collect();
    let mut zs = Vec::with_capacity(n_views);
    let mut xhats = Vec::with_capacity(n_views);
    for v in 0..n_views {
        let z = model.encoders[v].forward(&xs[v])?;
        xhats.push(model.decoders[v].forward(&z)?);
        zs.push(z);
    }
    let (rec_raw, rec_grads) = loss_rec(&xs, &xhats)?;
    let rec_scale = if cfg.rec_batch_scaling { 1.0 / b as f64 } else { 1.0 };

    let mut grad_z: Vec<Matrix> = zs.iter().map(|z| Array2::zeros(z.raw_dim())).collect();
    let mut dec_grads = Vec::with_capacity(n_views);
    for v in 0..n_views {
        let (g, gz) = model.decoders[v].backward(&(&rec_grads[v] * rec_scale))?;
        grad_z[v] += &gz;
        dec_grads.push(g);
    }

    // view distribution alignment on the batch's aligned rows
    let (mut cfa, mut cma) = (0.0, 0.0);
    let vda_active = use_vda && aligned_rows.len() >= 2;
    if vda_active {
        let terms = VdaTerms {
            cfa: !cfg.has(Ablation::NoCfa),
            cma: !cfg.has(Ablation::NoCma),
        };
        for &(a, bv) in pairs {
            let za = zs[a].select(Axis(0), &aligned_rows);
            let zb = zs[bv].select(Axis(0), &aligned_rows);
            let out = loss_vda_terms(&za, &zb, terms)?;
            cfa += out.cfa / npairs;
            cma += out.cma / npairs;
            add_rows(&mut grad_z[a], &aligned_rows, &out.grad_a, cfg.lambda1 / npairs);
            add_rows(&mut grad_z[bv], &aligned_rows, &out.grad_b, cfg.lambda1 / npairs);
        }
    }

    // semantic matching contrastive term through the shared projector
    let mut smc = 0.0;
    let mut skipped = 0;
    let mut proj_grads = MlpGrads::zeros_like(&model.projector);
    if use_smc {
        let stacked = concatenate(Axis(0), &zs.iter().map(|z| z.view()).collect::<Vec<_>>())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let h_raw = model.projector.forward(&stacked)?;
        let normed = RowNormalized::new(&h_raw);
        let hs: Vec<Matrix> = (0..n_views)
            .map(|v| normed.values.slice(s![v * b..(v + 1) * b, ..]).to_owned())
            .collect();
        let mut grad_h = Array2::<f64>::zeros(normed.values.raw_dim());

        for (p, &(a, bv)) in pairs.iter().enumerate() {
            let graph = if cfg.has(Ablation::NoGuidance) {
                SemanticGraph::identity(&aligned)
            } else if let Some(global) = &state.global {
                induced_subgraph(&global[p], batch, &aligned)?
            } else {
                let (src_a, src_b) = if cfg.has(Ablation::GraphOnProjection) {
                    (&hs[a], &hs[bv])
                } else {
                    (&zs[a], &zs[bv])
                };
                if let Some(t) = aligned_threshold(src_a, src_b, &aligned_rows)? {
                    state.last_threshold[p] = Some(t);
                }
                match state.last_threshold[p] {
                    Some(t) => build_graph(&cross_cov(src_a, src_b)?, &aligned, t)?,
                    None => SemanticGraph::identity(&aligned),
                }
            };
            let out = loss_smc(&hs[a], &hs[bv], &graph, &aligned, cfg.tau)?;
            smc += out.value / npairs;
            skipped += out.skipped_rows;
            let w = cfg.lambda2 / npairs;
            grad_h.slice_mut(s![a * b..(a + 1) * b, ..]).scaled_add(w, &out.grad_a);
            grad_h.slice_mut(s![bv * b..(bv + 1) * b, ..]).scaled_add(w, &out.grad_b);
        }
        let (g, g_stacked) = model.projector.backward(&normed.backward(&grad_h))?;
        proj_grads = g;
        for (v, gz) in grad_z.iter_mut().enumerate() {
            *gz += &g_stacked.slice(s![v * b..(v + 1) * b, ..]);
        }
    }

    let mut enc_grads = Vec::with_capacity(n_views);
    for v in 0..n_views {
        enc_grads.push(model.encoders[v].backward(&grad_z[v])?.0);
    }

    let breakdown = loss_total(
        rec_raw * rec_scale,
        cfa,
        cma,
        smc,
        if vda_active { cfg.lambda1 } else { 0.0 },
        if use_smc { cfg.lambda2 } else { 0.0 },
        cfg.tau,
    )?;
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite(format!("total loss {:?}", breakdown)));
    }

    let grads: Vec<&[f64]> = enc_grads
        .iter()
        .chain(&dec_grads)
        .chain(std::iter::once(&proj_grads))
        .flat_map(MlpGrads::slices)
        .collect();
    adam.step(&mut model.params_mut(), &grads)?;

    Ok(StepStats {
        breakdown,
        aligned: aligned_rows.len(),
        skipped,
    })
}

/// Builds the epoch-level graphs over all samples for [`GraphMode::Global`].
fn global_graphs(
    model: &Model,
    ds: &MultiViewDataset,
    cfg: &TrainConfig,
    pairs: &[(usize, usize)],
    state: &mut GraphState,
) -> Result<Vec<SemanticGraph>> {
    let zs = model.embed(ds.views())?;
    let src = if cfg.has(Ablation::GraphOnProjection) {
        model.project(&zs)?
    } else {
        zs
    };
    let aligned_rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.aligned_mask()[i]).collect();
    pairs
        .iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            if let Some(t) = aligned_threshold(&src[a], &src[b], &aligned_rows)? {
                state.last_threshold[p] = Some(t);
            }
            match state.last_threshold[p] {
                Some(t) => build_graph_blocked(&src[a], &src[b], ds.aligned_mask(), t, cfg.graph_block_rows),
                None => Ok(SemanticGraph::identity(ds.aligned_mask())),
            }
        })
        .collect()
}

/// Wall clock for the training log; browsers without a monotonic clock
/// report zero.
struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    fn start() -> Self {
        Clock(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Trains all networks jointly on `ds` (already normalized and, if
/// desired, partially misaligned). Deterministic given `cfg.seed`.
pub fn train(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    if cfg.batch_size > ds.n_samples() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds {} samples",
            cfg.batch_size,
            ds.n_samples()
        )));
    }
    let mut model = Model::new(&ds.view_dims(), cfg)?;
    let mut adam = AdamState::new(cfg.lr);
    let pairs = view_pairs(ds.n_views(), cfg.has(Ablation::AllPairsViews));
    let mut state = GraphState {
        last_threshold: vec![None; pairs.len()],
        global: None,
    };
    let mut log = TrainLog::default();
    let clock = Clock::start();
    let needs_global = cfg.graph_mode == GraphMode::Global
        && !cfg.has(Ablation::NoSmc)
        && !cfg.has(Ablation::NoGuidance)
        && cfg.lambda2 > 0.0;

    for epoch in 0..cfg.epochs {
        if needs_global {
            state.global = Some(global_graphs(&model, ds, cfg, &pairs, &mut state)?);
        }
        let plan = make_batches(ds.n_samples(), cfg.batch_size, epoch_seed(cfg.seed, epoch))?;
        let mut sum = LossBreakdown::default();
        let mut aligned = 0usize;
        let mut skipped = 0usize;
        let mut n_batches = 0usize;
        for batch in plan.batches() {
            // a trailing singleton batch carries no pairwise information
            if batch.len() < 2 {
                continue;
            }
            let stats = train_step(&mut model, &mut adam, ds, batch, cfg, &pairs, &mut state)
                .map_err(|e| match e {
                    Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}, batch {n_batches}: {m}")),
                    other => other,
                })?;
            let bd = stats.breakdown;
            sum.rec += bd.rec;
            sum.cfa += bd.cfa;
            sum.cma += bd.cma;
            sum.vda += bd.vda;
            sum.smc += bd.smc;
            sum.total += bd.total;
            aligned += stats.aligned;
            skipped += stats.skipped;
            n_batches += 1;
        }
        let nb = n_batches.max(1) as f64;
        log.rows.push(TrainLogRow {
            epoch,
            rec: sum.rec / nb,
            cfa: sum.cfa / nb,
            cma: sum.cma / nb,
            vda: sum.vda / nb,
            smc: sum.smc / nb,
            total: sum.total / nb,
            aligned_per_batch: aligned as f64 / nb,
            smc_skipped_rows: skipped,
            wall_time_s: clock.seconds(),
        });
        if cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 && epoch + 1 < cfg.epochs {
            model.last_thresholds = anchor_thresholds(&state, &pairs, ds.n_views());
            let ev = evaluate(&model, ds, cfg)?;
            log.evaluations.push((epoch, ev.metrics().acc));
        }
    }
    model.last_thresholds = anchor_thresholds(&state, &pairs, ds.n_views());
    Ok((model, log))
}

fn anchor_thresholds(state: &GraphState, pairs: &[(usize, usize)], n_views: usize) -> Vec<Option<f64>> {
    (1..n_views)
        .map(|v| {
            pairs
                .iter()
                .position(|&p| p == (0, v))
                .and_then(|p| state.last_threshold[p])
        })
        .collect()
}

pub(crate) fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64 + 1)
}

/// Result of evaluating a trained model on a dataset.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub result: ClusterResult,
    /// Graph from the anchor view to each view `v >= 1`.
    pub graphs: Vec<SemanticGraph>,
    pub purity: Vec<f64>,
    pub fused: FusedRepresentation,
    /// Row-normalized projected features per view.
    pub features: Vec<Matrix>,
}

impl Evaluation {
    pub fn metrics(&self) -> crate::cluster::Metrics {
        self.result.metrics.expect("evaluation always scores")
    }
}

/// Anchor-to-view graphs over the full dataset, thresholded with every
/// aligned sample.
pub fn full_graphs(model: &Model, ds: &MultiViewDataset, cfg: &TrainConfig, latents: &[Matrix], features: &[Matrix]) -> Result<Vec<SemanticGraph>> {
    let src = if cfg.has(Ablation::GraphOnProjection) {
        features
    } else {
        latents
    };
    let aligned_rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.aligned_mask()[i]).collect();
    (1..ds.n_views())
        .map(|v| {
            let t = match aligned_threshold(&src[0], &src[v], &aligned_rows)? {
                Some(t) => t,
                None => model.last_thresholds.get(v - 1).copied().flatten().unwrap_or(1.0),
            };
            build_graph_blocked(&src[0], &src[v], ds.aligned_mask(), t, cfg.graph_block_rows)
        })
        .collect()
}

/// Full-dataset forward pass, graph construction, fusion, K-means and
/// scoring against the anchor-view labels.
pub fn evaluate(model: &Model, ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<Evaluation> {
    let latents = model.embed(ds.views())?;
    let features = model.project(&latents)?;
    let graphs = full_graphs(model, ds, cfg, &latents, &features)?;
    let fused = fuse(&features, &graphs)?;
    let result = cluster_and_score(&fused.values, ds, cfg)?;
    let purity = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| graph_purity(g, ds.labels(), &ds.view_labels(i + 1)))
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        result,
        graphs,
        purity,
        fused,
        features,
    })
}

/// K-means with one cluster per class, scored against the anchor labels.
pub fn cluster_and_score(h: &Matrix, ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<ClusterResult> {
    let params = KMeansParams {
        k: ds.n_classes(),
        restarts: cfg.kmeans_restarts,
        max_iter: cfg.kmeans_max_iter,
        tol: cfg.kmeans_tol,
        seed: cfg.seed,
    };
    let mut result = kmeans(h, &params)?;
    result.score(ds.labels())?;
    Ok(result)
}
