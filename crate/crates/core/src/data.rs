//! Multi-view datasets: construction, synthetic generation, alignment
//! simulation, normalization and mini-batch planning.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{io, rng_from_seed, Matrix};

/// `V` feature matrices over the same `N` samples, with ground-truth labels
/// and a record of which rows are still aligned across views.
///
/// Labels are attached to the rows of view 0 (the anchor view). For view `v`,
/// row `i` holds the features of original sample `permutations[v][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    labels: Vec<usize>,
    n_classes: usize,
    aligned_mask: Vec<bool>,
    permutations: Vec<Vec<usize>>,
}

impl MultiViewDataset {
    /// Builds a fully aligned dataset. `n_classes` defaults to `max(label) + 1`.
    pub fn new(views: Vec<Matrix>, labels: Vec<usize>, n_classes: Option<usize>) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 views, got {}",
                views.len()
            )));
        }
        let n = labels.len();
        for (v, x) in views.iter().enumerate() {
            if x.nrows() != n {
                return Err(Error::Shape(format!(
                    "view {v} has {} rows but there are {n} labels",
                    x.nrows()
                )));
            }
            if x.ncols() == 0 {
                return Err(Error::Shape(format!("view {v} has no feature columns")));
            }
        }
        let observed = labels.iter().max().map_or(0, |&m| m + 1);
        let n_classes = match n_classes {
            Some(k) if observed > k => {
                return Err(Error::InvalidArgument(format!(
                    "label {} out of range for {k} classes",
                    observed - 1
                )))
            }
            Some(k) => k,
            None => observed,
        };
        let identity: Vec<usize> = (0..n).collect();
        Ok(Self {
            permutations: vec![identity; views.len()],
            aligned_mask: vec![true; n],
            views,
            labels,
            n_classes,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.ncols()).collect()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Matrix {
        &self.views[v]
    }

    /// Ground-truth labels of the anchor-view rows.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Ground-truth label of every row of view `v`, after any shuffling.
    pub fn view_labels(&self, v: usize) -> Vec<usize> {
        self.permutations[v].iter().map(|&src| self.labels[src]).collect()
    }

    pub fn aligned_mask(&self) -> &[bool] {
        &self.aligned_mask
    }

    pub fn n_aligned(&self) -> usize {
        self.aligned_mask.iter().filter(|&&a| a).count()
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.permutations
    }

    pub fn is_fully_aligned(&self) -> bool {
        self.aligned_mask.iter().all(|&a| a)
    }
}

/// Reads one matrix file per view plus a label file. The result is fully
/// aligned.
pub fn load_dataset<P: AsRef<Path>>(
    view_paths: &[P],
    label_path: impl AsRef<Path>,
    n_classes: Option<usize>,
) -> Result<MultiViewDataset> {
    let label_path = label_path.as_ref();
    let labels = io::read_labels(label_path)?;
    let mut views = Vec::with_capacity(view_paths.len());
    for p in view_paths {
        let p = p.as_ref();
        let m = io::read_matrix(p)?;
        if m.nrows() != labels.len() {
            return Err(Error::data(
                p,
                Some(m.nrows().min(labels.len())),
                format!(
                    "row-count mismatch: {} rows in view file, {} labels",
                    m.nrows(),
                    labels.len()
                ),
            ));
        }
        views.push(m);
    }
    if let Some(k) = n_classes {
        if let Some((row, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::data(
                label_path,
                Some(row),
                format!("label {l} out of range for {k} classes"),
            ));
        }
    }
    MultiViewDataset::new(views, labels, n_classes)
}

/// Parameters of the synthetic Gaussian-cluster generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub k: usize,
    pub view_dims: Vec<usize>,
    pub cluster_sep: f64,
    pub noise_std: f64,
    pub seed: u64,
}

/// Generates `n` samples in `k` balanced clusters observed through
/// `view_dims.len()` heterogeneous views.
///
/// Cluster centers live in a latent space of dimension `L = max(view_dims)`
/// with coordinates of variance `sep^2 / L`, so a center has RMS norm `sep`
/// and two centers lie about `sep * sqrt(2)` apart. Samples scatter around
/// their center with variance `1 / L` per coordinate (unit RMS radius).
/// View `v` observes `tanh(z W_v) + noise`, with an independent random
/// `W_v` per view.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    Ok(generate_synthetic_detailed(spec)?.dataset)
}

/// Generator output together with the hidden latent sample and centers.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: MultiViewDataset,
    /// `N x L` latent points before the per-view maps.
    pub latent: Matrix,
    /// `K x L` cluster centers.
    pub centers: Matrix,
}

/// [`generate_synthetic`] that also returns the latent points and centers.
pub fn generate_synthetic_detailed(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let SyntheticSpec {
        n,
        k,
        ref view_dims,
        cluster_sep,
        noise_std,
        seed,
    } = *spec;
    if k < 2 || n < k {
        return Err(Error::InvalidArgument(format!(
            "need n >= k >= 2 (n={n}, k={k})"
        )));
    }
    if view_dims.len() < 2 || view_dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "need at least 2 views, each with a positive dimension".into(),
        ));
    }
    if !(cluster_sep > 0.0) || !cluster_sep.is_finite() {
        return Err(Error::InvalidArgument("cluster_sep must be > 0".into()));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
    }

    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let latent_dim = *view_dims.iter().max().expect("non-empty");
    let center_scale = cluster_sep / (latent_dim as f64).sqrt();
    let spread = 1.0 / (latent_dim as f64).sqrt();

    let centers = Array2::from_shape_fn((k, latent_dim), |_| {
        center_scale * std_normal.sample(&mut rng)
    });

    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);

    let latent = Array2::from_shape_fn((n, latent_dim), |(i, j)| {
        centers[[labels[i], j]] + spread * std_normal.sample(&mut rng)
    });

    let weight_scale = 1.0 / (latent_dim as f64).sqrt();
    let mut views = Vec::with_capacity(view_dims.len());
    for &dv in view_dims {
        let w = Array2::from_shape_fn((latent_dim, dv), |_| {
            weight_scale * std_normal.sample(&mut rng)
        });
        let mut x = latent.dot(&w);
        x.mapv_inplace(f64::tanh);
        if noise_std > 0.0 {
            x.mapv_inplace(|val| val + noise_std * std_normal.sample(&mut rng));
        }
        views.push(x);
    }
    Ok(SyntheticData {
        dataset: MultiViewDataset::new(views, labels, Some(k))?,
        latent,
        centers,
    })
}

/// Simulates partial alignment: keeps `floor(eta * N)` uniformly chosen
/// samples aligned and shuffles the remaining rows of every view except the
/// anchor view 0 with an independent uniform permutation.
pub fn apply_partial_alignment(
    ds: &MultiViewDataset,
    eta: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alignment rate must lie in (0, 1], got {eta}"
        )));
    }
    if !ds.is_fully_aligned() {
        return Err(Error::InvalidArgument(
            "partial alignment must be applied to a fully aligned dataset".into(),
        ));
    }
    let n = ds.n_samples();
    let n_aligned = ((eta * n as f64) + 1e-9).floor() as usize;
    let n_aligned = n_aligned.min(n);

    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut aligned_mask = vec![false; n];
    for &i in &order[..n_aligned] {
        aligned_mask[i] = true;
    }
    let unaligned: Vec<usize> = (0..n).filter(|&i| !aligned_mask[i]).collect();

    let mut out = ds.clone();
    out.aligned_mask = aligned_mask;
    for v in 1..ds.n_views() {
        let mut shuffled = unaligned.clone();
        shuffled.shuffle(&mut rng);
        let perm = &mut out.permutations[v];
        let src_view = ds.view(v);
        let dst_view = &mut out.views[v];
        for (&dst, &src) in unaligned.iter().zip(&shuffled) {
            perm[dst] = src;
            dst_view.row_mut(dst).assign(&src_view.row(src));
        }
    }
    Ok(out)
}

/// Standardizes every column of every view to mean 0 and sample standard
/// deviation 1. Columns whose standard deviation is below `1e-12` become 0.
pub fn zscore_views(ds: &MultiViewDataset) -> MultiViewDataset {
    let mut out = ds.clone();
    for x in &mut out.views {
        zscore_columns(x);
    }
    out
}

pub(crate) fn zscore_columns(x: &mut Matrix) {
    let n = x.nrows();
    for mut col in x.axis_iter_mut(Axis(1)) {
        if n < 2 {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|&c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if std < 1e-12 {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|c| (c - mean) / std);
        }
    }
}

/// A shuffled epoch order cut into contiguous mini-batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchIndexPlan {
    pub epoch_order: Vec<usize>,
    pub batch_size: usize,
}

impl BatchIndexPlan {
    pub fn batches(&self) -> impl Iterator<Item = &[usize]> {
        self.epoch_order.chunks(self.batch_size)
    }

    pub fn n_batches(&self) -> usize {
        self.epoch_order.len().div_ceil(self.batch_size)
    }
}

pub fn make_batches(n: usize, batch_size: usize, seed: u64) -> Result<BatchIndexPlan> {
    if batch_size < 1 || batch_size > n {
        return Err(Error::InvalidArgument(format!(
            "batch size must lie in [1, {n}], got {batch_size}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    Ok(BatchIndexPlan {
        epoch_order: order,
        batch_size,
    })
}
