use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClusterResult;
use crate::error::{Error, Result};
use crate::{rng_from_seed, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }
}

struct Run {
    assignments: Vec<usize>,
    centers: Matrix,
    inertia: f64,
    trace: Vec<f64>,
    iterations: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Returns per-point distance to its nearest center and the total.
fn assign(h: &Matrix, centers: &Matrix, assignments: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, x) in h.rows().into_iter().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.rows().into_iter().enumerate() {
            let d = sq_dist(x, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        assignments[i] = best.0;
        dists[i] = best.1;
        total += best.1;
    }
    total
}

fn plus_plus_init(h: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = h.nrows();
    let mut centers = Array2::zeros((k, h.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&h.row(first));
    let mut d2: Vec<f64> = h.rows().into_iter().map(|x| sq_dist(x, h.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&h.row(pick));
        for (i, x) in h.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, h.row(pick)));
        }
    }
    centers
}

fn lloyd(h: &Matrix, params: &KMeansParams, restart: usize) -> Run {
    let mut rng = rng_from_seed(params.seed);
    rng.set_stream(restart as u64);
    let (n, dim) = h.dim();
    let k = params.k;
    let mut centers = plus_plus_init(h, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        trace.push(assign(h, &centers, &mut assignments, &mut dists));

        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sums.row_mut(a).scaled_add(1.0, &h.row(i));
            counts[a] += 1;
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                // reseed at the point currently worst served
                let far = dists
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b })
                    .0;
                let old = centers.row(c).to_owned();
                centers.row_mut(c).assign(&h.row(far));
                dists[far] = 0.0;
                shift = shift.max(sq_dist(old.view(), centers.row(c)).sqrt());
                continue;
            }
            let mean = sums.row(c).mapv(|s| s / counts[c] as f64);
            shift = shift.max(sq_dist(mean.view(), centers.row(c)).sqrt());
            centers.row_mut(c).assign(&mean);
        }
        if shift < params.tol {
            break;
        }
    }
    let inertia = assign(h, &centers, &mut assignments, &mut dists);
    trace.push(inertia);
    Run {
        assignments,
        centers,
        inertia,
        trace,
        iterations,
    }
}

/// K-means++ seeding followed by Lloyd iterations, best of `restarts` by
/// inertia. Restart `r` draws from stream `r` of the seeded generator, so
/// the result does not depend on how restarts are scheduled.
pub fn kmeans(h: &Matrix, params: &KMeansParams) -> Result<ClusterResult> {
    let n = h.nrows();
    if params.k == 0 || params.k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {} must lie in [1, {n}]",
            params.k
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let restarts = params.restarts.max(1);

    #[cfg(feature = "parallel")]
    let runs: Vec<Run> = {
        use rayon::prelude::*;
        (0..restarts).into_par_iter().map(|r| lloyd(h, params, r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Run> = (0..restarts).map(|r| lloyd(h, params, r)).collect();

    // first minimum wins ties
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart");
    Ok(ClusterResult {
        assignments: best.assignments,
        centers: best.centers,
        inertia: best.inertia,
        inertia_trace: best.trace,
        metrics: None,
        seed: params.seed,
        restarts,
        iterations: best.iterations,
    })
}
