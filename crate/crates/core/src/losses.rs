//! Loss terms and their gradients w.r.t. the matrices they consume.
//!
//! - reconstruction: squared Frobenius error per view, summed
//! - cross-view feature alignment (cfa): aligned pairs should correlate at 1
//! - covariance matching alignment (cma): intra-view correlation structures
//!   of the aligned samples should agree across views
//! - semantic matching contrastive (smc): InfoNCE whose numerator also
//!   credits graph neighbors with their edge weight

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::nn::RowNormalized;
use crate::stats::{CovMatrix, CrossCov};
use crate::Matrix;

fn same_shape(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// `sum_v |X_v - Xhat_v|_F^2`, gradient `2 (Xhat_v - X_v)` w.r.t. each `Xhat_v`.
pub fn loss_rec(x: &[Matrix], xhat: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    if x.len() != xhat.len() {
        return Err(Error::Shape(format!(
            "reconstruction: {} views vs {} reconstructions",
            x.len(),
            xhat.len()
        )));
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(x.len());
    for (xv, hv) in x.iter().zip(xhat) {
        same_shape(xv, hv, "reconstruction")?;
        let r = hv - xv;
        total += r.iter().map(|v| v * v).sum::<f64>();
        grads.push(r * 2.0);
    }
    Ok((total, grads))
}

/// `(1/N_a) sum_i (C_ii - 1)^2` over a square cross-view matrix.
pub fn loss_cfa(cross: &CovMatrix) -> Result<(f64, Matrix)> {
    let (r, c) = cross.values.dim();
    if r != c || r == 0 {
        return Err(Error::Shape(format!("cfa needs a non-empty square matrix, got {r}x{c}")));
    }
    let n = r as f64;
    let mut grad = Array2::zeros((r, c));
    let mut value = 0.0;
    for i in 0..r {
        let e = cross.values[[i, i]] - 1.0;
        value += e * e;
        grad[[i, i]] = 2.0 * e / n;
    }
    Ok((value / n, grad))
}

/// `(1/N_a) |C_a - C_b|_F^2`; returns gradients w.r.t. both matrices.
pub fn loss_cma(ca: &CovMatrix, cb: &CovMatrix) -> Result<(f64, Matrix, Matrix)> {
    same_shape(&ca.values, &cb.values, "cma")?;
    let (r, c) = ca.values.dim();
    if r != c || r == 0 {
        return Err(Error::Shape(format!("cma needs non-empty square matrices, got {r}x{c}")));
    }
    let n = r as f64;
    let diff = &ca.values - &cb.values;
    let value = diff.iter().map(|v| v * v).sum::<f64>() / n;
    let ga = &diff * (2.0 / n);
    let gb = -&ga;
    Ok((value, ga, gb))
}

/// Which parts of the view distribution alignment loss are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VdaTerms {
    pub cfa: bool,
    pub cma: bool,
}

impl Default for VdaTerms {
    fn default() -> Self {
        Self { cfa: true, cma: true }
    }
}

#[derive(Debug, Clone)]
pub struct VdaOutput {
    pub cfa: f64,
    pub cma: f64,
    pub grad_a: Matrix,
    pub grad_b: Matrix,
}

impl VdaOutput {
    pub fn value(&self) -> f64 {
        self.cfa + self.cma
    }
}

/// View distribution alignment `cfa(C^ab) + cma(C^a, C^b)` on the aligned
/// latent rows of two views, with gradients chained through the
/// standardization into both inputs.
pub fn loss_vda(za: &Matrix, zb: &Matrix) -> Result<VdaOutput> {
    loss_vda_terms(za, zb, VdaTerms::default())
}

pub fn loss_vda_terms(za: &Matrix, zb: &Matrix, terms: VdaTerms) -> Result<VdaOutput> {
    same_shape(za, zb, "vda")?;
    if za.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "vda needs at least 2 aligned samples, got {}",
            za.nrows()
        )));
    }
    let mut grad_a = Array2::zeros(za.raw_dim());
    let mut grad_b = Array2::zeros(zb.raw_dim());
    let mut cfa = 0.0;
    let mut cma = 0.0;
    if terms.cfa {
        let cross = CrossCov::new(za, zb)?;
        let (v, g) = loss_cfa(&cross.cov)?;
        let (ga, gb) = cross.backward(&g);
        cfa = v;
        grad_a += &ga;
        grad_b += &gb;
    }
    if terms.cma {
        let ia = CrossCov::intra(za)?;
        let ib = CrossCov::intra(zb)?;
        let (v, gca, gcb) = loss_cma(&ia.cov, &ib.cov)?;
        cma = v;
        grad_a += &ia.backward_intra(&gca);
        grad_b += &ib.backward_intra(&gcb);
    }
    Ok(VdaOutput {
        cfa,
        cma,
        grad_a,
        grad_b,
    })
}

#[derive(Debug, Clone)]
pub struct SmcOutput {
    pub value: f64,
    pub grad_a: Matrix,
    pub grad_b: Matrix,
    /// Rows with an empty numerator (unaligned, no neighbors); excluded from
    /// the average.
    pub skipped_rows: usize,
}

/// Graph-weighted contrastive loss between anchor rows `ha` and rows `hb`.
///
/// For row `i`, the numerator is `1[i aligned] e^{s_ii/tau}` plus
/// `w_ik e^{s_ik/tau}` for every stored graph neighbor `k` (the aligned
/// diagonal is counted once); the denominator sums `e^{s_ij/tau}` over all
/// `j`. `s` is cosine similarity, computed explicitly, with zero rows
/// giving similarity 0.
pub fn loss_smc(
    ha: &Matrix,
    hb: &Matrix,
    omega: &SemanticGraph,
    aligned: &[bool],
    tau: f64,
) -> Result<SmcOutput> {
    same_shape(ha, hb, "smc")?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {tau}")));
    }
    let n = ha.nrows();
    if omega.n() != n || aligned.len() != n {
        return Err(Error::Shape(format!(
            "smc: {n} rows but graph over {} and {} alignment flags",
            omega.n(),
            aligned.len()
        )));
    }
    for (i, row) in omega.rows().iter().enumerate() {
        if let Some(&(k, _)) = row.iter().find(|(k, _)| *k >= n) {
            return Err(Error::InvalidArgument(format!(
                "graph entry ({i}, {k}) out of range for {n} rows"
            )));
        }
    }

    let na = RowNormalized::new(ha);
    let nb = RowNormalized::new(hb);
    let sim = na.values.dot(&nb.values.t());

    // dL/ds, before the 1/n_used factor
    let mut grad_s = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    let mut used = 0usize;
    let mut numer_w = vec![0.0; n];
    for i in 0..n {
        numer_w.iter_mut().for_each(|w| *w = 0.0);
        if aligned[i] {
            numer_w[i] = 1.0;
        }
        for &(k, w) in &omega.rows()[i] {
            if k == i && aligned[i] {
                continue;
            }
            numer_w[k] += w;
        }
        if numer_w.iter().all(|&w| w <= 0.0) {
            continue;
        }
        used += 1;

        let logits = sim.row(i).mapv(|s| s / tau);
        let max = logits.fold(f64::NEG_INFINITY, |m, &l| m.max(l));
        let exps = logits.mapv(|l| (l - max).exp());
        let denom: f64 = exps.sum();
        let numer: f64 = exps.iter().zip(&numer_w).map(|(e, w)| e * w).sum();
        total += denom.ln() - numer.ln();

        let mut gi = grad_s.row_mut(i);
        for j in 0..n {
            gi[j] = (exps[j] / denom - numer_w[j] * exps[j] / numer) / tau;
        }
    }

    if used == 0 {
        return Ok(SmcOutput {
            value: 0.0,
            grad_a: Array2::zeros(ha.raw_dim()),
            grad_b: Array2::zeros(hb.raw_dim()),
            skipped_rows: n,
        });
    }
    grad_s /= used as f64;
    let gna = grad_s.dot(&nb.values);
    let gnb = grad_s.t().dot(&na.values);
    Ok(SmcOutput {
        value: total / used as f64,
        grad_a: na.backward(&gna),
        grad_b: nb.backward(&gnb),
        skipped_rows: n - used,
    })
}

/// Per-term losses and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rec: f64,
    pub cfa: f64,
    pub cma: f64,
    pub vda: f64,
    pub smc: f64,
    pub total: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
}

/// `rec + lambda1 (cfa + cma) + lambda2 smc`.
pub fn loss_total(
    rec: f64,
    cfa: f64,
    cma: f64,
    smc: f64,
    lambda1: f64,
    lambda2: f64,
    tau: f64,
) -> Result<LossBreakdown> {
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "loss weights must be >= 0, got {lambda1} and {lambda2}"
        )));
    }
    let vda = cfa + cma;
    Ok(LossBreakdown {
        rec,
        cfa,
        cma,
        vda,
        smc,
        total: rec + lambda1 * vda + lambda2 * smc,
        lambda1,
        lambda2,
        tau,
    })
}
