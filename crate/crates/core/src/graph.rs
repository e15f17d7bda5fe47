//! Cross-view semantic guidance graph and matched-feature fusion.
//!
//! Edge rule, for anchor row `i` and other-view row `j`:
//! weight 1 if `i == j` and the pair is aligned; otherwise `C_ij` if
//! `C_ij > T`; otherwise no edge.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{CovMatrix, Standardized};
use crate::Matrix;

/// Sparse weighted graph from anchor-view rows to rows of another view.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    rows: Vec<Vec<(usize, f64)>>,
    threshold: f64,
    aligned: Vec<bool>,
}

impl SemanticGraph {
    /// Checks every structural invariant.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, threshold: f64, aligned: Vec<bool>) -> Result<Self> {
        let n = rows.len();
        if aligned.len() != n {
            return Err(Error::Shape(format!("{n} graph rows but {} alignment flags", aligned.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            for &(k, w) in row {
                if k >= n {
                    return Err(Error::InvalidArgument(format!("edge ({i}, {k}) out of range")));
                }
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::InvalidArgument(format!("edge ({i}, {k}) has weight {w}")));
                }
                let aligned_diag = k == i && aligned[i];
                if aligned_diag && w != 1.0 {
                    return Err(Error::InvalidArgument(format!("aligned pair {i} must have weight 1")));
                }
                if !aligned_diag && w <= threshold {
                    return Err(Error::InvalidArgument(format!(
                        "edge ({i}, {k}) weight {w} not above threshold {threshold}"
                    )));
                }
            }
            if aligned[i] && !row.iter().any(|&(k, _)| k == i) {
                return Err(Error::InvalidArgument(format!("aligned pair {i} missing from graph")));
            }
        }
        Ok(Self {
            rows,
            threshold,
            aligned,
        })
    }

    /// Only the aligned diagonal. Threshold is recorded as 1.
    pub fn identity(aligned: &[bool]) -> Self {
        let rows = aligned
            .iter()
            .enumerate()
            .map(|(i, &a)| if a { vec![(i, 1.0)] } else { Vec::new() })
            .collect();
        Self {
            rows,
            threshold: 1.0,
            aligned: aligned.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn aligned(&self) -> &[bool] {
        &self.aligned
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(k, w)| (i, k, w)))
    }

    /// Writes `i,k,weight` triples with a header line.
    pub fn write_edges_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "i,k,weight").map_err(io)?;
        for (i, k, w) in self.edges() {
            writeln!(out, "{i},{k},{w}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

fn apply_rule(i: usize, row: impl Iterator<Item = f64>, aligned: &[bool], threshold: f64) -> Vec<(usize, f64)> {
    row.enumerate()
        .filter_map(|(j, c)| {
            if i == j && aligned[i] {
                Some((j, 1.0))
            } else if c > threshold {
                // rounding can push a correlation a hair above 1
                Some((j, c.min(1.0)))
            } else {
                None
            }
        })
        .collect()
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(())
}

/// Applies the edge rule to a dense cross-view covariance matrix.
pub fn build_graph(cross: &CovMatrix, aligned: &[bool], threshold: f64) -> Result<SemanticGraph> {
    let (r, c) = cross.values.dim();
    if r != c || aligned.len() != r {
        return Err(Error::Shape(format!(
            "graph needs a square matrix matching {} flags, got {r}x{c}",
            aligned.len()
        )));
    }
    check_threshold(threshold)?;
    let rows = cross
        .values
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| apply_rule(i, row.iter().copied(), aligned, threshold))
        .collect();
    Ok(SemanticGraph {
        rows,
        threshold,
        aligned: aligned.to_vec(),
    })
}

/// Builds the graph straight from the two latent matrices, computing the
/// covariance `block_rows` anchor rows at a time so that memory stays
/// proportional to the number of stored edges.
pub fn build_graph_blocked(
    za: &Matrix,
    zb: &Matrix,
    aligned: &[bool],
    threshold: f64,
    block_rows: usize,
) -> Result<SemanticGraph> {
    if za.dim() != zb.dim() || aligned.len() != za.nrows() {
        return Err(Error::Shape(format!(
            "graph inputs {:?} and {:?} with {} flags",
            za.dim(),
            zb.dim(),
            aligned.len()
        )));
    }
    check_threshold(threshold)?;
    let block_rows = block_rows.max(1);
    let sa = Standardized::new(za)?;
    let sb = Standardized::new(zb)?;
    let sbt = sb.values.t();
    let scale = 1.0 / (za.ncols() - 1) as f64;
    let n = za.nrows();
    let starts: Vec<usize> = (0..n).step_by(block_rows).collect();

    let build_block = |&start: &usize| -> Vec<Vec<(usize, f64)>> {
        let end = (start + block_rows).min(n);
        let block = sa.values.slice(s![start..end, ..]).dot(&sbt) * scale;
        block
            .rows()
            .into_iter()
            .enumerate()
            .map(|(r, row)| apply_rule(start + r, row.iter().copied(), aligned, threshold))
            .collect()
    };

    #[cfg(feature = "parallel")]
    let blocks: Vec<Vec<Vec<(usize, f64)>>> = {
        use rayon::prelude::*;
        starts.par_iter().map(build_block).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let blocks: Vec<Vec<Vec<(usize, f64)>>> = starts.iter().map(build_block).collect();

    Ok(SemanticGraph {
        rows: blocks.into_iter().flatten().collect(),
        threshold,
        aligned: aligned.to_vec(),
    })
}

/// `sum_k w_ik h_k` over the stored row `i`; zero when the row is empty.
pub fn matched_representation(g: &SemanticGraph, hb: &Matrix, i: usize) -> Result<Array1<f64>> {
    if i >= g.n() {
        return Err(Error::InvalidArgument(format!("row {i} out of range for {} rows", g.n())));
    }
    if hb.nrows() != g.n() {
        return Err(Error::Shape(format!("graph over {} rows, features over {}", g.n(), hb.nrows())));
    }
    let mut out = Array1::zeros(hb.ncols());
    for &(k, w) in &g.rows[i] {
        out.scaled_add(w, &hb.row(k));
    }
    Ok(out)
}

/// Concatenation of the anchor view with the normalized matched
/// representation of every other view.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedRepresentation {
    /// `N x (V d)`
    pub values: Matrix,
    /// `fallback[v - 1][i]` is set when view `v` contributed a zero block
    /// for sample `i`.
    pub fallback: Vec<Vec<bool>>,
}

impl FusedRepresentation {
    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().flatten().filter(|&&f| f).count()
    }
}

pub fn fuse(hs: &[Matrix], graphs: &[SemanticGraph]) -> Result<FusedRepresentation> {
    if hs.is_empty() || graphs.len() + 1 != hs.len() {
        return Err(Error::Shape(format!(
            "{} views need {} graphs, got {}",
            hs.len(),
            hs.len().saturating_sub(1),
            graphs.len()
        )));
    }
    let (n, d) = hs[0].dim();
    if hs.iter().any(|h| h.dim() != (n, d)) || graphs.iter().any(|g| g.n() != n) {
        return Err(Error::Shape("fusion inputs disagree in shape".into()));
    }
    let mut values = Array2::zeros((n, d * hs.len()));
    values.slice_mut(s![.., 0..d]).assign(&hs[0]);
    let mut fallback = Vec::with_capacity(graphs.len());
    for (v, (h, g)) in hs[1..].iter().zip(graphs).enumerate() {
        let mut flags = vec![false; n];
        let col = (v + 1) * d;
        for (i, flag) in flags.iter_mut().enumerate() {
            let m = matched_representation(g, h, i)?;
            let norm = m.dot(&m).sqrt();
            if norm < 1e-12 {
                *flag = true;
            } else {
                values.slice_mut(s![i, col..col + d]).assign(&(m / norm));
            }
        }
        fallback.push(flags);
    }
    Ok(FusedRepresentation { values, fallback })
}

/// Weight-weighted fraction of stored edges joining same-class rows. An
/// edgeless graph scores 1.
pub fn graph_purity(g: &SemanticGraph, labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != g.n() || labels_b.len() != g.n() {
        return Err(Error::Shape(format!(
            "graph over {} rows, labels of length {} and {}",
            g.n(),
            labels_a.len(),
            labels_b.len()
        )));
    }
    let (mut same, mut total) = (0.0, 0.0);
    for (i, k, w) in g.edges() {
        total += w;
        if labels_a[i] == labels_b[k] {
            same += w;
        }
    }
    Ok(if total > 0.0 { same / total } else { 1.0 })
}

/// Summary written next to the edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub view: usize,
    pub threshold: f64,
    pub edge_count: usize,
    pub off_diagonal_edges: usize,
    pub purity: Option<f64>,
}

impl GraphMeta {
    pub fn new(view: usize, g: &SemanticGraph, purity: Option<f64>) -> Self {
        Self {
            view,
            threshold: g.threshold(),
            edge_count: g.edge_count(),
            off_diagonal_edges: g.edges().filter(|(i, k, _)| i != k).count(),
            purity,
        }
    }
}
