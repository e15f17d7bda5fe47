use std::collections::BTreeMap;

use ndarray::Array2;

use super::hungarian;
use crate::error::{Error, Result};
use crate::Matrix;

fn dense_codes(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    // sorted order keeps codes independent of first appearance
    let sorted: BTreeMap<usize, usize> = map.keys().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| sorted[l]).collect(), sorted.len())
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction has {} labels, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Counts `table[p][t]` over densely re-coded labels.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<Matrix> {
    check_lengths(pred, truth)?;
    let (p, kp) = dense_codes(pred);
    let (t, kt) = dense_codes(truth);
    let mut table = Array2::zeros((kp, kt));
    for (&a, &b) in p.iter().zip(&t) {
        table[[a, b]] += 1.0;
    }
    Ok(table)
}

/// Accuracy under the best one-to-one mapping of predicted clusters to
/// classes.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let k = table.nrows().max(table.ncols());
    let mut cost = Array2::zeros((k, k));
    for ((i, j), &c) in table.indexed_iter() {
        cost[[i, j]] = -c;
    }
    let assignment = hungarian(&cost)?;
    let correct: f64 = assignment.iter().enumerate().map(|(i, &j)| -cost[[i, j]]).sum();
    Ok(correct / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the two label
/// entropies.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let rows: Vec<f64> = table.rows().into_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = table.columns().into_iter().map(|c| c.sum()).collect();
    let hp = entropy(rows.iter().copied(), n);
    let ht = entropy(cols.iter().copied(), n);
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for ((i, j), &c) in table.indexed_iter() {
        if c > 0.0 {
            mi += c / n * (n * c / (rows[i] * cols[j])).ln();
        }
    }
    Ok((mi / (0.5 * (hp + ht))).clamp(0.0, 1.0))
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from pair counts.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() < 2 {
        return Err(Error::InvalidArgument("ARI needs at least 2 samples".into()));
    }
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let sum_cells: f64 = table.iter().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = table.rows().into_iter().map(|r| comb2(r.sum())).sum();
    let sum_cols: f64 = table.columns().into_iter().map(|c| comb2(c.sum())).sum();
    let expected = sum_rows * sum_cols / comb2(n);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions trivial (all singletons or one cluster)
        return Ok(if sum_rows == sum_cols { 1.0 } else { 0.0 });
    }
    Ok((sum_cells - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acc_examples() {
        assert_eq!(acc(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(acc(&[2, 0, 1, 1], &[0, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(acc(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap(), 0.75);
        // more predicted clusters than classes
        assert_eq!(acc(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert!(acc(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[3, 3], &[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn ari_examples() {
        assert!((ari(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap() - 1.0).abs() < 1e-12);
        // pair counts: index 0, row and column sums 2 each, 6 pairs, so
        // (0 - 2/3) / (2 - 2/3)
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-12);
        assert!((ari(&[1, 1, 0, 0], &[5, 7, 5, 7]).unwrap() + 0.5).abs() < 1e-12);
        assert!(ari(&[0], &[0]).is_err());
    }
}
