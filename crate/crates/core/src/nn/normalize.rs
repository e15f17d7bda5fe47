use ndarray::{Array2, Zip};

use crate::Matrix;

const DEGENERATE_NORM: f64 = 1e-12;

/// Divides each row by its Euclidean norm. Rows with norm below `1e-12`
/// become zero rows.
pub fn l2_normalize_rows(h: &Matrix) -> Matrix {
    RowNormalized::new(h).values
}

/// Row-normalized matrix with the norms kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RowNormalized {
    pub values: Matrix,
    /// Original row norms; 0 marks a degenerate row.
    pub norms: Vec<f64>,
}

impl RowNormalized {
    pub fn new(h: &Matrix) -> Self {
        let mut values = h.clone();
        let mut norms = Vec::with_capacity(h.nrows());
        for mut row in values.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm < DEGENERATE_NORM {
                row.fill(0.0);
                norms.push(0.0);
            } else {
                row /= norm;
                norms.push(norm);
            }
        }
        Self { values, norms }
    }

    /// `dx = (g - y <g, y>) / |x|`, zero for degenerate rows.
    pub fn backward(&self, grad: &Matrix) -> Matrix {
        let mut out = Array2::zeros(grad.raw_dim());
        Zip::from(out.rows_mut())
            .and(grad.rows())
            .and(self.values.rows())
            .and(&self.norms)
            .for_each(|mut o, g, y, &norm| {
                if norm == 0.0 {
                    return;
                }
                let gy = g.dot(&y);
                Zip::from(&mut o)
                    .and(&g)
                    .and(&y)
                    .for_each(|o, &g, &y| *o = (g - y * gy) / norm);
            });
        out
    }
}
