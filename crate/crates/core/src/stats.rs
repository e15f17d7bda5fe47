//! Row standardization and normalized covariance (Pearson) matrices.
//!
//! All statistics here are taken *across the feature dimension* of a latent
//! vector: each row of an `n x d` matrix is one sample, and the normalized
//! covariance between two samples is the Pearson correlation of their `d`
//! coordinates. Standard deviations use the `d - 1` divisor so that the
//! normalized covariance of a row with itself is exactly 1.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Rows whose sample standard deviation falls below this are treated as
/// constant and standardize to the zero vector.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovKind {
    CrossView,
    IntraView,
}

/// Matrix of Pearson correlations between the rows of two latent matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub values: Matrix,
    pub kind: CovKind,
}

impl CovMatrix {
    pub fn diag(&self) -> Vec<f64> {
        self.values.diag().to_vec()
    }
}

/// Standardizes one vector: subtract the mean, divide by the sample std.
pub fn standardize_row(z: &[f64]) -> Result<Vec<f64>> {
    if z.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "standardization needs at least 2 features, got {}",
            z.len()
        )));
    }
    let (out, _) = standardize_view(ArrayView1::from(z));
    Ok(out.to_vec())
}

fn standardize_view(z: ArrayView1<f64>) -> (Array1<f64>, f64) {
    let d = z.len() as f64;
    let mean = z.sum() / d;
    let ss: f64 = z.iter().map(|&x| (x - mean) * (x - mean)).sum();
    let std = (ss / (d - 1.0)).sqrt();
    if std < DEGENERATE_STD {
        (Array1::zeros(z.len()), 0.0)
    } else {
        let inv = 1.0 / std;
        (z.mapv(|x| (x - mean) * inv), inv)
    }
}

/// Row-standardized matrix plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub values: Matrix,
    /// `1 / std` per row, 0 for degenerate rows.
    pub inv_std: Vec<f64>,
}

impl Standardized {
    pub fn new(z: &Matrix) -> Result<Self> {
        if z.ncols() < 2 {
            return Err(Error::InvalidArgument(format!(
                "standardization needs at least 2 features, got {}",
                z.ncols()
            )));
        }
        let mut values = Array2::zeros(z.raw_dim());
        let mut inv_std = Vec::with_capacity(z.nrows());
        for (row, mut out) in z.rows().into_iter().zip(values.rows_mut()) {
            let (s, inv) = standardize_view(row);
            out.assign(&s);
            inv_std.push(inv);
        }
        Ok(Self { values, inv_std })
    }

    /// Chain rule through the standardization, treating mean and std as
    /// functions of the row:
    /// `dz = (g - mean(g) - s * <g, s> / (d - 1)) / std`.
    pub fn backward(&self, grad: &Matrix) -> Matrix {
        let d = self.values.ncols() as f64;
        let mut out = Array2::zeros(grad.raw_dim());
        Zip::from(out.rows_mut())
            .and(grad.rows())
            .and(self.values.rows())
            .and(&self.inv_std)
            .for_each(|mut o, g, s, &inv| {
                if inv == 0.0 {
                    return;
                }
                let g_mean = g.sum() / d;
                let gs = g.dot(&s) / (d - 1.0);
                Zip::from(&mut o)
                    .and(&g)
                    .and(&s)
                    .for_each(|o, &g, &s| *o = (g - g_mean - s * gs) * inv);
            });
        out
    }
}

/// Pearson correlation of two equally long vectors; 0 if either is constant.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "pearson: lengths {} and {} differ",
            u.len(),
            v.len()
        )));
    }
    let su = standardize_row(u)?;
    let sv = standardize_row(v)?;
    let dot: f64 = su.iter().zip(&sv).map(|(a, b)| a * b).sum();
    Ok(dot / (u.len() - 1) as f64)
}

/// Cross covariance together with the cached standardizations, so that the
/// gradient can be pulled back to both inputs.
#[derive(Debug, Clone)]
pub struct CrossCov {
    pub cov: CovMatrix,
    sa: Standardized,
    sb: Standardized,
    same_input: bool,
}

impl CrossCov {
    pub fn new(za: &Matrix, zb: &Matrix) -> Result<Self> {
        if za.dim() != zb.dim() {
            return Err(Error::Shape(format!(
                "cross covariance: {:?} vs {:?}",
                za.dim(),
                zb.dim()
            )));
        }
        let sa = Standardized::new(za)?;
        let sb = Standardized::new(zb)?;
        let scale = 1.0 / (za.ncols() - 1) as f64;
        let values = sa.values.dot(&sb.values.t()) * scale;
        Ok(Self {
            cov: CovMatrix {
                values,
                kind: CovKind::CrossView,
            },
            sa,
            sb,
            same_input: false,
        })
    }

    pub fn intra(z: &Matrix) -> Result<Self> {
        let mut c = Self::new(z, z)?;
        c.cov.kind = CovKind::IntraView;
        c.same_input = true;
        Ok(c)
    }

    /// Gradients w.r.t. the two inputs given `dL/dC`. For an intra-view
    /// matrix both inputs are the same tensor; callers add the two parts.
    pub fn backward(&self, grad: &Matrix) -> (Matrix, Matrix) {
        let scale = 1.0 / (self.sa.values.ncols() - 1) as f64;
        let gsa = grad.dot(&self.sb.values) * scale;
        let gsb = grad.t().dot(&self.sa.values) * scale;
        (self.sa.backward(&gsa), self.sb.backward(&gsb))
    }

    /// Gradient w.r.t. the single input of an intra-view matrix.
    pub fn backward_intra(&self, grad: &Matrix) -> Matrix {
        debug_assert!(self.same_input);
        let (a, b) = self.backward(grad);
        a + b
    }
}

/// `C[i, j] = pearson(za[i], zb[j])` computed as `S_a S_b^T / (d - 1)`.
pub fn cross_cov(za: &Matrix, zb: &Matrix) -> Result<CovMatrix> {
    Ok(CrossCov::new(za, zb)?.cov)
}

pub fn intra_cov(z: &Matrix) -> Result<CovMatrix> {
    Ok(CrossCov::intra(z)?.cov)
}

/// Pearson correlation of each row of `za` with the same row of `zb`; the
/// diagonal of `cross_cov(za, zb)` without the quadratic cost.
pub fn paired_pearson(za: &Matrix, zb: &Matrix) -> Result<Vec<f64>> {
    if za.dim() != zb.dim() {
        return Err(Error::Shape(format!(
            "paired pearson: {:?} vs {:?}",
            za.dim(),
            zb.dim()
        )));
    }
    if za.ncols() < 2 {
        return Err(Error::InvalidArgument("need at least 2 features".into()));
    }
    let scale = 1.0 / (za.ncols() - 1) as f64;
    Ok(za
        .axis_iter(Axis(0))
        .zip(zb.axis_iter(Axis(0)))
        .map(|(a, b)| standardize_view(a).0.dot(&standardize_view(b).0) * scale)
        .collect())
}

/// Neighbor threshold `max(0, mean(diag) - std(diag))` over the aligned
/// diagonal, with the sample standard deviation (0 for a single entry).
pub fn adaptive_threshold(cross: &CovMatrix) -> Result<f64> {
    let (r, c) = cross.values.dim();
    if r != c {
        return Err(Error::Shape(format!("threshold needs a square matrix, got {r}x{c}")));
    }
    threshold_from_diag(&cross.diag())
}

/// Accumulated in double-double arithmetic and rounded once at the end.
pub fn threshold_from_diag(diag: &[f64]) -> Result<f64> {
    if diag.is_empty() {
        return Err(Error::InvalidArgument(
            "threshold needs at least one aligned pair".into(),
        ));
    }
    if diag.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("threshold diagonal".into()));
    }
    let n = diag.len() as f64;
    let mean = diag.iter().fold(Dd::ZERO, |acc, &x| acc.add(Dd::from(x))).div(n);
    let std = if diag.len() < 2 {
        Dd::ZERO
    } else {
        diag.iter()
            .fold(Dd::ZERO, |acc, &x| {
                let dev = Dd::from(x).sub(mean);
                acc.add(dev.square())
            })
            .div(n - 1.0)
            .sqrt()
    };
    Ok(mean.sub(std).value().max(0.0))
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, o: Dd) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn sub(self, o: Dd) -> Self {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    fn square(self) -> Self {
        let p = self.hi * self.hi;
        let err = self.hi.mul_add(self.hi, -p);
        Self::renorm(p, err + 2.0 * self.hi * self.lo)
    }

    fn div(self, d: f64) -> Self {
        let q = self.hi / d;
        let r = (-q).mul_add(d, self.hi) + self.lo;
        Self::renorm(q, r / d)
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        let s = self.hi.sqrt();
        let r = (-s).mul_add(s, self.hi) + self.lo;
        Self::renorm(s, r / (2.0 * s))
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use ndarray::array;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize_row(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0; 3]);
        let s = standardize_row(&[0.0, 2.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] + h).abs() < 1e-12 && (s[1] - h).abs() < 1e-12);
        assert!(standardize_row(&[1.0]).is_err());

        let s = standardize_row(&[0.3, -1.0, 2.5, 7.0]).unwrap();
        let mean: f64 = s.iter().sum::<f64>() / 4.0;
        let var: f64 = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pearson_examples() {
        let x = [0.2, 1.7, -0.4, 3.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn cross_cov_examples() {
        let za = random(5, 4, 1);
        let c = cross_cov(&za, &za).unwrap();
        for i in 0..5 {
            assert!((c.values[[i, i]] - 1.0).abs() < 1e-12);
        }
        let c = cross_cov(&za, &(-&za)).unwrap();
        for i in 0..5 {
            assert!((c.values[[i, i]] + 1.0).abs() < 1e-12);
        }
        let zb = random(3, 3, 2);
        let za = random(3, 3, 3);
        let c = cross_cov(&za, &zb).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p = pearson(za.row(i).as_slice().unwrap(), zb.row(j).as_slice().unwrap()).unwrap();
                assert!((c.values[[i, j]] - p).abs() < 1e-12);
            }
        }
        assert!(cross_cov(&random(3, 3, 0), &random(3, 4, 0)).is_err());
    }

    #[test]
    fn intra_cov_examples() {
        let z = array![[1.0, 2.0, 4.0]];
        assert_eq!(intra_cov(&z).unwrap().values, array![[1.0]]);
        let z = random(6, 5, 4);
        let c = intra_cov(&z).unwrap();
        assert_eq!(c.kind, CovKind::IntraView);
        let asym = (&c.values - &c.values.t()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(asym < 1e-12);
        assert_eq!(c.values, cross_cov(&z, &z).unwrap().values);
    }

    #[test]
    fn threshold_examples() {
        let t = threshold_from_diag(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(t, 1.0);
        let t = threshold_from_diag(&[0.6, 0.8, 1.0]).unwrap();
        assert_eq!(t, 0.6);
        assert_eq!(threshold_from_diag(&[-0.5, -0.5]).unwrap(), 0.0);
        assert_eq!(threshold_from_diag(&[0.7]).unwrap(), 0.7);
        assert!(threshold_from_diag(&[]).is_err());
        let c = CovMatrix {
            values: Array2::zeros((2, 3)),
            kind: CovKind::CrossView,
        };
        assert!(adaptive_threshold(&c).is_err());
    }

    #[test]
    fn paired_matches_diagonal() {
        let za = random(7, 5, 11);
        let zb = random(7, 5, 12);
        let full = cross_cov(&za, &zb).unwrap().diag();
        for (a, b) in paired_pearson(&za, &zb).unwrap().iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_cov_gradient_matches_finite_differences() {
        let za = random(4, 5, 21);
        let zb = random(4, 5, 22);
        let weights = random(4, 4, 23);
        let f = |a: &Matrix, b: &Matrix| (&cross_cov(a, b).unwrap().values * &weights).sum();
        let cc = CrossCov::new(&za, &zb).unwrap();
        let (ga, gb) = cc.backward(&weights);
        let h = 1e-6;
        for (which, analytic) in [(0, &ga), (1, &gb)] {
            for idx in [(0, 0), (1, 3), (3, 4), (2, 1)] {
                let (mut ap, mut am) = (za.clone(), za.clone());
                let (mut bp, mut bm) = (zb.clone(), zb.clone());
                if which == 0 {
                    ap[idx] += h;
                    am[idx] -= h;
                } else {
                    bp[idx] += h;
                    bm[idx] -= h;
                }
                let fd = (f(&ap, &bp) - f(&am, &bm)) / (2.0 * h);
                let a = analytic[idx];
                assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8) < 1e-6, "{a} vs {fd}");
            }
        }
    }

    proptest! {
        #[test]
        fn pearson_is_affine_invariant(
            u in proptest::collection::vec(-5.0f64..5.0, 6),
            v in proptest::collection::vec(-5.0f64..5.0, 6),
            a in 0.1f64..10.0,
            b in -10.0f64..10.0,
        ) {
            let su: f64 = standardize_row(&u).unwrap().iter().map(|x| x * x).sum();
            prop_assume!(su > 0.0);
            let moved: Vec<f64> = u.iter().map(|x| a * x + b).collect();
            let r0 = pearson(&u, &v).unwrap();
            let r1 = pearson(&moved, &v).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-9);
            prop_assert!(r0.abs() <= 1.0 + 1e-9);
        }

        #[test]
        fn threshold_ignores_order(mut diag in proptest::collection::vec(-1.0f64..1.0, 1..12)) {
            let t0 = threshold_from_diag(&diag).unwrap();
            diag.reverse();
            let t1 = threshold_from_diag(&diag).unwrap();
            prop_assert!((t0 - t1).abs() < 1e-12);
        }

        #[test]
        fn threshold_matches_plain_formula(diag in proptest::collection::vec(-1.0f64..1.0, 1..40)) {
            let n = diag.len() as f64;
            let mean = diag.iter().sum::<f64>() / n;
            let std = if diag.len() < 2 {
                0.0
            } else {
                (diag.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            let t = threshold_from_diag(&diag).unwrap();
            prop_assert!((t - (mean - std).max(0.0)).abs() < 1e-12);
        }
    }
}
