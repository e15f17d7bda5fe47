use crate::error::{Error, Result};
use crate::Matrix;

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `assignment[row] = column`. Shortest augmenting paths with row
/// and column potentials, `O(n^3)`.
pub fn hungarian(cost: &Matrix) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::Shape(format!("assignment needs a square matrix, got {n}x{m}")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based internally; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    Ok(assignment)
}

pub fn assignment_cost(cost: &Matrix, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn identity_favoring() {
        let c = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 0.0 } else { 1.0 });
        let a = hungarian(&c).unwrap();
        assert_eq!(a, vec![0, 1, 2, 3]);
        assert_eq!(assignment_cost(&c, &a), 0.0);
    }

    #[test]
    fn two_by_two() {
        let c = array![[4.0, 1.0], [2.0, 3.0]];
        let a = hungarian(&c).unwrap();
        assert_eq!(a, vec![1, 0]);
        assert_eq!(assignment_cost(&c, &a), 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hungarian(&array![[1.0, f64::NAN], [0.0, 0.0]]).is_err());
        assert!(hungarian(&Array2::zeros((2, 3))).is_err());
        assert!(hungarian(&Array2::zeros((0, 0))).unwrap().is_empty());
    }

    #[test]
    fn negative_costs() {
        let c = array![[-5.0, 0.0, -1.0], [0.0, -3.0, -4.0], [-2.0, -6.0, 0.0]];
        let a = hungarian(&c).unwrap();
        // brute force over 6 permutations
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms
            .iter()
            .map(|p| assignment_cost(&c, p))
            .fold(f64::INFINITY, f64::min);
        assert!((assignment_cost(&c, &a) - best).abs() < 1e-12);
    }
}
