//! Minimum-cost bipartite matching on dense real cost matrices.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Minimum-cost assignment for a rectangular cost matrix.
///
/// Returns `(row, col)` pairs sorted by row; exactly `min(rows, cols)` pairs.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Result<Vec<(usize, usize)>> {
    let (r, c) = cost.dim();
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("assignment costs must be finite".into()));
    }
    if r == 0 || c == 0 {
        return Ok(Vec::new());
    }
    if r > c {
        let mut pairs: Vec<(usize, usize)> = hungarian(&cost.t().to_owned())
            .into_iter()
            .map(|(a, b)| (b, a))
            .collect();
        pairs.sort_unstable();
        return Ok(pairs);
    }
    Ok(hungarian(cost))
}

/// Total cost of a set of pairs.
pub fn assignment_cost(cost: &Array2<f64>, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| cost[[i, j]]).sum()
}

/// Shortest augmenting path with potentials; requires rows <= cols.
fn hungarian(cost: &Array2<f64>) -> Vec<(usize, usize)> {
    let (n, m) = cost.dim();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) matched to column j; column 0 is a sentinel
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
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
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> =
        (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    /// Exhaustive search over injective maps from the smaller side.
    fn brute_force(cost: &Array2<f64>) -> f64 {
        let (r, c) = cost.dim();
        let (small, large, transposed) = if r <= c { (r, c, false) } else { (c, r, true) };
        fn rec(
            i: usize,
            small: usize,
            large: usize,
            used: &mut Vec<bool>,
            acc: f64,
            at: &dyn Fn(usize, usize) -> f64,
        ) -> f64 {
            if i == small {
                return acc;
            }
            let mut best = f64::INFINITY;
            for j in 0..large {
                if !used[j] {
                    used[j] = true;
                    best = best.min(rec(i + 1, small, large, used, acc + at(i, j), at));
                    used[j] = false;
                }
            }
            best
        }
        let at = |i: usize, j: usize| if transposed { cost[[j, i]] } else { cost[[i, j]] };
        rec(0, small, large, &mut vec![false; large], 0.0, &at)
    }

    #[test]
    fn square_example() {
        let cost = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let pairs = min_cost_assignment(&cost).unwrap();
        assert_eq!(pairs, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(assignment_cost(&cost, &pairs), 5.0);
    }

    #[test]
    fn rectangular_both_ways() {
        let cost = array![[10.0, 1.0, 7.0, 2.0], [3.0, 9.0, 0.5, 8.0]];
        let pairs = min_cost_assignment(&cost).unwrap();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        let pairs_t = min_cost_assignment(&cost.t().to_owned()).unwrap();
        assert_eq!(pairs_t, vec![(1, 0), (2, 1)]);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(min_cost_assignment(&Array2::zeros((0, 3))).unwrap().is_empty());
        assert!(min_cost_assignment(&array![[f64::NAN]]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(r in 1usize..6, c in 1usize..6, vals in proptest::collection::vec(-50.0f64..50.0, 36)) {
            let cost = Array2::from_shape_vec((r, c), vals[..r * c].to_vec()).unwrap();
            let pairs = min_cost_assignment(&cost).unwrap();
            prop_assert_eq!(pairs.len(), r.min(c));
            let mut rows: Vec<_> = pairs.iter().map(|p| p.0).collect();
            let mut cols: Vec<_> = pairs.iter().map(|p| p.1).collect();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            prop_assert_eq!(rows.len(), pairs.len());
            prop_assert_eq!(cols.len(), pairs.len());
            prop_assert!((assignment_cost(&cost, &pairs) - brute_force(&cost)).abs() < 1e-9);
        }
    }
}
