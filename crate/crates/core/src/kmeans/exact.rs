use ndarray::Array2;

use super::ClusterSolution;
use crate::dataset::sq_dist;
use crate::error::{Error, Result};

/// Largest instance [`exact_kmeans`] will enumerate.
pub const EXACT_LIMIT: usize = 12;

/// Global k-means optimum by enumerating every partition of the points into
/// exactly `k` non-empty blocks (restricted growth strings).
pub fn exact_kmeans(points: &Array2<f64>, k: usize) -> Result<ClusterSolution> {
    let (n, d) = points.dim();
    if n > EXACT_LIMIT {
        return Err(Error::EnumerationGuard { n, limit: EXACT_LIMIT });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }

    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut search = Search { points, k, d, labels: &mut labels, best: &mut best };
    search.descend(0, 0);

    let (_, labels) = best.expect("k <= n always admits a partition");
    let mut centroids = Array2::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (i, &b) in labels.iter().enumerate() {
        counts[b] += 1;
        let mut row = centroids.row_mut(b);
        row += &points.row(i);
    }
    for b in 0..k {
        centroids.row_mut(b).mapv_inplace(|v| v / counts[b] as f64);
    }
    let objective = labels.iter().enumerate().map(|(i, &b)| sq_dist(points.row(i), centroids.row(b))).sum();
    Ok(ClusterSolution { centroids, assignment: labels, cluster_sizes: counts, objective, iterations: 0 })
}

struct Search<'a> {
    points: &'a Array2<f64>,
    k: usize,
    d: usize,
    labels: &'a mut Vec<usize>,
    best: &'a mut Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, i: usize, used: usize) {
        let n = self.labels.len();
        if i == n {
            if used == self.k {
                let cost = self.cost();
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    *self.best = Some((cost, self.labels.clone()));
                }
            }
            return;
        }
        // remaining points must be able to open the missing blocks
        if n - i < self.k - used {
            return;
        }
        let limit = (used + 1).min(self.k);
        for b in 0..limit {
            self.labels[i] = b;
            self.descend(i + 1, used.max(b + 1));
        }
    }

    fn cost(&self) -> f64 {
        let mut sums = vec![0.0; self.k * self.d];
        let mut counts = vec![0usize; self.k];
        for (i, &b) in self.labels.iter().enumerate() {
            counts[b] += 1;
            for j in 0..self.d {
                sums[b * self.d + j] += self.points[[i, j]];
            }
        }
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                (0..self.d)
                    .map(|j| {
                        let c = sums[b * self.d + j] / counts[b] as f64;
                        let v = self.points[[i, j]] - c;
                        v * v
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}
