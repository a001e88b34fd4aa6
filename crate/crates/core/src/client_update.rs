//! Client-side refinement of a Lloyd solution.
//!
//! A local solution of k-means mixes two kinds of centroids: *one-fit-many*
//! centroids parked between several true clusters, and *one/many-fit-one*
//! centroids sitting on a single true cluster. The refinement repeatedly
//! pits the most spread-out cluster against a merge of the two closest
//! centroids and drops the spread-out centroid whenever its cluster costs at
//! least as much as the merged pair.

use ndarray::{Array2, ArrayView1, Axis};

use crate::dataset::sq_dist;
use crate::error::{Error, Result};
use crate::kmeans::ClusterSolution;

/// A centroid eliminated during refinement, with the costs that condemned it.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovedCentroid {
    /// Index in the input solution.
    pub index: usize,
    pub centroid: Vec<f64>,
    /// Cost of its own cluster around it.
    pub cost: f64,
    /// Cost of the merged closest pair it was compared with.
    pub merged_cost: f64,
    pub merged_pair: (usize, usize),
}

/// Surviving centroids and their clusters (indices into the client's points).
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedSolution {
    pub centroids: Array2<f64>,
    pub clusters: Vec<Vec<usize>>,
    /// For each survivor, its index in the input solution.
    pub origin: Vec<usize>,
    pub removed: Vec<RemovedCentroid>,
}

impl RefinedSolution {
    /// Wraps a solution without removing anything.
    pub fn unrefined(solution: &ClusterSolution) -> Self {
        Self {
            centroids: solution.centroids.clone(),
            clusters: solution.clusters(),
            origin: (0..solution.k()).collect(),
            removed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.nrows() == 0
    }
}

/// Root-mean-square distance from the centroid over a cluster; `None` if empty.
fn distance_spread(points: &Array2<f64>, members: &[usize], centroid: ArrayView1<'_, f64>) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    Some((members.iter().map(|&i| sq_dist(points.row(i), centroid)).sum::<f64>() / n).sqrt())
}

fn spread_argmax(spreads: &[Option<f64>], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in candidates {
        if let Some(s) = spreads[j] {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
    }
    best.map(|(j, _)| j)
}

fn closest_pair(centroids: &Array2<f64>, live: &[usize]) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (a, &p) in live.iter().enumerate() {
        for &q in &live[a + 1..] {
            let d = sq_dist(centroids.row(p), centroids.row(q));
            if best.is_none_or(|(_, b)| d < b) {
                best = Some(((p, q), d));
            }
        }
    }
    best.map(|(pair, _)| pair)
}

/// Index of the cluster with the largest root-mean-square point-to-centroid
/// distance. Empty clusters are skipped; ties go to the lowest index.
pub fn detect_one_fit_many(solution: &ClusterSolution, points: &Array2<f64>) -> Result<usize> {
    let clusters = solution.clusters();
    let spreads: Vec<Option<f64>> = clusters
        .iter()
        .enumerate()
        .map(|(j, m)| distance_spread(points, m, solution.centroids.row(j)))
        .collect();
    spread_argmax(&spreads, 0..solution.k()).ok_or(Error::AllClustersEmpty)
}

/// The two closest centroids; ties go to the lexicographically smallest pair.
pub fn detect_many_fit_one(solution: &ClusterSolution) -> Result<(usize, usize)> {
    let live: Vec<usize> = (0..solution.k()).collect();
    closest_pair(&solution.centroids, &live).ok_or(Error::TooFewCentroids { needed: 2, got: solution.k() })
}

fn cost_around(points: &Array2<f64>, members: &[usize], centroid: ArrayView1<'_, f64>) -> f64 {
    members.iter().map(|&i| sq_dist(points.row(i), centroid)).sum()
}

fn merged_cost(points: &Array2<f64>, a: &[usize], b: &[usize]) -> f64 {
    let members: Vec<usize> = a.iter().chain(b).copied().collect();
    if members.is_empty() {
        return 0.0;
    }
    let mean = points.select(Axis(0), &members).mean_axis(Axis(0)).expect("non-empty");
    cost_around(points, &members, mean.view())
}

/// Eliminates one-fit-many centroids from a client's Lloyd solution.
///
/// Each pass re-detects from scratch: the candidate `i` is the most spread-out
/// cluster outside the closest pair `(p, q)`. If the cost of cluster `i` around
/// its centroid is at least the cost of `p ∪ q` around their joint mean, `i`
/// is removed and the loop continues; otherwise it stops. Fewer than three
/// live centroids also stops the loop.
pub fn refine(solution: &ClusterSolution, points: &Array2<f64>) -> Result<RefinedSolution> {
    if solution.assignment.len() != points.nrows() {
        return Err(Error::LengthMismatch { left: solution.assignment.len(), right: points.nrows() });
    }
    if solution.centroids.ncols() != points.ncols() {
        return Err(Error::DimensionMismatch { expected: points.ncols(), got: solution.centroids.ncols() });
    }
    let clusters = solution.clusters();
    let centroids = &solution.centroids;
    let spreads: Vec<Option<f64>> = clusters
        .iter()
        .enumerate()
        .map(|(j, m)| distance_spread(points, m, centroids.row(j)))
        .collect();

    let mut live: Vec<usize> = (0..solution.k()).collect();
    let mut removed = Vec::new();
    while live.len() >= 3 {
        let (p, q) = closest_pair(centroids, &live).expect("at least two live centroids");
        let Some(i) = spread_argmax(&spreads, live.iter().copied().filter(|&j| j != p && j != q)) else {
            break;
        };
        let cost = cost_around(points, &clusters[i], centroids.row(i));
        let merged = merged_cost(points, &clusters[p], &clusters[q]);
        if cost >= merged {
            removed.push(RemovedCentroid {
                index: i,
                centroid: centroids.row(i).to_vec(),
                cost,
                merged_cost: merged,
                merged_pair: (p, q),
            });
            live.retain(|&j| j != i);
        } else {
            break;
        }
    }

    Ok(RefinedSolution {
        centroids: centroids.select(Axis(0), &live),
        clusters: live.iter().map(|&j| clusters[j].clone()).collect(),
        origin: live,
        removed,
    })
}
