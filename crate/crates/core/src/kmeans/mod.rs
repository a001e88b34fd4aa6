//! Centralized clustering primitives.

mod exact;
mod fuzzy;

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng as _;

use crate::dataset::sq_dist;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

pub use exact::{exact_kmeans, EXACT_LIMIT};
pub use fuzzy::{fuzzy_cmeans, fuzzy_memberships, FuzzyConfig, FuzzySolution, SINGULARITY_EPS};

/// Output of a hard clustering routine.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSolution {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    /// Total within-cluster squared distance (weighted when the run was weighted).
    pub objective: f64,
    pub iterations: usize,
}

impl ClusterSolution {
    /// Assigns every point to its nearest centroid.
    pub fn from_centroids(points: &Array2<f64>, centroids: Array2<f64>) -> Result<Self> {
        check_dims(points, &centroids)?;
        let (assignment, d2) = assign(points, &centroids);
        let cluster_sizes = sizes(&assignment, centroids.nrows());
        Ok(Self { centroids, assignment, cluster_sizes, objective: d2.iter().sum(), iterations: 0 })
    }

    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    /// Point indices per cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// How Lloyd picks its starting centroids.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    KMeansPlusPlus,
    /// `k` distinct points chosen uniformly at random.
    Uniform,
    Given(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydConfig {
    pub init: Init,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for LloydConfig {
    fn default() -> Self {
        Self { init: Init::KMeansPlusPlus, max_iters: 300, tol: 1e-6 }
    }
}

impl LloydConfig {
    pub fn with_init(init: Init) -> Self {
        Self { init, ..Self::default() }
    }
}

fn check_dims(points: &Array2<f64>, centroids: &Array2<f64>) -> Result<()> {
    if centroids.nrows() == 0 {
        return Err(Error::EmptyInput("no centroids".into()));
    }
    if centroids.ncols() != points.ncols() {
        return Err(Error::DimensionMismatch { expected: points.ncols(), got: centroids.ncols() });
    }
    Ok(())
}

fn sizes(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    assignment.iter().for_each(|&c| out[c] += 1);
    out
}

/// Index of and squared distance to the nearest centroid; ties go to the lowest index.
#[inline]
pub fn nearest(x: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Nearest-centroid labels and squared distances for every point.
pub fn assign(points: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points.rows().into_iter().map(|x| nearest(x, centroids)).unzip()
}

/// k-means objective: sum over points of the squared distance to the nearest centroid.
pub fn objective(points: &Array2<f64>, centroids: &Array2<f64>) -> Result<f64> {
    check_dims(points, centroids)?;
    Ok(points.rows().into_iter().map(|x| nearest(x, centroids).1).sum())
}

fn check_k(points: &Array2<f64>, k: usize) -> Result<()> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite coordinate".into()));
    }
    Ok(())
}

/// Samples an index with probability proportional to `mass`, skipping `taken`.
/// Falls back to a uniform draw over untaken indices when no mass is left.
fn sample_proportional(mass: &[f64], taken: &[bool], rng: &mut Rng) -> usize {
    let total: f64 = mass.iter().zip(taken).filter(|(_, t)| !**t).map(|(m, _)| m).sum();
    if total > 0.0 && total.is_finite() {
        let mut target = rng.random::<f64>() * total;
        let mut last = None;
        for (i, (&m, &t)) in mass.iter().zip(taken).enumerate() {
            if t || m <= 0.0 {
                continue;
            }
            last = Some(i);
            if target < m {
                return i;
            }
            target -= m;
        }
        if let Some(i) = last {
            return i;
        }
    }
    let free: Vec<usize> = (0..taken.len()).filter(|&i| !taken[i]).collect();
    free[rng.random_range(0..free.len())]
}

/// k-means++ seeding with optional per-point weights.
pub fn init_kmeanspp_weighted(
    points: &Array2<f64>,
    weights: Option<&[f64]>,
    k: usize,
    rng: &mut Rng,
) -> Result<Array2<f64>> {
    check_k(points, k)?;
    let n = points.nrows();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut taken = vec![false; n];
    let mut chosen = Vec::with_capacity(k);

    let first_mass: Vec<f64> = (0..n).map(w).collect();
    let first = sample_proportional(&first_mass, &taken, rng);
    taken[first] = true;
    chosen.push(first);

    let mut d2: Vec<f64> = points.rows().into_iter().map(|x| sq_dist(x, points.row(first))).collect();
    while chosen.len() < k {
        let mass: Vec<f64> = (0..n).map(|i| d2[i] * w(i)).collect();
        let next = sample_proportional(&mass, &taken, rng);
        taken[next] = true;
        chosen.push(next);
        let c = points.row(next);
        for (i, x) in points.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, c));
        }
    }
    Ok(points.select(ndarray::Axis(0), &chosen))
}

/// k-means++ seeding: `k` distinct points drawn by squared-distance weighting.
pub fn init_kmeanspp(points: &Array2<f64>, k: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    init_kmeanspp_weighted(points, None, k, rng)
}

pub fn init_uniform(points: &Array2<f64>, k: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    check_k(points, k)?;
    let idx = sample(rng, points.nrows(), k).into_vec();
    Ok(points.select(ndarray::Axis(0), &idx))
}

/// Lloyd's algorithm.
pub fn lloyd(points: &Array2<f64>, k: usize, config: &LloydConfig, seed: u64) -> Result<ClusterSolution> {
    run_lloyd(points, None, k, config, seed).map(|(s, _)| s)
}

/// Lloyd's algorithm, also returning the objective after every assignment step.
pub fn lloyd_traced(
    points: &Array2<f64>,
    k: usize,
    config: &LloydConfig,
    seed: u64,
) -> Result<(ClusterSolution, Vec<f64>)> {
    run_lloyd(points, None, k, config, seed)
}

/// Lloyd's algorithm on weighted points (weights act as point multiplicities).
pub fn weighted_lloyd(
    points: &Array2<f64>,
    weights: &[f64],
    k: usize,
    config: &LloydConfig,
    seed: u64,
) -> Result<ClusterSolution> {
    if weights.len() != points.nrows() {
        return Err(Error::LengthMismatch { left: points.nrows(), right: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidParameter("weights must be finite, non-negative, not all zero".into()));
    }
    run_lloyd(points, Some(weights), k, config, seed).map(|(s, _)| s)
}

/// Single update step: weighted means of the current clusters, with empty
/// clusters re-seeded at the points farthest from their current centroid.
fn update_step(
    points: &Array2<f64>,
    weights: Option<&[f64]>,
    centroids: &Array2<f64>,
    labels: &[usize],
    d2: &[f64],
) -> Array2<f64> {
    let (k, d) = centroids.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut mass = vec![0.0; k];
    for (i, x) in points.rows().into_iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let c = labels[i];
        mass[c] += w;
        sums.row_mut(c).scaled_add(w, &x);
    }
    let mut next = centroids.clone();
    let mut far: Vec<usize> = (0..points.nrows()).collect();
    // farthest first, ties by index
    far.sort_by(|&a, &b| d2[b].total_cmp(&d2[a]).then(a.cmp(&b)));
    let mut far = far.into_iter();
    for j in 0..k {
        if mass[j] > 0.0 {
            next.row_mut(j).assign(&(&sums.row(j) / mass[j]));
        } else if let Some(p) = far.next() {
            next.row_mut(j).assign(&points.row(p));
        }
    }
    next
}

fn run_lloyd(
    points: &Array2<f64>,
    weights: Option<&[f64]>,
    k: usize,
    config: &LloydConfig,
    seed: u64,
) -> Result<(ClusterSolution, Vec<f64>)> {
    check_k(points, k)?;
    let mut rng = rng_from_seed(seed);
    let mut centroids = match &config.init {
        Init::KMeansPlusPlus => init_kmeanspp_weighted(points, weights, k, &mut rng)?,
        Init::Uniform => init_uniform(points, k, &mut rng)?,
        Init::Given(c) => {
            check_dims(points, c)?;
            if c.nrows() != k {
                return Err(Error::InvalidParameter(format!(
                    "{} initial centroids for k = {k}",
                    c.nrows()
                )));
            }
            c.clone()
        }
    };
    let weighted_sum = |d2: &[f64]| -> f64 {
        d2.iter().enumerate().map(|(i, d)| weights.map_or(1.0, |w| w[i]) * d).sum()
    };

    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < config.max_iters {
        let (labels, d2) = assign(points, &centroids);
        trace.push(weighted_sum(&d2));
        let next = update_step(points, weights, &centroids, &labels, &d2);
        let shift = next
            .rows()
            .into_iter()
            .zip(centroids.rows())
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = next;
        iterations += 1;
        if shift < config.tol {
            break;
        }
    }
    let (assignment, d2) = assign(points, &centroids);
    let objective = weighted_sum(&d2);
    trace.push(objective);
    let cluster_sizes = sizes(&assignment, k);
    Ok((ClusterSolution { centroids, assignment, cluster_sizes, objective, iterations }, trace))
}
