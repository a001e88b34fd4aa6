use ndarray::Array2;

use super::{init_kmeanspp, init_uniform, Init};
use crate::dataset::sq_dist;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Points within this distance of a centroid get crisp membership.
pub const SINGULARITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySolution {
    pub centroids: Array2<f64>,
    /// N x k, rows sum to one.
    pub membership: Array2<f64>,
    pub fuzzifier: f64,
    pub iterations: usize,
}

impl FuzzySolution {
    /// Per-cluster membership mass `sum_n u_nj^m`.
    pub fn mass(&self) -> Vec<f64> {
        let m = self.fuzzifier;
        self.membership
            .columns()
            .into_iter()
            .map(|col| col.iter().map(|u| u.powf(m)).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyConfig {
    pub fuzzifier: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub init: Init,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self { fuzzifier: 2.0, max_iters: 300, tol: 1e-6, init: Init::KMeansPlusPlus }
    }
}

/// Fuzzy memberships `u_nj ∝ (1 / |x_n - c_j|^2)^(1/(m-1))`.
pub fn fuzzy_memberships(points: &Array2<f64>, centroids: &Array2<f64>, fuzzifier: f64) -> Array2<f64> {
    let n = points.nrows();
    let k = centroids.nrows();
    let exponent = 1.0 / (fuzzifier - 1.0);
    let mut u = Array2::zeros((n, k));
    let mut d2 = vec![0.0; k];
    for (i, mut row) in u.rows_mut().into_iter().enumerate() {
        let x = points.row(i);
        for (j, c) in centroids.rows().into_iter().enumerate() {
            d2[j] = sq_dist(x, c);
        }
        let (closest, min_d2) = d2
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
        if min_d2.sqrt() <= SINGULARITY_EPS {
            row[closest] = 1.0;
            continue;
        }
        // scale by the closest distance so weights stay in (0, 1]
        let mut total = 0.0;
        for j in 0..k {
            let ratio = min_d2 / d2[j];
            let w = if exponent == 1.0 { ratio } else { ratio.powf(exponent) };
            row[j] = w;
            total += w;
        }
        row.mapv_inplace(|w| w / total);
    }
    u
}

fn weighted_centroids(points: &Array2<f64>, u: &Array2<f64>, fuzzifier: f64, prev: &Array2<f64>) -> Array2<f64> {
    let (k, d) = prev.dim();
    let mut sums = vec![0.0; k * d];
    let mut mass = vec![0.0; k];
    for (x, ui) in points.rows().into_iter().zip(u.rows()) {
        for j in 0..k {
            let w = if fuzzifier == 2.0 { ui[j] * ui[j] } else { ui[j].powf(fuzzifier) };
            if w == 0.0 {
                continue;
            }
            mass[j] += w;
            for (s, v) in sums[j * d..(j + 1) * d].iter_mut().zip(x.iter()) {
                *s += w * v;
            }
        }
    }
    let mut next = prev.clone();
    for j in 0..k {
        if mass[j] > 0.0 {
            for c in 0..d {
                next[[j, c]] = sums[j * d + c] / mass[j];
            }
        }
    }
    next
}

/// Fuzzy c-means.
pub fn fuzzy_cmeans(points: &Array2<f64>, k: usize, config: &FuzzyConfig, seed: u64) -> Result<FuzzySolution> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if !(config.fuzzifier > 1.0 && config.fuzzifier.is_finite()) {
        return Err(Error::InvalidParameter(format!("fuzzifier must exceed 1, got {}", config.fuzzifier)));
    }
    let mut rng = rng_from_seed(seed);
    let mut centroids = match &config.init {
        Init::KMeansPlusPlus => init_kmeanspp(points, k, &mut rng)?,
        Init::Uniform => init_uniform(points, k, &mut rng)?,
        Init::Given(c) => {
            if c.dim() != (k, points.ncols()) {
                return Err(Error::DimensionMismatch { expected: k * points.ncols(), got: c.len() });
            }
            c.clone()
        }
    };
    let mut iterations = 0;
    while iterations < config.max_iters {
        let u = fuzzy_memberships(points, &centroids, config.fuzzifier);
        let next = weighted_centroids(points, &u, config.fuzzifier, &centroids);
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
    let membership = fuzzy_memberships(points, &centroids, config.fuzzifier);
    Ok(FuzzySolution { centroids, membership, fuzzifier: config.fuzzifier, iterations })
}
