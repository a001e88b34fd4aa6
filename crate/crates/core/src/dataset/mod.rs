//! Datasets, synthetic generators and federated partitioners.

mod io;
mod partition;
mod synth;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub use io::{
    load_centroids_csv, load_csv, load_plan_csv, save_centroids_csv, save_csv, save_plan_csv,
};
pub use partition::{
    partition_dirichlet, partition_dirichlet_nonempty, partition_fraction, partition_iid,
    sample_dirichlet, PartitionPlan,
};
pub use synth::{
    generate_gmm, generate_sbm, sample_unit_ball, GmmSpec, SbmSpec, SsetPreset, OVERLAP_DENSITY_RATIO,
};

/// A point cloud in `R^d` with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
    true_centers: Option<Array2<f64>>,
}

impl Dataset {
    pub fn new(
        points: Array2<f64>,
        labels: Option<Vec<usize>>,
        true_centers: Option<Array2<f64>>,
    ) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("need N >= 1 and d >= 1, got {n}x{d}")));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite coordinate at point {} column {}",
                pos / d,
                pos % d
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::LengthMismatch { left: n, right: labels.len() });
            }
        }
        if let Some(centers) = &true_centers {
            if centers.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: centers.ncols() });
            }
            if centers.nrows() == 0 {
                return Err(Error::InvalidDataset("true_centers has no rows".into()));
            }
            if let Some(labels) = &labels {
                let k = centers.nrows();
                if let Some(bad) = labels.iter().find(|&&l| l >= k) {
                    return Err(Error::InvalidDataset(format!(
                        "label {bad} out of range for {k} true centers"
                    )));
                }
            }
        }
        Ok(Self { points, labels, true_centers })
    }

    pub fn from_points(points: Array2<f64>) -> Result<Self> {
        Self::new(points, None, None)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn true_centers(&self) -> Option<&Array2<f64>> {
        self.true_centers.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Number of distinct classes implied by labels (max label + 1), or by true centers.
    pub fn num_classes(&self) -> Option<usize> {
        match (&self.true_centers, &self.labels) {
            (Some(c), _) => Some(c.nrows()),
            (None, Some(l)) => l.iter().max().map(|m| m + 1),
            _ => None,
        }
    }

    /// Rows `indices` as a new dataset. Ground-truth centers are carried over unchanged.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset of zero points".into()));
        }
        let points = self.points.select(Axis(0), indices);
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(Dataset { points, labels, true_centers: self.true_centers.clone() })
    }

    pub fn with_true_centers(mut self, centers: Array2<f64>) -> Result<Self> {
        self.true_centers = Some(centers);
        Self::new(self.points, self.labels, self.true_centers)
    }
}

/// Squared Euclidean distance between two equally long vectors.
#[inline]
pub fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        _ => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

#[inline]
pub fn dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Minimum and maximum pairwise distance between rows.
pub fn pairwise_extent(centers: &Array2<f64>) -> Option<(f64, f64)> {
    let k = centers.nrows();
    if k < 2 {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = dist(centers.row(i), centers.row(j));
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Some((lo, hi))
}
