use ndarray::{array, Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{pairwise_extent, Dataset};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// A point counts as overlapping when another component's density at that
/// point reaches this fraction of its own component's density.
pub const OVERLAP_DENSITY_RATIO: f64 = 0.1;

/// Isotropic Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    pub centers: Array2<f64>,
    pub stddevs: Vec<f64>,
    /// Points drawn from each component.
    pub sizes: Vec<usize>,
}

impl GmmSpec {
    pub fn new(centers: Array2<f64>, stddevs: Vec<f64>, points_per_component: usize) -> Self {
        let k = centers.nrows();
        Self { centers, stddevs, sizes: vec![points_per_component; k] }
    }

    /// `total` points spread as evenly as possible: the first `total % k`
    /// components receive `ceil(total / k)` points, the rest `floor(total / k)`.
    pub fn with_total(centers: Array2<f64>, stddevs: Vec<f64>, total: usize) -> Self {
        let k = centers.nrows().max(1);
        let sizes = (0..centers.nrows())
            .map(|s| total / k + usize::from(s < total % k))
            .collect();
        Self { centers, stddevs, sizes }
    }

    pub fn isotropic(centers: Array2<f64>, stddev: f64, points_per_component: usize) -> Self {
        let k = centers.nrows();
        Self::new(centers, vec![stddev; k], points_per_component)
    }

    pub fn num_components(&self) -> usize {
        self.centers.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.centers.nrows();
        if k == 0 || self.centers.ncols() == 0 {
            return Err(Error::InvalidSpec("mixture needs at least one center in d >= 1".into()));
        }
        if self.stddevs.len() != k || self.sizes.len() != k {
            return Err(Error::InvalidSpec(format!(
                "{k} centers but {} stddevs and {} sizes",
                self.stddevs.len(),
                self.sizes.len()
            )));
        }
        if let Some(s) = self.stddevs.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidSpec(format!("stddev must be positive, got {s}")));
        }
        if self.sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec("every component needs a positive point count".into()));
        }
        if self.centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite center coordinate".into()));
        }
        Ok(())
    }

    /// Fraction of points in `dataset` that sit in an overlap region: some other
    /// component's density is at least [`OVERLAP_DENSITY_RATIO`] of the point's own.
    pub fn overlap_fraction(&self, dataset: &Dataset) -> Result<f64> {
        let labels = dataset.labels().ok_or(Error::MissingLabels)?;
        let d = dataset.dim() as f64;
        let threshold = OVERLAP_DENSITY_RATIO.ln();
        let log_density = |x: ArrayView1<'_, f64>, s: usize| {
            let sd = self.stddevs[s];
            -d * sd.ln() - super::sq_dist(x, self.centers.row(s)) / (2.0 * sd * sd)
        };
        let overlapping = labels
            .iter()
            .enumerate()
            .filter(|&(i, &s)| {
                let x = dataset.point(i);
                let own = log_density(x, s);
                (0..self.num_components())
                    .filter(|&t| t != s)
                    .any(|t| log_density(x, t) - own >= threshold)
            })
            .count();
        Ok(overlapping as f64 / labels.len() as f64)
    }
}

/// Samples a Gaussian mixture. Points are emitted component by component.
pub fn generate_gmm(spec: &GmmSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let d = spec.centers.ncols();
    let n: usize = spec.sizes.iter().sum();
    let mut points = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (s, (&count, &sd)) in spec.sizes.iter().zip(&spec.stddevs).enumerate() {
        let center = spec.centers.row(s);
        for _ in 0..count {
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                points[[row, j]] = center[j] + sd * z;
            }
            labels.push(s);
            row += 1;
        }
    }
    Dataset::new(points, Some(labels), Some(spec.centers.clone()))
}

/// Stochastic Ball Model: uniform samples from disjoint balls of a common radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub centers: Array2<f64>,
    pub radius: f64,
    pub points_per_component: usize,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.centers.nrows() == 0 || self.centers.ncols() == 0 {
            return Err(Error::InvalidSpec("ball model needs at least one center in d >= 1".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidSpec(format!("radius must be positive, got {}", self.radius)));
        }
        if self.points_per_component == 0 {
            return Err(Error::InvalidSpec("points_per_component must be positive".into()));
        }
        if let Some((lo, _)) = pairwise_extent(&self.centers) {
            if lo <= 2.0 * self.radius {
                return Err(Error::InvalidSpec(format!(
                    "balls overlap: closest centers are {lo} apart but 2r = {}",
                    2.0 * self.radius
                )));
            }
        }
        Ok(())
    }

    /// Minimum pairwise center distance (`None` for a single ball).
    pub fn delta_min(&self) -> Option<f64> {
        pairwise_extent(&self.centers).map(|(lo, _)| lo)
    }

    pub fn delta_max(&self) -> Option<f64> {
        pairwise_extent(&self.centers).map(|(_, hi)| hi)
    }

    /// Three unit balls in the plane at the corners of an equilateral triangle
    /// with side `2e6`, 200 points each. Satisfies the separation required by
    /// the recovery guarantee for `lambda = 3`, `eta = 5`.
    pub fn theorem_preset() -> Self {
        let side = 2.0e6;
        let h = side * 3f64.sqrt() / 2.0;
        Self {
            centers: array![[0.0, 0.0], [side, 0.0], [side / 2.0, h]],
            radius: 1.0,
            points_per_component: 200,
        }
    }
}

/// Uniform draw from the unit ball in `R^d`: Gaussian direction scaled by `u^(1/d)`.
pub fn sample_unit_ball(rng: &mut Rng, d: usize) -> Vec<f64> {
    let mut v: Vec<f64>;
    let mut norm;
    loop {
        v = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            break;
        }
    }
    let u: f64 = rng.random();
    let scale = u.powf(1.0 / d as f64) / norm;
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

pub fn generate_sbm(spec: &SbmSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let (k, d) = spec.centers.dim();
    let n = k * spec.points_per_component;
    let mut points = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for s in 0..k {
        for t in 0..spec.points_per_component {
            let u = sample_unit_ball(&mut rng, d);
            let row = s * spec.points_per_component + t;
            for j in 0..d {
                points[[row, j]] = spec.centers[[s, j]] + spec.radius * u[j];
            }
            labels.push(s);
        }
    }
    Dataset::new(points, Some(labels), Some(spec.centers.clone()))
}

/// Stand-ins for the four S-sets benchmarks: 15 Gaussian clusters on a fixed
/// planar layout (coordinates in the 1e5..1e6 range), 5000 points, with a
/// shared stddev per set tuned so that labelling every point by its nearest
/// true center reaches the set's reference purity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsetPreset {
    S1,
    S2,
    S3,
    S4,
}

const SSET_CENTERS: [[f64; 2]; 15] = [
    [604328.0, 574379.0],
    [801908.0, 318382.0],
    [416383.0, 786204.0],
    [822771.0, 732034.0],
    [850993.0, 157873.0],
    [338586.0, 563537.0],
    [169274.0, 348574.0],
    [619259.0, 397671.0],
    [241071.0, 844424.0],
    [321801.0, 165319.0],
    [139493.0, 557352.0],
    [508785.0, 174800.0],
    [398934.0, 404142.0],
    [860807.0, 546465.0],
    [672578.0, 861275.0],
];

pub const SSET_POINTS: usize = 5000;

impl SsetPreset {
    pub const ALL: [SsetPreset; 4] = [SsetPreset::S1, SsetPreset::S2, SsetPreset::S3, SsetPreset::S4];

    pub fn name(self) -> &'static str {
        match self {
            SsetPreset::S1 => "s1",
            SsetPreset::S2 => "s2",
            SsetPreset::S3 => "s3",
            SsetPreset::S4 => "s4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    /// Nominal overlap fraction of the benchmark this preset imitates.
    pub fn nominal_overlap(self) -> f64 {
        match self {
            SsetPreset::S1 => 0.09,
            SsetPreset::S2 => 0.22,
            SsetPreset::S3 => 0.41,
            SsetPreset::S4 => 0.44,
        }
    }

    /// Purity of the nearest-true-center labelling the stddev is tuned to.
    pub fn reference_purity(self) -> f64 {
        match self {
            SsetPreset::S1 => 0.99,
            SsetPreset::S2 => 0.97,
            SsetPreset::S3 => 0.86,
            SsetPreset::S4 => 0.80,
        }
    }

    pub fn stddev(self) -> f64 {
        match self {
            SsetPreset::S1 => 37_550.0,
            SsetPreset::S2 => 44_800.0,
            SsetPreset::S3 => 64_860.0,
            SsetPreset::S4 => 73_720.0,
        }
    }

    pub fn centers() -> Array2<f64> {
        Array2::from_shape_fn((15, 2), |(i, j)| SSET_CENTERS[i][j])
    }

    pub fn spec(self) -> GmmSpec {
        GmmSpec::with_total(Self::centers(), vec![self.stddev(); 15], SSET_POINTS)
    }

    pub fn generate(self, seed: u64) -> Result<Dataset> {
        generate_gmm(&self.spec(), seed)
    }
}
