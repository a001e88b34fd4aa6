//! Comparison methods: matched averaging (M-Avg), k-FED and federated fuzzy
//! c-means (two server variants).

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::assignment::min_cost_assignment;
use crate::dataset::{dist, sq_dist, Dataset, PartitionPlan};
use crate::error::{Error, Result};
use crate::kmeans::{fuzzy_cmeans, lloyd, weighted_lloyd, FuzzyConfig, Init, LloydConfig};
use crate::rng::derive_seed;

/// Alignment of every client's centroids to the reference set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchPlan {
    pub reference: usize,
    /// `permutations[c][j]`: index of client `c`'s centroid matched to
    /// reference centroid `j`.
    pub permutations: Vec<Vec<usize>>,
}

/// Reference index `j` -> index in `other` minimizing total squared distance.
fn align(reference: &Array2<f64>, other: &Array2<f64>) -> Result<Vec<usize>> {
    let cost = Array2::from_shape_fn((reference.nrows(), other.nrows()), |(i, j)| {
        sq_dist(reference.row(i), other.row(j))
    });
    Ok(min_cost_assignment(&cost)?.into_iter().map(|(_, j)| j).collect())
}

fn check_sets(sets: &[Array2<f64>]) -> Result<(usize, usize)> {
    let first = sets.first().ok_or_else(|| Error::EmptyInput("no client centroid sets".into()))?;
    let (k, d) = first.dim();
    if k == 0 {
        return Err(Error::EmptyInput("client 0 supplied no centroids".into()));
    }
    for s in sets {
        if s.nrows() != k {
            return Err(Error::TooFewCentroids { needed: k, got: s.nrows() });
        }
        if s.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: s.ncols() });
        }
    }
    Ok((k, d))
}

/// Aligns every set to the first one and averages matched centroids.
pub fn match_average(sets: &[Array2<f64>]) -> Result<(Array2<f64>, MatchPlan)> {
    let (k, d) = check_sets(sets)?;
    let permutations = sets.iter().map(|s| align(&sets[0], s)).collect::<Result<Vec<_>>>()?;
    let mut out = Array2::zeros((k, d));
    for (s, perm) in sets.iter().zip(&permutations) {
        for (j, &i) in perm.iter().enumerate() {
            out.row_mut(j).scaled_add(1.0, &s.row(i));
        }
    }
    out /= sets.len() as f64;
    Ok((out, MatchPlan { reference: 0, permutations }))
}

/// Each client's points, in client order.
pub fn client_points(dataset: &Dataset, plan: &PartitionPlan) -> Result<Vec<Array2<f64>>> {
    if plan.num_points() != dataset.len() {
        return Err(Error::LengthMismatch { left: dataset.len(), right: plan.num_points() });
    }
    Ok(plan.clients().iter().map(|idx| dataset.points().select(Axis(0), idx)).collect())
}

#[derive(Debug, Clone)]
pub struct MAvgRun {
    pub centroids: Array2<f64>,
    pub plan: MatchPlan,
    /// Clients left out for holding fewer than `k` points.
    pub skipped: Vec<usize>,
}

/// Local Lloyd with `k` on every client, then matched averaging against the
/// first participating client.
pub fn m_avg(dataset: &Dataset, plan: &PartitionPlan, k: usize, seed: u64) -> Result<MAvgRun> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let parts = client_points(dataset, plan)?;
    let skipped: Vec<usize> = (0..parts.len()).filter(|&c| parts[c].nrows() < k).collect();
    if !skipped.is_empty() {
        log::info!("m-avg skips clients {skipped:?} holding fewer than {k} points");
    }
    let sets = parts
        .par_iter()
        .enumerate()
        .filter(|(_, p)| p.nrows() >= k)
        .map(|(c, p)| lloyd(p, k, &LloydConfig::default(), derive_seed(seed, c as u64)).map(|s| s.centroids))
        .collect::<Result<Vec<_>>>()?;
    if sets.is_empty() {
        return Err(Error::TooFewCentroids { needed: k, got: 0 });
    }
    let (centroids, mut matching) = match_average(&sets)?;
    matching.reference = (0..parts.len()).find(|c| !skipped.contains(c)).unwrap_or(0);
    Ok(MAvgRun { centroids, plan: matching, skipped })
}

/// Server step of k-FED on pooled client centroids (in client order).
///
/// The first client's centroids seed the center set. Remaining centroids are
/// swept in order and admitted when farther from every center than half the
/// current minimum center gap. Shortfalls are filled farthest-point first.
/// Every pooled centroid then joins its nearest center and the outputs are
/// the per-center means.
pub fn k_fed_server(sets: &[Array2<f64>], k: usize) -> Result<Array2<f64>> {
    let total: usize = sets.iter().map(Array2::nrows).sum();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if total < k {
        return Err(Error::TooFewCentroids { needed: k, got: total });
    }
    let d = sets.iter().find(|s| s.nrows() > 0).map_or(0, Array2::ncols);
    if let Some(bad) = sets.iter().find(|s| s.nrows() > 0 && s.ncols() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.ncols() });
    }
    let pooled: Vec<ndarray::ArrayView1<'_, f64>> = sets.iter().flat_map(|s| s.rows().into_iter()).collect();
    let first = sets.iter().position(|s| s.nrows() > 0).expect("total >= k >= 1");
    let mut chosen: Vec<usize> = {
        let offset: usize = sets[..first].iter().map(Array2::nrows).sum();
        (offset..offset + sets[first].nrows().min(k)).collect()
    };
    let min_gap = |chosen: &[usize]| {
        let mut g = f64::INFINITY;
        for (a, &i) in chosen.iter().enumerate() {
            for &j in &chosen[a + 1..] {
                g = g.min(dist(pooled[i], pooled[j]));
            }
        }
        g
    };
    let to_centers = |i: usize, chosen: &[usize]| {
        chosen.iter().map(|&c| dist(pooled[i], pooled[c])).fold(f64::INFINITY, f64::min)
    };
    let start: usize = sets[..=first].iter().map(Array2::nrows).sum();
    for i in start..pooled.len() {
        if chosen.len() >= k {
            break;
        }
        let gap = if chosen.len() < 2 { 0.0 } else { min_gap(&chosen) };
        if to_centers(i, &chosen) > gap / 2.0 {
            chosen.push(i);
        }
    }
    while chosen.len() < k {
        let next = (0..pooled.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, to_centers(i, &chosen)))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, b)) if b >= d => best,
                _ => Some((i, d)),
            })
            .expect("total >= k");
        chosen.push(next.0);
    }
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for row in &pooled {
        let j = (0..k)
            .map(|j| (j, sq_dist(*row, pooled[chosen[j]])))
            .fold((0, f64::INFINITY), |b, (j, d)| if d < b.1 { (j, d) } else { b })
            .0;
        sums.row_mut(j).scaled_add(1.0, row);
        counts[j] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        // every center is itself a pooled centroid, so c >= 1
        sums.row_mut(j).mapv_inplace(|v| v / c as f64);
    }
    Ok(sums)
}

/// k-FED: Lloyd with `k_prime` on each client, then the one-shot server step.
pub fn k_fed(dataset: &Dataset, plan: &PartitionPlan, k: usize, k_prime: usize, seed: u64) -> Result<Array2<f64>> {
    if k_prime == 0 || k_prime > k {
        return Err(Error::InvalidParameter(format!("k' must lie in 1..={k}, got {k_prime}")));
    }
    let parts = client_points(dataset, plan)?;
    let sets = parts
        .par_iter()
        .enumerate()
        .filter(|(_, p)| p.nrows() > 0)
        .map(|(c, p)| {
            let kp = k_prime.min(p.nrows());
            lloyd(p, kp, &LloydConfig::default(), derive_seed(seed, c as u64)).map(|s| s.centroids)
        })
        .collect::<Result<Vec<_>>>()?;
    k_fed_server(&sets, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfcmVariant {
    /// Membership-mass weighted averaging of matched centroids.
    V1,
    /// Weighted Lloyd over all pooled client centroids.
    V2,
}

impl FfcmVariant {
    pub fn name(self) -> &'static str {
        match self {
            FfcmVariant::V1 => "ffcm-v1",
            FfcmVariant::V2 => "ffcm-v2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FfcmRun {
    pub centroids: Array2<f64>,
    pub rounds: usize,
    pub skipped: Vec<usize>,
}

/// Multi-round federated fuzzy c-means. Clients holding fewer than `k`
/// points sit out.
pub fn ffcm(
    dataset: &Dataset,
    plan: &PartitionPlan,
    k: usize,
    rounds: usize,
    variant: FfcmVariant,
    fuzzifier: f64,
    seed: u64,
) -> Result<FfcmRun> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let parts = client_points(dataset, plan)?;
    let skipped: Vec<usize> = (0..parts.len()).filter(|&c| parts[c].nrows() < k).collect();
    if skipped.len() == parts.len() {
        return Err(Error::TooFewCentroids { needed: k, got: 0 });
    }
    if !skipped.is_empty() {
        log::info!("ffcm skips clients {skipped:?} holding fewer than {k} points");
    }
    let mut global: Option<Array2<f64>> = None;
    for round in 0..rounds {
        let init = global.clone().map_or(Init::KMeansPlusPlus, Init::Given);
        let cfg = FuzzyConfig { fuzzifier, init, ..FuzzyConfig::default() };
        let local: Vec<(Array2<f64>, Vec<f64>)> = parts
            .par_iter()
            .enumerate()
            .filter(|(_, p)| p.nrows() >= k)
            .map(|(c, p)| {
                let s = fuzzy_cmeans(p, k, &cfg, derive_seed(derive_seed(seed, c as u64), round as u64))?;
                let mass = s.mass();
                Ok((s.centroids, mass))
            })
            .collect::<Result<_>>()?;
        let next = match variant {
            FfcmVariant::V1 => {
                let reference = global.clone().unwrap_or_else(|| local[0].0.clone());
                weighted_match_average(&reference, &local)?
            }
            FfcmVariant::V2 => {
                let d = local[0].0.ncols();
                let pooled = Array2::from_shape_fn((local.len() * k, d), |(r, c)| local[r / k].0[[r % k, c]]);
                let mut weights: Vec<f64> = local.iter().flat_map(|(_, m)| m.iter().copied()).collect();
                if weights.iter().all(|w| *w == 0.0) {
                    weights.iter_mut().for_each(|w| *w = 1.0);
                }
                let cfg = LloydConfig::with_init(global.clone().map_or(Init::KMeansPlusPlus, Init::Given));
                weighted_lloyd(&pooled, &weights, k, &cfg, derive_seed(seed, u64::MAX - round as u64))?.centroids
            }
        };
        global = Some(next);
    }
    Ok(FfcmRun { centroids: global.expect("rounds >= 1"), rounds, skipped })
}

/// Aligns each client set to `reference` and averages matched centroids
/// weighted by membership mass.
fn weighted_match_average(reference: &Array2<f64>, local: &[(Array2<f64>, Vec<f64>)]) -> Result<Array2<f64>> {
    let (k, d) = reference.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut plain = Array2::<f64>::zeros((k, d));
    let mut mass = vec![0.0; k];
    for (set, m) in local {
        for (j, i) in align(reference, set)?.into_iter().enumerate() {
            sums.row_mut(j).scaled_add(m[i], &set.row(i));
            plain.row_mut(j).scaled_add(1.0, &set.row(i));
            mass[j] += m[i];
        }
    }
    for j in 0..k {
        if mass[j] > 0.0 {
            let row = &sums.row(j) / mass[j];
            plain.row_mut(j).assign(&row);
        } else {
            plain.row_mut(j).mapv_inplace(|v| v / local.len() as f64);
        }
    }
    Ok(plain)
}
