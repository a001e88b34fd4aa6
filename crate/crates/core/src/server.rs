//! Server-side grouping of centroid-radius pairs into global centroids.

use std::cmp::Ordering;

use ndarray::Array2;

use crate::dataset::dist;
use crate::error::{Error, Result};
use crate::radius::CentroidRadius;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupMean {
    #[default]
    Unweighted,
    /// Members weighted by their local cluster size.
    ClusterSize,
}

#[derive(Debug, Clone)]
pub struct AggregationResult {
    /// One row per kept group, in rank order.
    pub final_centroids: Array2<f64>,
    pub groups: Vec<Vec<CentroidRadius>>,
    /// Members of groups cut by the top-k truncation.
    pub discarded: Vec<CentroidRadius>,
    /// Number of groups formed before truncation.
    pub groups_formed: usize,
    /// Fewer than `k` groups were available.
    pub under_supplied: bool,
}

impl AggregationResult {
    pub fn k(&self) -> usize {
        self.groups.len()
    }
}

fn view(p: &CentroidRadius) -> ndarray::ArrayView1<'_, f64> {
    ndarray::ArrayView1::from(&p.centroid[..])
}

/// Greedy largest-radius-first ball grouping, top-`k` selection by group
/// size, and per-group means.
pub fn aggregate(pairs: &[CentroidRadius], k: usize) -> Result<AggregationResult> {
    aggregate_with(pairs, k, GroupMean::Unweighted)
}

pub fn aggregate_with(pairs: &[CentroidRadius], k: usize, mean: GroupMean) -> Result<AggregationResult> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no centroid-radius pairs received".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let d = pairs[0].centroid.len();
    for p in pairs {
        if p.centroid.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.centroid.len() });
        }
        if !(p.radius >= 0.0 && p.radius.is_finite()) || p.centroid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pair ({}, {}) has a non-finite value or negative radius",
                p.client, p.index
            )));
        }
    }

    // Selection order: radius descending, then (client, index).
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&pairs[a], &pairs[b]);
        pb.radius
            .partial_cmp(&pa.radius)
            .unwrap_or(Ordering::Equal)
            .then((pa.client, pa.index).cmp(&(pb.client, pb.index)))
    });

    let mut taken = vec![false; pairs.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &s in &order {
        if taken[s] {
            continue;
        }
        let center = &pairs[s];
        let members: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&j| !taken[j] && dist(view(center), view(&pairs[j])) <= center.radius)
            .collect();
        for &j in &members {
            taken[j] = true;
        }
        groups.push(members);
    }

    let groups_formed = groups.len();
    let mass = |g: &Vec<usize>| g.iter().map(|&j| pairs[j].cluster_size).sum::<usize>();
    let mut rank: Vec<usize> = (0..groups_formed).collect();
    rank.sort_by(|&a, &b| {
        groups[b]
            .len()
            .cmp(&groups[a].len())
            .then(mass(&groups[b]).cmp(&mass(&groups[a])))
            .then(a.cmp(&b))
    });

    let kept = k.min(groups_formed);
    let mut final_centroids = Array2::zeros((kept, d));
    for (row, &g) in rank[..kept].iter().enumerate() {
        let weight = |j: usize| match mean {
            GroupMean::Unweighted => 1.0,
            GroupMean::ClusterSize => pairs[j].cluster_size as f64,
        };
        let mut total: f64 = groups[g].iter().map(|&j| weight(j)).sum();
        let uniform = total <= 0.0;
        if uniform {
            total = groups[g].len() as f64;
        }
        for &j in &groups[g] {
            let w = if uniform { 1.0 } else { weight(j) } / total;
            for (c, v) in pairs[j].centroid.iter().enumerate() {
                final_centroids[[row, c]] += w * v;
            }
        }
    }
    let collect = |gs: &[usize]| -> Vec<Vec<CentroidRadius>> {
        gs.iter().map(|&g| groups[g].iter().map(|&j| pairs[j].clone()).collect()).collect()
    };
    let kept_groups = collect(&rank[..kept]);
    let discarded = collect(&rank[kept..]).into_iter().flatten().collect();
    if kept < k {
        log::info!("only {groups_formed} group(s) formed for k = {k}");
    }
    Ok(AggregationResult { final_centroids, groups: kept_groups, discarded, groups_formed, under_supplied: kept < k })
}
