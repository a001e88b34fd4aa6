//! Per-client radius assignment for refined centroids.

use std::path::Path;

use ndarray::Array2;

use crate::client_update::RefinedSolution;
use crate::dataset::dist;
use crate::error::{Error, Result};

/// Radius emitted for a centroid whose radius would otherwise be zero.
pub const DEFAULT_RADIUS_FLOOR: f64 = 1e-9;

/// A centroid with its grouping radius: the unit a client ships to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidRadius {
    pub client: usize,
    /// Position within the client's payload.
    pub index: usize,
    pub centroid: Vec<f64>,
    pub radius: f64,
    pub cluster_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusVariant {
    /// One radius per client: half the minimum distance between
    /// non-overlapping centroids.
    Theoretical,
    /// One radius per centroid: min(cluster extent, half the distance to the
    /// nearest sibling).
    #[default]
    Empirical,
}

impl RadiusVariant {
    pub fn name(self) -> &'static str {
        match self {
            RadiusVariant::Theoretical => "theoretical",
            RadiusVariant::Empirical => "empirical",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "theoretical" => Some(Self::Theoretical),
            "empirical" => Some(Self::Empirical),
            _ => None,
        }
    }
}

/// Largest distance from a centroid to a member of its cluster.
fn extents(refined: &RefinedSolution, points: &Array2<f64>) -> Vec<Option<f64>> {
    refined
        .clusters
        .iter()
        .enumerate()
        .map(|(j, members)| {
            members
                .iter()
                .map(|&i| dist(points.row(i), refined.centroids.row(j)))
                .reduce(f64::max)
        })
        .collect()
}

fn nearest_other(centroids: &Array2<f64>, i: usize, among: impl Iterator<Item = usize>) -> Option<(usize, f64)> {
    among
        .filter(|&j| j != i)
        .map(|j| (j, dist(centroids.row(i), centroids.row(j))))
        .fold(None, |best, (j, d)| match best {
            Some((_, b)) if b <= d => best,
            _ => Some((j, d)),
        })
}

fn emit(refined: &RefinedSolution, client: usize, radius: impl Fn(usize) -> f64) -> Vec<CentroidRadius> {
    (0..refined.len())
        .map(|j| CentroidRadius {
            client,
            index: j,
            centroid: refined.centroids.row(j).to_vec(),
            radius: radius(j),
            cluster_size: refined.clusters[j].len(),
        })
        .collect()
}

/// Uniform client radius.
///
/// Centroids whose cluster extents overlap their nearest neighbour's are set
/// aside (both of them), the minimum pairwise distance among the rest is
/// halved, and that radius goes to every centroid of the refined set,
/// including the ones set aside. Empty clusters have no extent and never
/// take part in the minimum-distance computation.
pub fn assign_theoretical(
    refined: &RefinedSolution,
    points: &Array2<f64>,
    client: usize,
) -> Result<Vec<CentroidRadius>> {
    let n = refined.len();
    if n < 2 {
        return Err(Error::DegenerateRadius(format!("client {client} has {n} centroid(s)")));
    }
    let extent = extents(refined, points);
    let mut kept: Vec<bool> = extent.iter().map(Option::is_some).collect();
    for i in 0..n {
        if !kept[i] {
            continue;
        }
        let live = (0..n).filter(|&j| kept[j]);
        if let Some((j, d)) = nearest_other(&refined.centroids, i, live) {
            let (ri, rj) = (extent[i].unwrap_or(0.0), extent[j].unwrap_or(0.0));
            if ri + rj > d || d == 0.0 {
                kept[i] = false;
                kept[j] = false;
            }
        }
    }
    let survivors: Vec<usize> = (0..n).filter(|&j| kept[j]).collect();
    if survivors.len() < 2 {
        return Err(Error::DegenerateRadius(format!(
            "client {client}: {} centroid(s) left after the overlap filter",
            survivors.len()
        )));
    }
    let mut delta = f64::INFINITY;
    for (a, &i) in survivors.iter().enumerate() {
        for &j in &survivors[a + 1..] {
            delta = delta.min(dist(refined.centroids.row(i), refined.centroids.row(j)));
        }
    }
    let radius = delta / 2.0;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::DegenerateRadius(format!("client {client}: radius {radius}")));
    }
    Ok(emit(refined, client, |_| radius))
}

/// Per-centroid radius `min(r', r'')` with `r'` the cluster extent and `r''`
/// half the distance to the nearest sibling centroid.
///
/// Missing terms fall back to the other one: an empty cluster gets `r''`, a
/// lone centroid gets `r'`. Zero or undefined radii become `floor`.
pub fn assign_empirical(
    refined: &RefinedSolution,
    points: &Array2<f64>,
    client: usize,
    floor: f64,
) -> Result<Vec<CentroidRadius>> {
    if refined.is_empty() {
        return Err(Error::EmptyInput(format!("client {client} has no centroids")));
    }
    let extent = extents(refined, points);
    let n = refined.len();
    Ok(emit(refined, client, |i| {
        let half_gap = nearest_other(&refined.centroids, i, 0..n).map(|(_, d)| d / 2.0);
        let r = match (extent[i], half_gap) {
            (Some(a), Some(b)) => a.min(b),
            (None, Some(b)) => b,
            (Some(a), None) => a,
            (None, None) => floor,
        };
        if r > 0.0 { r } else { floor }
    }))
}

/// Runs the requested variant; a degenerate theoretical radius falls back to
/// the empirical one.
pub fn assign_radii(
    refined: &RefinedSolution,
    points: &Array2<f64>,
    client: usize,
    variant: RadiusVariant,
    floor: f64,
) -> Result<Vec<CentroidRadius>> {
    match variant {
        RadiusVariant::Empirical => assign_empirical(refined, points, client, floor),
        RadiusVariant::Theoretical => match assign_theoretical(refined, points, client) {
            Ok(pairs) => Ok(pairs),
            Err(Error::DegenerateRadius(why)) => {
                log::warn!("{why}; using empirical radii");
                assign_empirical(refined, points, client, floor)
            }
            Err(e) => Err(e),
        },
    }
}

/// Writes a payload as `client,x0,..,x{d-1},radius,cluster_size`.
pub fn save_payload_csv(pairs: &[CentroidRadius], path: impl AsRef<Path>) -> Result<()> {
    let d = pairs.first().map_or(0, |p| p.centroid.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["client".to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.extend(["radius".to_string(), "cluster_size".to_string()]);
    w.write_record(&header)?;
    for p in pairs {
        let mut rec = vec![p.client.to_string()];
        rec.extend(p.centroid.iter().map(|v| v.to_string()));
        rec.push(p.radius.to_string());
        rec.push(p.cluster_size.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a payload file. Centroid indices are positions within each client.
pub fn load_payload_csv(path: impl AsRef<Path>) -> Result<Vec<CentroidRadius>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let width = reader.headers()?.len();
    if width < 4 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected client,x0,..,radius,cluster_size".into(),
        });
    }
    let mut out: Vec<CentroidRadius> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        if record.len() != width {
            return Err(err(format!("expected {width} fields, found {}", record.len())));
        }
        let num = |f: &str| f.parse::<f64>().map_err(|_| err(format!("non-numeric value {f:?}")));
        let int = |f: &str| f.parse::<usize>().map_err(|_| err(format!("invalid integer {f:?}")));
        let client = int(&record[0])?;
        let centroid = (1..width - 2).map(|c| num(&record[c])).collect::<Result<Vec<_>>>()?;
        let radius = num(&record[width - 2])?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(err(format!("radius must be positive, got {radius}")));
        }
        let index = out.iter().filter(|p| p.client == client).count();
        out.push(CentroidRadius { client, index, centroid, radius, cluster_size: int(&record[width - 1])? });
    }
    Ok(out)
}
