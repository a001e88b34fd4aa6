//! Evaluation: matched center distance, Purity, NMI and the σ diagnostic.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{Array2, ArrayView1};

use crate::assignment::min_cost_assignment;
use crate::dataset::{dist, Dataset};
use crate::error::{Error, Result};
use crate::kmeans::assign;
use crate::radius::CentroidRadius;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedDistance {
    /// Mean ℓ2 distance over matched pairs.
    pub mean: f64,
    /// Mean squared ℓ2 distance over matched pairs.
    pub mean_squared: f64,
    pub unmatched_true_centers: usize,
}

/// One-to-one matching of recovered centroids to true centers minimizing
/// total ℓ2 distance.
pub fn matched_center_distance(recovered: &Array2<f64>, true_centers: &Array2<f64>) -> Result<MatchedDistance> {
    if recovered.nrows() == 0 || true_centers.nrows() == 0 {
        return Err(Error::EmptyInput("matched distance needs both centroid sets".into()));
    }
    if recovered.ncols() != true_centers.ncols() {
        return Err(Error::DimensionMismatch { expected: true_centers.ncols(), got: recovered.ncols() });
    }
    let cost = Array2::from_shape_fn((recovered.nrows(), true_centers.nrows()), |(i, j)| {
        dist(recovered.row(i), true_centers.row(j))
    });
    let pairs = min_cost_assignment(&cost)?;
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|&(i, j)| cost[[i, j]]).sum::<f64>() / n;
    let mean_squared = pairs.iter().map(|&(i, j)| cost[[i, j]].powi(2)).sum::<f64>() / n;
    Ok(MatchedDistance { mean, mean_squared, unmatched_true_centers: true_centers.nrows() - pairs.len() })
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("no points to score".into()));
    }
    Ok(())
}

fn contingency(a: &[usize], b: &[usize]) -> BTreeMap<(usize, usize), usize> {
    let mut table = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
    }
    table
}

fn counts(a: &[usize]) -> BTreeMap<usize, usize> {
    let mut table = BTreeMap::new();
    for &x in a {
        *table.entry(x).or_insert(0) += 1;
    }
    table
}

/// Fraction of points whose cluster's plurality class is their own class.
pub fn purity(assignment: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(assignment, labels)?;
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for ((cluster, _), count) in contingency(assignment, labels) {
        let e = best.entry(cluster).or_insert(0);
        *e = (*e).max(count);
    }
    Ok(best.values().sum::<usize>() as f64 / assignment.len() as f64)
}

fn entropy(table: &BTreeMap<usize, usize>, n: f64) -> f64 {
    table.values().map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// Normalized mutual information `2 I / (H(X) + H(Y))`.
///
/// Two constant partitions score 1; exactly one constant partition scores 0.
pub fn nmi(assignment: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(assignment, labels)?;
    let n = assignment.len() as f64;
    let (ca, cb) = (counts(assignment), counts(labels));
    let (ha, hb) = (entropy(&ca, n), entropy(&cb, n));
    match (ca.len() == 1, cb.len() == 1) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mutual: f64 = contingency(assignment, labels)
        .into_iter()
        .map(|((x, y), c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (ca[&x] as f64 * cb[&y] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mutual / (ha + hb)).clamp(0.0, 1.0))
}

fn nearest_center(c: ArrayView1<'_, f64>, centers: &Array2<f64>) -> (usize, f64) {
    centers
        .rows()
        .into_iter()
        .map(|t| dist(c, t))
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, d)| if d < best.1 { (j, d) } else { best })
}

/// `σ_i = |c_i - θ_s| / r_s` for every pair, with `θ_s` the true center
/// nearest to `c_i` and `r_s` the largest radius among pairs fitted to `θ_s`
/// (the pair the server would select first for that center).
pub fn sigma_diagnostic(pairs: &[CentroidRadius], true_centers: &Array2<f64>) -> Result<Vec<f64>> {
    if true_centers.nrows() == 0 {
        return Err(Error::MissingTrueCenters);
    }
    let fitted: Vec<(usize, f64)> = pairs
        .iter()
        .map(|p| {
            if p.centroid.len() != true_centers.ncols() {
                return Err(Error::DimensionMismatch { expected: true_centers.ncols(), got: p.centroid.len() });
            }
            if !(p.radius > 0.0) {
                return Err(Error::DegenerateRadius(format!("pair ({}, {}) has radius {}", p.client, p.index, p.radius)));
            }
            Ok(nearest_center(ArrayView1::from(&p.centroid[..]), true_centers))
        })
        .collect::<Result<_>>()?;
    let mut r_s = vec![0.0f64; true_centers.nrows()];
    for (p, &(s, _)) in pairs.iter().zip(&fitted) {
        r_s[s] = r_s[s].max(p.radius);
    }
    Ok(fitted.iter().map(|&(s, d)| d / r_s[s]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub seed: u64,
    /// Number of centroids the method returned.
    pub k_out: usize,
    pub matched_l2: Option<f64>,
    pub matched_mse: Option<f64>,
    pub unmatched_true_centers: Option<usize>,
    pub purity: Option<f64>,
    pub nmi: Option<f64>,
    /// k-means objective of the dataset under the returned centroids.
    pub objective: f64,
    pub sigma_max: Option<f64>,
    pub metadata: Vec<(String, String)>,
}

impl EvalReport {
    pub const HEADER: [&'static str; 12] = [
        "method",
        "seed",
        "k_out",
        "matched_l2",
        "matched_mse",
        "unmatched_true_centers",
        "purity",
        "nmi",
        "objective",
        "sigma_max",
        "rounds",
        "metadata",
    ];

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn record(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        vec![
            self.method.clone(),
            self.seed.to_string(),
            self.k_out.to_string(),
            opt(self.matched_l2),
            opt(self.matched_mse),
            opt(self.unmatched_true_centers),
            opt(self.purity),
            opt(self.nmi),
            self.objective.to_string(),
            opt(self.sigma_max),
            self.meta("rounds").unwrap_or("1").to_string(),
            self.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
        ]
    }
}

/// Scores centroids against a dataset. Matched distances need true centers,
/// Purity and NMI need labels; missing ground truth leaves those fields empty.
pub fn evaluate(
    method: &str,
    seed: u64,
    dataset: &Dataset,
    centroids: &Array2<f64>,
    pairs: Option<&[CentroidRadius]>,
    metadata: Vec<(String, String)>,
) -> Result<EvalReport> {
    if centroids.nrows() == 0 {
        return Err(Error::EmptyInput("no centroids to evaluate".into()));
    }
    if centroids.ncols() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: dataset.dim(), got: centroids.ncols() });
    }
    let (assignment, d2) = assign(dataset.points(), centroids);
    let matched = dataset.true_centers().map(|t| matched_center_distance(centroids, t)).transpose()?;
    let (purity, nmi) = match dataset.labels() {
        Some(l) => (Some(purity(&assignment, l)?), Some(nmi(&assignment, l)?)),
        None => (None, None),
    };
    let sigma_max = match (pairs, dataset.true_centers()) {
        (Some(p), Some(t)) if !p.is_empty() => {
            sigma_diagnostic(p, t)?.into_iter().reduce(f64::max)
        }
        _ => None,
    };
    Ok(EvalReport {
        method: method.to_string(),
        seed,
        k_out: centroids.nrows(),
        matched_l2: matched.map(|m| m.mean),
        matched_mse: matched.map(|m| m.mean_squared),
        unmatched_true_centers: matched.map(|m| m.unmatched_true_centers),
        purity,
        nmi,
        objective: d2.iter().sum(),
        sigma_max,
        metadata,
    })
}

/// Writes reports as CSV with a fixed column order.
pub fn write_reports<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EvalReport::HEADER)?;
    for r in reports {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    /// Plug-in mutual information and entropies by direct enumeration over
    /// all label values.
    fn nmi_oracle(x: &[usize], y: &[usize]) -> f64 {
        let n = x.len() as f64;
        let xs: Vec<usize> = { let mut v = x.to_vec(); v.sort(); v.dedup(); v };
        let ys: Vec<usize> = { let mut v = y.to_vec(); v.sort(); v.dedup(); v };
        let p = |f: &dyn Fn(usize) -> bool| (0..x.len()).filter(|&i| f(i)).count() as f64 / n;
        let h = |vals: &[usize], s: &[usize]| -> f64 {
            vals.iter().map(|&v| p(&|i| s[i] == v)).filter(|&q| q > 0.0).map(|q| -q * q.ln()).sum()
        };
        let mut i_xy = 0.0;
        for &a in &xs {
            for &b in &ys {
                let pab = p(&|i| x[i] == a && y[i] == b);
                if pab > 0.0 {
                    i_xy += pab * (pab / (p(&|i| x[i] == a) * p(&|i| y[i] == b))).ln();
                }
            }
        }
        2.0 * i_xy / (h(&xs, x) + h(&ys, y))
    }

    #[test]
    fn matched_permuted_is_zero() {
        let t = array![[0.0, 0.0], [5.0, 1.0], [-3.0, 2.0]];
        let r = array![[-3.0, 2.0], [0.0, 0.0], [5.0, 1.0]];
        let m = matched_center_distance(&r, &t).unwrap();
        assert_eq!((m.mean, m.mean_squared, m.unmatched_true_centers), (0.0, 0.0, 0));
    }

    #[test]
    fn matched_partial() {
        let m = matched_center_distance(&array![[0.0, 0.0]], &array![[0.0, 0.0], [5.0, 0.0]]).unwrap();
        assert_eq!((m.mean, m.unmatched_true_centers), (0.0, 1));
    }

    #[test]
    fn matched_two_by_two() {
        let r = array![[1.0, 0.0], [0.0, 1.0]];
        let t = array![[0.0, 0.0], [2.0, 2.0]];
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let straight = d([1.0, 0.0], [0.0, 0.0]) + d([0.0, 1.0], [2.0, 2.0]);
        let crossed = d([1.0, 0.0], [2.0, 2.0]) + d([0.0, 1.0], [0.0, 0.0]);
        let want = straight.min(crossed) / 2.0;
        let m = matched_center_distance(&r, &t).unwrap();
        assert!((m.mean - want).abs() < 1e-9);
        assert!((m.mean - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
        assert!(matched_center_distance(&Array2::zeros((0, 2)), &t).is_err());
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[0, 1, 2, 2], &[3, 4, 5, 5]).unwrap(), 1.0);
        assert!((purity(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() - 0.5).abs() < 1e-9);
        assert!((purity(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(purity(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1, 2], &[5, 5, 7, 7, 9]).unwrap() - 1.0).abs() < 1e-9);
        // parity vs half-index on four points: every cell holds one point
        let parity = [0, 1, 0, 1];
        let half = [0, 0, 1, 1];
        assert!(nmi(&parity, &half).unwrap().abs() < 1e-9);
        let (x, y) = ([0, 0, 1, 1], [0, 0, 0, 1]);
        assert!((nmi(&x, &y).unwrap() - nmi_oracle(&x, &y)).abs() < 1e-9);
        assert_eq!(nmi(&[1, 1, 1], &[2, 2, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[1, 1, 1], &[0, 1, 2]).unwrap(), 0.0);
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn sigma_examples() {
        let t = array![[0.0, 0.0], [10.0, 0.0]];
        let pair = |c: [f64; 2], r: f64| CentroidRadius { client: 0, index: 0, centroid: c.to_vec(), radius: r, cluster_size: 1 };
        assert_eq!(sigma_diagnostic(&[pair([0.0, 0.0], 1.0)], &t).unwrap(), vec![0.0]);
        let s = sigma_diagnostic(&[pair([0.4, 0.0], 1.0)], &t).unwrap();
        assert!((s[0] - 0.4).abs() < 1e-12);
        // the fitted center's largest radius sets the scale for all its pairs
        let s = sigma_diagnostic(&[pair([0.4, 0.0], 0.5), pair([0.0, 0.2], 2.0), pair([9.0, 0.0], 4.0)], &t).unwrap();
        assert!((s[0] - 0.2).abs() < 1e-12 && (s[1] - 0.1).abs() < 1e-12 && (s[2] - 0.25).abs() < 1e-12);
        assert!(sigma_diagnostic(&[pair([0.0, 0.0], 0.0)], &t).is_err());
    }

    #[test]
    fn evaluate_and_write() {
        let ds = Dataset::new(
            array![[0.0], [1.0], [10.0], [11.0]],
            Some(vec![0, 0, 1, 1]),
            Some(array![[0.5], [10.5]]),
        )
        .unwrap();
        let r = evaluate("x", 3, &ds, &array![[10.5], [0.5]], None, vec![("m".into(), "10".into())]).unwrap();
        assert_eq!(r.purity, Some(1.0));
        assert_eq!(r.matched_l2, Some(0.0));
        assert_eq!(r.objective, 1.0);
        let mut buf = Vec::new();
        write_reports(&mut buf, &[r]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,seed,k_out,matched_l2,matched_mse,unmatched_true_centers,purity,nmi,objective,sigma_max,rounds,metadata\nx,3,2,0,0,0,1,1,1,,1,m=10\n"
        );
    }

    proptest! {
        #[test]
        fn nmi_symmetric_and_relabel_invariant(
            pairs in proptest::collection::vec((0usize..4, 0usize..3), 1..40),
            shift in 1usize..10
        ) {
            let x: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let a = nmi(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - nmi(&y, &x).unwrap()).abs() < 1e-12);
            let relabeled: Vec<usize> = x.iter().map(|v| (3 - v) * shift).collect();
            prop_assert!((a - nmi(&relabeled, &y).unwrap()).abs() < 1e-12);
            let constant = |s: &[usize]| s.iter().all(|v| *v == s[0]);
            if !constant(&x) && !constant(&y) {
                prop_assert!((a - nmi_oracle(&x, &y)).abs() < 1e-9);
            }
        }

        #[test]
        fn purity_bounds_and_split(
            pairs in proptest::collection::vec((0usize..4, 0usize..3), 1..40),
        ) {
            let x: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let p = purity(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let permuted: Vec<usize> = x.iter().map(|v| 3 - v).collect();
            prop_assert_eq!(p, purity(&permuted, &y).unwrap());
            // splitting every cluster by point parity never lowers purity
            let split: Vec<usize> = x.iter().enumerate().map(|(i, v)| v * 2 + i % 2).collect();
            prop_assert!(purity(&split, &y).unwrap() >= p - 1e-12);
        }

        #[test]
        fn matched_zero_iff_subset(
            vals in proptest::collection::vec(-10i32..10, 2..12),
            take in 1usize..6
        ) {
            let n = vals.len() / 2;
            let t = Array2::from_shape_fn((n, 2), |(i, j)| vals[2 * i + j] as f64);
            let take = take.min(n);
            let sub = t.slice(ndarray::s![..take, ..]).to_owned();
            let m = matched_center_distance(&sub, &t).unwrap();
            prop_assert!(m.mean.abs() < 1e-12);
            prop_assert_eq!(m.unmatched_true_centers, n - take);
            let mut moved = sub.clone();
            moved[[0, 0]] += 0.5;
            prop_assert!(matched_center_distance(&moved, &t).unwrap().mean > 0.0);
        }
    }
}
