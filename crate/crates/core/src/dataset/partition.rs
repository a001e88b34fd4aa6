use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Assignment of every point of a dataset to one of `num_clients` clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    client_of: Vec<usize>,
    num_clients: usize,
}

impl PartitionPlan {
    pub fn new(client_of: Vec<usize>, num_clients: usize) -> Result<Self> {
        if num_clients == 0 {
            return Err(Error::InvalidPartition("need at least one client".into()));
        }
        if let Some(bad) = client_of.iter().find(|&&c| c >= num_clients) {
            return Err(Error::InvalidPartition(format!(
                "client index {bad} out of range for {num_clients} clients"
            )));
        }
        Ok(Self { client_of, num_clients })
    }

    pub fn client_of(&self) -> &[usize] {
        &self.client_of
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn num_points(&self) -> usize {
        self.client_of.len()
    }

    /// Point indices per client, ascending within each client.
    pub fn clients(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clients];
        for (i, &c) in self.client_of.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_clients];
        for &c in &self.client_of {
            out[c] += 1;
        }
        out
    }
}

/// Uniform random split: shuffle, then deal points round-robin.
pub fn partition_iid(dataset: &Dataset, num_clients: usize, seed: u64) -> Result<PartitionPlan> {
    let n = dataset.len();
    if num_clients == 0 {
        return Err(Error::InvalidPartition("need at least one client".into()));
    }
    if num_clients > n {
        return Err(Error::InvalidPartition(format!("{num_clients} clients but only {n} points")));
    }
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut client_of = vec![0; n];
    for (slot, &i) in perm.iter().enumerate() {
        client_of[i] = slot % num_clients;
    }
    PartitionPlan::new(client_of, num_clients)
}

/// Draws from a symmetric Dirichlet(`alpha`) over `m` categories.
///
/// Works in log space (`Gamma(a) = Gamma(a + 1) * U^(1/a)`), so very small
/// concentrations do not underflow into an all-zero vector.
pub fn sample_dirichlet(alpha: f64, m: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("Dirichlet alpha must be positive, got {alpha}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("Dirichlet over zero categories".into()));
    }
    let gamma = Gamma::new(alpha + 1.0, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("gamma({alpha}): {e}")))?;
    let logs: Vec<f64> = (0..m)
        .map(|_| {
            let g: f64 = gamma.sample(&mut *rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / alpha
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Class-conditional non-IID split: for every class draw client proportions
/// from Dirichlet(`alpha`) and send each of that class's points to a client
/// sampled from those proportions.
pub fn partition_dirichlet(
    dataset: &Dataset,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    let labels = dataset.labels().ok_or(Error::MissingLabels)?;
    if num_clients == 0 {
        return Err(Error::InvalidPartition("need at least one client".into()));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut client_of = vec![0; labels.len()];
    for members in &by_class {
        let proportions = sample_dirichlet(alpha, num_clients, &mut rng)?;
        let pick = WeightedIndex::new(&proportions)
            .map_err(|e| Error::InvalidParameter(format!("Dirichlet proportions: {e}")))?;
        for &i in members {
            client_of[i] = pick.sample(&mut rng);
        }
    }
    PartitionPlan::new(client_of, num_clients)
}

/// [`partition_dirichlet`] redrawn until every client holds at least
/// `min_size` points. Attempt `a > 0` uses `derive_seed(seed, a)`.
pub fn partition_dirichlet_nonempty(
    dataset: &Dataset,
    num_clients: usize,
    alpha: f64,
    seed: u64,
    min_size: usize,
) -> Result<PartitionPlan> {
    const MAX_ATTEMPTS: u64 = 1000;
    if num_clients * min_size > dataset.len() {
        return Err(Error::InvalidPartition(format!(
            "{num_clients} clients x {min_size} points exceeds {} points",
            dataset.len()
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        let plan = partition_dirichlet(dataset, num_clients, alpha, s)?;
        if plan.sizes().iter().all(|&n| n >= min_size) {
            return Ok(plan);
        }
    }
    Err(Error::InvalidPartition(format!(
        "no Dirichlet({alpha}) draw gave every client {min_size} points in {MAX_ATTEMPTS} attempts"
    )))
}

/// Fixed-share protocol: every client receives a disjoint random sample of
/// `round(fraction * N)` points. Returns the selected point indices (client
/// blocks in order) together with the plan over that selection.
pub fn partition_fraction(
    dataset: &Dataset,
    num_clients: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, PartitionPlan)> {
    let n = dataset.len();
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("fraction must be in (0, 1], got {fraction}")));
    }
    if num_clients == 0 {
        return Err(Error::InvalidPartition("need at least one client".into()));
    }
    let per = ((fraction * n as f64).round() as usize).max(1);
    if per * num_clients > n {
        return Err(Error::InvalidPartition(format!(
            "{num_clients} clients x {per} points exceeds {n} points"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm.truncate(per * num_clients);
    let client_of = (0..perm.len()).map(|slot| slot / per).collect();
    Ok((perm, PartitionPlan::new(client_of, num_clients)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn labelled(n_per: usize, classes: usize) -> Dataset {
        let n = n_per * classes;
        let pts = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let labels = (0..n).map(|i| i / n_per).collect();
        Dataset::new(pts, Some(labels), None).unwrap()
    }

    #[test]
    fn iid_edge_sizes() {
        let ds = labelled(10, 1);
        assert_eq!(partition_iid(&ds, 1, 0).unwrap().sizes(), vec![10]);
        assert_eq!(partition_iid(&ds, 10, 0).unwrap().sizes(), vec![1; 10]);
        assert!(partition_iid(&ds, 11, 0).is_err());
        let ds = labelled(100, 1);
        let mut sizes = partition_iid(&ds, 3, 7).unwrap().sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![33, 33, 34]);
    }

    #[test]
    fn dirichlet_needs_labels() {
        let ds = Dataset::from_points(Array2::zeros((4, 1))).unwrap();
        assert!(matches!(partition_dirichlet(&ds, 2, 1.0, 0), Err(Error::MissingLabels)));
    }

    #[test]
    fn dirichlet_conserves_class_counts() {
        let ds = labelled(50, 4);
        let plan = partition_dirichlet(&ds, 5, 0.5, 3).unwrap();
        let labels = ds.labels().unwrap();
        for c in 0..4 {
            let total: usize = plan
                .clients()
                .iter()
                .map(|pts| pts.iter().filter(|&&i| labels[i] == c).count())
                .sum();
            assert_eq!(total, 50);
        }
    }

    #[test]
    fn small_alpha_concentrates_clients() {
        let ds = labelled(300, 15);
        let labels = ds.labels().unwrap();
        for seed in 0..10 {
            let plan = partition_dirichlet(&ds, 10, 0.1, seed).unwrap();
            let dominated = plan.clients().iter().any(|pts| {
                let mut hist = [0usize; 15];
                pts.iter().for_each(|&i| hist[labels[i]] += 1);
                !pts.is_empty() && *hist.iter().max().unwrap() * 2 > pts.len()
            });
            assert!(dominated, "seed {seed}");
        }
    }

    #[test]
    fn large_alpha_matches_global_histogram() {
        let ds = labelled(2000, 15);
        let labels = ds.labels().unwrap();
        let plan = partition_dirichlet(&ds, 10, 1000.0, 1).unwrap();
        for pts in plan.clients() {
            let mut hist = [0usize; 15];
            pts.iter().for_each(|&i| hist[labels[i]] += 1);
            let expected = pts.len() as f64 / 15.0;
            for h in hist {
                assert!(((h as f64) - expected).abs() / expected < 0.2);
            }
        }
    }

    #[test]
    fn dirichlet_sampler_matches_oracle_mean() {
        // E[p_i] = 1/m for a symmetric Dirichlet
        let mut rng = rng_from_seed(2);
        let mut acc = [0.0; 4];
        let draws = 20_000;
        for _ in 0..draws {
            let p = sample_dirichlet(0.3, 4, &mut rng).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            p.iter().enumerate().for_each(|(i, v)| acc[i] += v);
        }
        for a in acc {
            assert!((a / draws as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn nonempty_redraw_fills_every_client() {
        let ds = labelled(20, 3);
        let plan = partition_dirichlet_nonempty(&ds, 8, 0.05, 4, 1).unwrap();
        assert!(plan.sizes().iter().all(|&s| s >= 1));
    }

    #[test]
    fn fraction_protocol_is_disjoint() {
        let ds = labelled(100, 10);
        let (sel, plan) = partition_fraction(&ds, 20, 0.05, 8).unwrap();
        assert_eq!(sel.len(), 1000);
        assert_eq!(plan.sizes(), vec![50; 20]);
        let uniq: std::collections::BTreeSet<_> = sel.iter().collect();
        assert_eq!(uniq.len(), 1000);
        assert!(partition_fraction(&ds, 21, 0.05, 8).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partitions_cover_every_point_once(
                n_per in 1usize..40, classes in 1usize..6, m in 1usize..8,
                alpha in 0.05f64..50.0, seed in any::<u64>()
            ) {
                let ds = labelled(n_per, classes);
                let n = ds.len();
                let plan = partition_dirichlet(&ds, m, alpha, seed).unwrap();
                prop_assert_eq!(plan.num_points(), n);
                prop_assert_eq!(plan.sizes().iter().sum::<usize>(), n);
                if m <= n {
                    let plan = partition_iid(&ds, m, seed).unwrap();
                    let sizes = plan.sizes();
                    prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                    prop_assert!(hi - lo <= 1);
                }
            }
        }
    }
}
