//! One-shot federated clustering: local Lloyd, refinement and radius
//! assignment on every client, then a single aggregation on the server.

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::client_update::{refine, RefinedSolution};
use crate::dataset::{Dataset, PartitionPlan};
use crate::error::{Error, Result};
use crate::kmeans::{lloyd, ClusterSolution, Init, LloydConfig};
use crate::radius::{assign_radii, CentroidRadius, RadiusVariant, DEFAULT_RADIUS_FLOOR};
use crate::rng::derive_seed;
use crate::server::{aggregate_with, AggregationResult, GroupMean};

#[derive(Debug, Clone, PartialEq)]
pub struct FecaConfig {
    /// Number of global clusters.
    pub k: usize,
    /// Lloyd `k` on clients; defaults to `k`.
    pub client_k: Option<usize>,
    pub radius_variant: RadiusVariant,
    pub remove_one_fit_many: bool,
    pub seed: u64,
    /// Lloyd restarts per client; the lowest objective wins.
    pub restarts: usize,
    pub init: Init,
    pub radius_floor: f64,
    pub group_mean: GroupMean,
}

impl FecaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            client_k: None,
            radius_variant: RadiusVariant::Empirical,
            remove_one_fit_many: true,
            seed,
            restarts: 1,
            init: Init::KMeansPlusPlus,
            radius_floor: DEFAULT_RADIUS_FLOOR,
            group_mean: GroupMean::Unweighted,
        }
    }

    pub fn client_k(&self) -> usize {
        self.client_k.unwrap_or(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.client_k() == 0 {
            return Err(Error::InvalidParameter("k and client k must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if matches!(self.init, Init::Given(_)) {
            return Err(Error::InvalidParameter("clients cannot share given initial centroids".into()));
        }
        if !(self.radius_floor > 0.0 && self.radius_floor.is_finite()) {
            return Err(Error::InvalidParameter("radius floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// One message of the simulated exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub client: usize,
    pub direction: Direction,
    /// Number of centroid-radius pairs carried.
    pub pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageLog {
    pub messages: Vec<Message>,
}

impl MessageLog {
    pub fn count(&self, direction: Direction) -> usize {
        self.messages.iter().filter(|m| m.direction == direction).count()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("client,direction,pairs\n");
        for m in &self.messages {
            let dir = match m.direction {
                Direction::ClientToServer => "client_to_server",
                Direction::ServerToClient => "server_to_client",
            };
            s.push_str(&format!("{},{},{}\n", m.client, dir, m.pairs));
        }
        s
    }
}

/// Everything a client computes before sending its payload.
#[derive(Debug, Clone)]
pub struct ClientReport {
    pub client: usize,
    pub num_points: usize,
    /// Lloyd `k` actually used after clamping to the client size.
    pub local_k: usize,
    pub local: ClusterSolution,
    pub refined: RefinedSolution,
    pub payload: Vec<CentroidRadius>,
}

#[derive(Debug, Clone)]
pub struct FecaRun {
    pub result: AggregationResult,
    pub clients: Vec<ClientReport>,
    pub messages: MessageLog,
}

impl FecaRun {
    pub fn centroids(&self) -> &Array2<f64> {
        &self.result.final_centroids
    }

    pub fn pooled_pairs(&self) -> Vec<CentroidRadius> {
        self.clients.iter().flat_map(|c| c.payload.iter().cloned()).collect()
    }
}

/// Local computation of a single client on its own points.
pub fn run_client(points: &Array2<f64>, client: usize, config: &FecaConfig) -> Result<ClientReport> {
    if points.nrows() == 0 {
        return Err(Error::EmptyClient(client));
    }
    let n = points.nrows();
    let local_k = config.client_k().min(n);
    if local_k < config.client_k() {
        log::info!("client {client} has {n} points; running Lloyd with k = {local_k}");
    }
    let client_seed = derive_seed(config.seed, client as u64);
    let lloyd_cfg = LloydConfig::with_init(config.init.clone());
    let mut best: Option<ClusterSolution> = None;
    for r in 0..config.restarts {
        let seed = if r == 0 { client_seed } else { derive_seed(client_seed, r as u64) };
        let sol = lloyd(points, local_k, &lloyd_cfg, seed)?;
        if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
            best = Some(sol);
        }
    }
    let local = best.expect("at least one restart");
    let refined = if config.remove_one_fit_many && local.k() >= 3 {
        refine(&local, points)?
    } else {
        RefinedSolution::unrefined(&local)
    };
    let payload = assign_radii(&refined, points, client, config.radius_variant, config.radius_floor)?;
    Ok(ClientReport { client, num_points: n, local_k, local, refined, payload })
}

/// Runs the full federated pipeline over a partition.
pub fn run_feca(dataset: &Dataset, plan: &PartitionPlan, config: &FecaConfig) -> Result<FecaRun> {
    config.validate()?;
    if plan.num_points() != dataset.len() {
        return Err(Error::LengthMismatch { left: dataset.len(), right: plan.num_points() });
    }
    if config.k > dataset.len() {
        return Err(Error::TooManyClusters { k: config.k, n: dataset.len() });
    }
    let members = plan.clients();
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClient(empty));
    }
    let clients: Vec<ClientReport> = members
        .par_iter()
        .enumerate()
        .map(|(c, idx)| run_client(&dataset.points().select(Axis(0), idx), c, config))
        .collect::<Result<_>>()?;

    let messages = MessageLog {
        messages: clients
            .iter()
            .map(|c| Message { client: c.client, direction: Direction::ClientToServer, pairs: c.payload.len() })
            .collect(),
    };
    let pooled: Vec<CentroidRadius> = clients.iter().flat_map(|c| c.payload.iter().cloned()).collect();
    let result = aggregate_with(&pooled, config.k, config.group_mean)?;
    Ok(FecaRun { result, clients, messages })
}

/// Lloyd on the undivided dataset.
pub fn run_centralized(dataset: &Dataset, k: usize, seed: u64) -> Result<ClusterSolution> {
    lloyd(dataset.points(), k, &LloydConfig::default(), seed)
}
