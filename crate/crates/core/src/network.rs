//! Communication graphs: random geometric (unit-disk) deployments, neighbor
//! sets, connectivity and hop diameter.

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type AgentId = usize;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network is disconnected")]
    Disconnected,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed network: {0}")]
    Malformed(String),
    #[error("network json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("network io: {0}")]
    Io(#[from] std::io::Error),
}

/// Undirected graph over agents `0..n`, optionally embedded in space.
///
/// Serialized field order is `n, dim, reception_range, positions, adjacency`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    n: usize,
    /// Spatial dimension; 0 for purely combinatorial graphs.
    dim: usize,
    reception_range: f64,
    positions: Option<Vec<Vec<f64>>>,
    adjacency: Vec<Vec<AgentId>>,
}

/// Largest shortest-path hop count between any two agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct HopDiameter(pub usize);

impl HopDiameter {
    pub fn hops(self) -> usize {
        self.0
    }
}

impl Network {
    /// Builds a combinatorial graph from an edge list.
    pub fn from_edges(n: usize, edges: &[(AgentId, AgentId)]) -> Result<Self, NetworkError> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(NetworkError::Malformed(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(NetworkError::Malformed(format!("self-loop at {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            n,
            dim: 0,
            reception_range: 0.0,
            positions: None,
            adjacency,
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges).expect("complete graph edges are valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges).expect("cycle edges are valid")
    }

    /// Unit-disk graph: `(i, j)` is an edge iff `|p_i - p_j| <= range`.
    pub fn from_positions(positions: Vec<Vec<f64>>, reception_range: f64) -> Result<Self, NetworkError> {
        let n = positions.len();
        let dim = positions.first().map_or(0, Vec::len);
        if positions.iter().any(|p| p.len() != dim) {
            return Err(NetworkError::Malformed("positions have mixed dimensions".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NetworkError::Malformed("non-finite position".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if distance(&positions[i], &positions[j]) <= reception_range {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        Ok(Self {
            n,
            dim,
            reception_range,
            positions: Some(positions),
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reception_range(&self) -> f64 {
        self.reception_range
    }

    pub fn positions(&self) -> Option<&[Vec<f64>]> {
        self.positions.as_deref()
    }

    pub fn neighbors(&self, i: AgentId) -> &[AgentId] {
        &self.adjacency[i]
    }

    pub fn is_neighbor(&self, i: AgentId, j: AgentId) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// BFS hop counts from `source`; `None` marks unreachable agents.
    pub fn hop_distances(&self, source: AgentId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        if source >= self.n {
            return dist;
        }
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued nodes have a distance");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.hop_distances(0).iter().all(Option::is_some)
    }

    /// Exact hop diameter by BFS from every agent.
    pub fn hop_diameter(&self) -> Result<HopDiameter, NetworkError> {
        let mut h = 0;
        for s in 0..self.n {
            for d in self.hop_distances(s) {
                h = h.max(d.ok_or(NetworkError::Disconnected)?);
            }
        }
        Ok(HopDiameter(h))
    }

    /// Subgraph induced by `ids`, relabelled `0..ids.len()` in the given order.
    pub fn induced_subgraph(&self, ids: &[AgentId]) -> Self {
        let mut local = vec![None; self.n];
        for (k, &id) in ids.iter().enumerate() {
            local[id] = Some(k);
        }
        let adjacency = ids
            .iter()
            .map(|&id| {
                let mut ns: Vec<_> = self.adjacency[id].iter().filter_map(|&j| local[j]).collect();
                ns.sort_unstable();
                ns
            })
            .collect();
        Self {
            n: ids.len(),
            dim: self.dim,
            reception_range: self.reception_range,
            positions: self
                .positions
                .as_ref()
                .map(|ps| ids.iter().map(|&id| ps[id].clone()).collect()),
            adjacency,
        }
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.adjacency.len() != self.n {
            return Err(NetworkError::Malformed(format!(
                "adjacency has {} lists for n = {}",
                self.adjacency.len(),
                self.n
            )));
        }
        for (i, ns) in self.adjacency.iter().enumerate() {
            if ns.windows(2).any(|w| w[0] >= w[1]) {
                return Err(NetworkError::Malformed(format!("neighbors of {i} not strictly sorted")));
            }
            for &j in ns {
                if j >= self.n || j == i {
                    return Err(NetworkError::Malformed(format!("bad neighbor {j} of {i}")));
                }
                if !self.is_neighbor(j, i) {
                    return Err(NetworkError::Malformed(format!("edge ({i}, {j}) is not symmetric")));
                }
            }
        }
        if let Some(ps) = &self.positions {
            if ps.len() != self.n || ps.iter().any(|p| p.len() != self.dim) {
                return Err(NetworkError::Malformed("positions do not match n and dim".into()));
            }
            for i in 0..self.n {
                for j in (i + 1)..self.n {
                    let within = distance(&ps[i], &ps[j]) <= self.reception_range + 1e-12;
                    let strictly_within = distance(&ps[i], &ps[j]) <= self.reception_range - 1e-12;
                    let edge = self.is_neighbor(i, j);
                    if (edge && !within) || (!edge && strictly_within) {
                        return Err(NetworkError::Malformed(format!("edge ({i}, {j}) violates the range rule")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, NetworkError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let net: Self = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Uniform i.i.d. points in the unit hypercube from a seeded ChaCha8 stream.
pub fn sample_unit_cube(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Random geometric network in `[0, 1]^dim`. Connectivity is not enforced.
pub fn generate_geometric_network(n: usize, dim: usize, reception_range: f64, seed: u64) -> Result<Network, NetworkError> {
    if !(dim == 2 || dim == 3) {
        return Err(NetworkError::InvalidParameter(format!("dim must be 2 or 3, got {dim}")));
    }
    if n < dim + 2 {
        return Err(NetworkError::InvalidParameter(format!("need n >= dim + 2, got n = {n}")));
    }
    if reception_range.is_nan() || reception_range <= 0.0 || !reception_range.is_finite() {
        return Err(NetworkError::InvalidParameter(format!(
            "reception range must be positive, got {reception_range}"
        )));
    }
    Network::from_positions(sample_unit_cube(n, dim, seed), reception_range)
}
