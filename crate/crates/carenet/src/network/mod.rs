//! Coordination networks: one graph per patient group, nodes are the
//! operational areas active on that group's patients, edges weighted by
//! cosine similarity of the areas' action-count vectors.

pub mod export;
pub mod louvain;

use std::collections::BTreeSet;

use crate::cocluster::CoClusterAssignment;
use crate::datamodel::AreaUtilizationMatrix;
use crate::error::{Error, Result};

pub use louvain::{louvain, modularity, CommunityPartition};

pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_MIN_ACTIONS: u64 = 1;

/// Undirected simple graph; edges keep `a < b` and weights in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMetrics {
    pub n_nodes: usize,
    pub avg_degree: f64,
    pub avg_weighted_degree: f64,
    pub density: f64,
    pub avg_clustering: f64,
    pub avg_path_length: f64,
}

impl CoordinationNetwork {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Neighbor lists with weights, symmetric.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }
}

/// Build the coordination network of one patient group.
///
/// Columns of A′ are restricted to the group's patients; areas with at least
/// `min_actions` actions on them become nodes, and a pair of nodes is joined
/// when the cosine of their restricted count vectors reaches `tau` (zero
/// cosines never make an edge, whatever the threshold).
pub fn build_network(
    aprime: &AreaUtilizationMatrix,
    assignment: &CoClusterAssignment,
    group: usize,
    tau: f64,
    min_actions: u64,
) -> Result<CoordinationNetwork> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau must be in [0, 1), got {tau}")));
    }
    if min_actions < 1 {
        return Err(Error::invalid("min_actions must be at least 1".to_string()));
    }
    let group_patients: BTreeSet<&str> = assignment
        .patient_group
        .iter()
        .filter(|(_, &g)| g == group)
        .map(|(id, _)| id.as_str())
        .collect();
    if group_patients.is_empty() {
        return Err(Error::EmptyGroup(group));
    }
    let keep_cols: Vec<usize> = aprime
        .patients
        .iter()
        .enumerate()
        .filter(|(_, id)| group_patients.contains(id.as_str()))
        .map(|(j, _)| j)
        .collect();
    if keep_cols.is_empty() {
        return Err(Error::EmptyGroup(group));
    }
    let all_rows: Vec<usize> = (0..aprime.counts.nrows()).collect();
    let restricted = aprime.counts.select(&all_rows, &keep_cols);

    // Node inclusion by total action count on the group's patients.
    let row_sums = restricted.row_sums();
    let node_rows: Vec<usize> = (0..restricted.nrows())
        .filter(|&i| row_sums[i] >= min_actions as f64)
        .collect();
    let nodes: Vec<String> = node_rows.iter().map(|&i| aprime.areas[i].clone()).collect();

    let vectors: Vec<Vec<(usize, f64)>> = node_rows
        .iter()
        .map(|&i| restricted.row(i).collect())
        .collect();
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt())
        .collect();

    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            let dot = sparse_dot(&vectors[a], &vectors[b]);
            if dot <= 0.0 {
                continue;
            }
            let weight = (dot / (norms[a] * norms[b])).min(1.0);
            if weight >= tau && weight > 0.0 {
                edges.push(Edge { a, b, weight });
            }
        }
    }
    Ok(CoordinationNetwork { nodes, edges })
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

pub fn avg_degree(net: &CoordinationNetwork) -> Result<f64> {
    if net.n_nodes() == 0 {
        return Err(Error::invalid("graph has no nodes".to_string()));
    }
    Ok(2.0 * net.edges.len() as f64 / net.n_nodes() as f64)
}

pub fn avg_weighted_degree(net: &CoordinationNetwork) -> Result<f64> {
    if net.n_nodes() == 0 {
        return Err(Error::invalid("graph has no nodes".to_string()));
    }
    let total: f64 = net.edges.iter().map(|e| e.weight).sum();
    Ok(2.0 * total / net.n_nodes() as f64)
}

pub fn density(net: &CoordinationNetwork) -> Result<f64> {
    let n = net.n_nodes();
    if n < 2 {
        return Err(Error::invalid(format!(
            "density needs at least 2 nodes, have {n}"
        )));
    }
    let possible = n * (n - 1) / 2;
    Ok(net.edges.len() as f64 / possible as f64)
}

/// Mean local clustering coefficient on the unweighted skeleton; nodes with
/// fewer than two neighbors contribute 0.
pub fn avg_clustering(net: &CoordinationNetwork) -> Result<f64> {
    if net.n_nodes() == 0 {
        return Err(Error::invalid("graph has no nodes".to_string()));
    }
    let neighbor_sets: Vec<BTreeSet<usize>> = {
        let mut sets = vec![BTreeSet::new(); net.n_nodes()];
        for e in &net.edges {
            sets[e.a].insert(e.b);
            sets[e.b].insert(e.a);
        }
        sets
    };
    let mut total = 0.0;
    for neighbors in &neighbor_sets {
        let deg = neighbors.len();
        if deg < 2 {
            continue;
        }
        let mut links = 0usize;
        for &u in neighbors {
            for &v in neighbors.range((u + 1)..) {
                if neighbor_sets[u].contains(&v) {
                    links += 1;
                }
            }
        }
        total += links as f64 / (deg * (deg - 1) / 2) as f64;
    }
    Ok(total / net.n_nodes() as f64)
}

/// Mean unweighted shortest-path length over connected unordered pairs;
/// disconnected pairs are left out of both numerator and denominator.
pub fn avg_path_length(net: &CoordinationNetwork) -> Result<f64> {
    let n = net.n_nodes();
    if n < 2 {
        return Err(Error::invalid(format!(
            "path length needs at least 2 nodes, have {n}"
        )));
    }
    let adj = net.adjacency();
    let mut sum = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for source in 0..n {
        dist.fill(usize::MAX);
        dist[source] = 0;
        queue.clear();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for target in (source + 1)..n {
            if dist[target] != usize::MAX {
                sum += dist[target] as u64;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::NoPaths);
    }
    Ok(sum as f64 / pairs as f64)
}

pub fn metrics(net: &CoordinationNetwork) -> Result<NetworkMetrics> {
    Ok(NetworkMetrics {
        n_nodes: net.n_nodes(),
        avg_degree: avg_degree(net)?,
        avg_weighted_degree: avg_weighted_degree(net)?,
        density: density(net)?,
        avg_clustering: avg_clustering(net)?,
        avg_path_length: avg_path_length(net)?,
    })
}
