//! Community detection by multi-level greedy modularity optimization.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::network::CoordinationNetwork;
use crate::seeding::{derive_seed_indexed, rng_from};

/// Final partition, the classic modularity of that partition, and the
/// optimized objective after each level (monotonically non-decreasing).
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityPartition {
    pub community: BTreeMap<String, usize>,
    pub modularity: f64,
    pub levels: Vec<f64>,
}

impl CommunityPartition {
    pub fn n_communities(&self) -> usize {
        let mut ids: Vec<usize> = self.community.values().copied().collect();
        ids.sort();
        ids.dedup();
        ids.len()
    }
}

/// Classic weighted Newman modularity of a labeled partition. Every node
/// must be labeled. An edgeless graph scores 0 for any partition.
pub fn modularity(
    net: &CoordinationNetwork,
    community: &BTreeMap<String, usize>,
) -> Result<f64> {
    for node in &net.nodes {
        if !community.contains_key(node) {
            return Err(Error::invalid(format!("partition misses node `{node}`")));
        }
    }
    let labels: Vec<usize> = net.nodes.iter().map(|n| community[n]).collect();
    let m: f64 = net.edges.iter().map(|e| e.weight).sum();
    if m <= 0.0 {
        return Ok(0.0);
    }
    let n_comm = labels.iter().max().map(|&c| c + 1).unwrap_or(0);
    let mut inside = vec![0.0; n_comm];
    let mut tot = vec![0.0; n_comm];
    for e in &net.edges {
        if labels[e.a] == labels[e.b] {
            inside[labels[e.a]] += 2.0 * e.weight;
        }
        tot[labels[e.a]] += e.weight;
        tot[labels[e.b]] += e.weight;
    }
    let two_m = 2.0 * m;
    Ok((0..n_comm)
        .map(|c| inside[c] / two_m - (tot[c] / two_m) * (tot[c] / two_m))
        .sum())
}

/// Working graph for one level: simple edges plus self-loop weights
/// accumulated by aggregation. A self-loop of weight s adds 2s to its node's
/// weighted degree and s to total edge weight.
struct LevelGraph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl LevelGraph {
    fn weighted_degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                2.0 * self.self_loops[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
            })
            .collect()
    }

    fn total_weight(&self) -> f64 {
        let inter: f64 = self
            .adj
            .iter()
            .flat_map(|nbrs| nbrs.iter().map(|&(_, w)| w))
            .sum();
        inter / 2.0 + self.self_loops.iter().sum::<f64>()
    }

    /// Q at `resolution` for a node labeling of this level's graph.
    fn objective(&self, labels: &[usize], resolution: f64) -> f64 {
        let m = self.total_weight();
        if m <= 0.0 {
            return 0.0;
        }
        let two_m = 2.0 * m;
        let n_comm = labels.iter().max().map(|&c| c + 1).unwrap_or(0);
        let mut inside = vec![0.0; n_comm];
        let mut tot = vec![0.0; n_comm];
        let degrees = self.weighted_degrees();
        for i in 0..self.n {
            tot[labels[i]] += degrees[i];
            inside[labels[i]] += 2.0 * self.self_loops[i];
            for &(j, w) in &self.adj[i] {
                if labels[j] == labels[i] {
                    inside[labels[i]] += w; // each direction once
                }
            }
        }
        (0..n_comm)
            .map(|c| inside[c] / two_m - resolution * (tot[c] / two_m) * (tot[c] / two_m))
            .sum()
    }
}

/// One pass structure: move nodes greedily until no move improves the
/// objective. Returns (labels, moved_any).
fn local_phase(graph: &LevelGraph, resolution: f64, order: &[usize]) -> (Vec<usize>, bool) {
    let degrees = graph.weighted_degrees();
    let m2 = 2.0 * graph.total_weight();
    let mut community: Vec<usize> = (0..graph.n).collect();
    let mut tot = degrees.clone();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &v in order {
            let old = community[v];
            let k_v = degrees[v];
            let mut link: BTreeMap<usize, f64> = BTreeMap::new();
            link.insert(old, 0.0);
            for &(u, w) in &graph.adj[v] {
                *link.entry(community[u]).or_insert(0.0) += w;
            }
            tot[old] -= k_v;
            let mut best_c = old;
            let mut best_gain = f64::NEG_INFINITY;
            for (&c, &w_vc) in &link {
                let gain = w_vc - resolution * tot[c] * k_v / m2;
                if gain > best_gain {
                    best_gain = gain;
                    best_c = c;
                }
            }
            tot[best_c] += k_v;
            if best_c != old {
                community[v] = best_c;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, moved_any)
}

fn renumber(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        let id = *map.entry(l).or_insert(next);
        out.push(id);
    }
    (out, map.len())
}

fn aggregate(graph: &LevelGraph, labels: &[usize], n_comm: usize) -> LevelGraph {
    let mut self_loops = vec![0.0; n_comm];
    let mut inter: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..graph.n {
        self_loops[labels[i]] += graph.self_loops[i];
        for &(j, w) in &graph.adj[i] {
            if i < j {
                let (ca, cb) = (labels[i], labels[j]);
                if ca == cb {
                    self_loops[ca] += w;
                } else {
                    *inter.entry((ca.min(cb), ca.max(cb))).or_insert(0.0) += w;
                }
            }
        }
    }
    let mut adj = vec![Vec::new(); n_comm];
    for (&(a, b), &w) in &inter {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    LevelGraph {
        n: n_comm,
        adj,
        self_loops,
    }
}

/// Multi-level greedy modularity optimization. The node visit order is
/// shuffled from `seed` once per level; equal-gain moves resolve to the
/// lowest community id. The reported `modularity` is the classic Q of the
/// final partition; `levels` tracks the resolution-scaled objective.
pub fn louvain(
    net: &CoordinationNetwork,
    seed: u64,
    resolution: f64,
) -> Result<CommunityPartition> {
    if net.edges.is_empty() {
        return Err(Error::NoEdges);
    }
    if !(resolution >= 0.0) || !resolution.is_finite() {
        return Err(Error::invalid(format!(
            "resolution must be a finite non-negative number, got {resolution}"
        )));
    }

    let mut graph = LevelGraph {
        n: net.n_nodes(),
        adj: net.adjacency(),
        self_loops: vec![0.0; net.n_nodes()],
    };
    // node_map[i] = current community of original node i.
    let mut node_map: Vec<usize> = (0..net.n_nodes()).collect();
    let mut levels = Vec::new();

    for level in 0..100 {
        let mut order: Vec<usize> = (0..graph.n).collect();
        let mut rng = rng_from(derive_seed_indexed(seed, "louvain.shuffle", level));
        order.shuffle(&mut rng);

        let (labels, moved) = local_phase(&graph, resolution, &order);
        if !moved && !levels.is_empty() {
            break;
        }
        let (labels, n_comm) = renumber(&labels);
        levels.push(graph.objective(&labels, resolution));
        for entry in node_map.iter_mut() {
            *entry = labels[*entry];
        }
        if !moved {
            break;
        }
        graph = aggregate(&graph, &labels, n_comm);
    }

    let (final_labels, _) = renumber(&node_map);
    let community: BTreeMap<String, usize> = net
        .nodes
        .iter()
        .zip(&final_labels)
        .map(|(id, &c)| (id.clone(), c))
        .collect();
    let q = modularity(net, &community)?;
    Ok(CommunityPartition {
        community,
        modularity: q,
        levels,
    })
}
