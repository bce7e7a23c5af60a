//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here is deliberately naive (dense matrices, cubic loops,
//! exhaustive enumeration) so it cannot share a bug with the library's
//! optimized code paths.

// Each test binary compiles its own copy and uses a subset.
#![allow(dead_code)]

use std::collections::BTreeMap;

use carenet::network::{CoordinationNetwork, Edge};
use carenet::stats::nb::predict_mean;
use carenet::stats::{DesignMatrix, NBRegressionFit};
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::digamma;

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let n = a[0].len();
    (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect()
}

/// Full SVD of a dense matrix by one-sided Jacobi rotations. Returns
/// singular values in descending order with matching left/right singular
/// vectors as columns. O(mn^2) per sweep; fine for test sizes.
pub fn dense_svd(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = a.len();
    let n = a[0].len();
    if m < n {
        let (s, v, u) = dense_svd(&transpose(a));
        return (s, u, v);
    }
    // w holds the working columns of A; v accumulates the rotations.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> =
        (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();

    for _sweep in 0..120 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha: f64 = w[i].iter().map(|x| x * x).sum();
                let beta: f64 = w[j].iter().map(|x| x * x).sum();
                let gamma: f64 = w[i].iter().zip(&w[j]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt().max(f64::MIN_POSITIVE) {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let theta = 0.5 * (2.0 * gamma).atan2(alpha - beta);
                let (s, c) = theta.sin_cos();
                for r in 0..m {
                    let (wi, wj) = (w[i][r], w[j][r]);
                    w[i][r] = c * wi + s * wj;
                    w[j][r] = -s * wi + c * wj;
                }
                for r in 0..n {
                    let (vi, vj) = (v[i][r], v[j][r]);
                    v[i][r] = c * vi + s * vj;
                    v[j][r] = -s * vi + c * vj;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut sigma = Vec::with_capacity(n);
    let mut u_cols = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &idx in &order {
        let s = norms[idx];
        sigma.push(s);
        if s > 1e-300 {
            u_cols.push(w[idx].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
        }
        v_cols.push(v[idx].clone());
    }
    (sigma, u_cols, v_cols)
}

/// Assemble a network from (a, b, weight) index edges.
pub fn graph(n: usize, edges: &[(usize, usize, f64)]) -> CoordinationNetwork {
    CoordinationNetwork {
        nodes: (0..n).map(|i| format!("v{i}")).collect(),
        edges: edges
            .iter()
            .map(|&(a, b, weight)| Edge { a: a.min(b), b: a.max(b), weight })
            .collect(),
    }
}

fn adjacency(net: &CoordinationNetwork) -> Vec<Vec<f64>> {
    let n = net.nodes.len();
    let mut a = vec![vec![0.0; n]; n];
    for e in &net.edges {
        a[e.a][e.b] = e.weight;
        a[e.b][e.a] = e.weight;
    }
    a
}

/// Average unweighted local clustering coefficient by explicit triangle
/// counting; nodes of degree < 2 contribute 0.
pub fn clustering_by_triangles(net: &CoordinationNetwork) -> f64 {
    let n = net.nodes.len();
    let a = adjacency(net);
    let mut total = 0.0;
    for i in 0..n {
        let neighbors: Vec<usize> = (0..n).filter(|&j| a[i][j] > 0.0).collect();
        let d = neighbors.len();
        if d < 2 {
            continue;
        }
        let mut triangles = 0usize;
        for x in 0..d {
            for y in (x + 1)..d {
                if a[neighbors[x]][neighbors[y]] > 0.0 {
                    triangles += 1;
                }
            }
        }
        total += 2.0 * triangles as f64 / (d * (d - 1)) as f64;
    }
    total / n as f64
}

/// Average shortest-path length over connected unordered pairs via
/// Floyd-Warshall on hop counts; None when no pair is connected.
pub fn apl_by_floyd_warshall(net: &CoordinationNetwork) -> Option<f64> {
    let n = net.nodes.len();
    const INF: u64 = u64::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in &net.edges {
        d[e.a][e.b] = 1;
        d[e.b][e.a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut sum = 0u64;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            if d[i][j] < INF {
                sum += d[i][j];
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        None
    } else {
        Some(sum as f64 / pairs as f64)
    }
}

/// Weighted Newman modularity straight from the entrywise definition
/// Q = (1/2m) sum_ij (A_ij - k_i k_j / 2m) delta(c_i, c_j).
pub fn modularity_entrywise(net: &CoordinationNetwork, labels: &BTreeMap<String, usize>) -> f64 {
    let n = net.nodes.len();
    let a = adjacency(net);
    let two_m: f64 = net.edges.iter().map(|e| 2.0 * e.weight).sum();
    if two_m <= 0.0 {
        return 0.0;
    }
    let k: Vec<f64> = (0..n).map(|i| a[i].iter().sum()).collect();
    let c: Vec<usize> = net.nodes.iter().map(|v| labels[v]).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c[i] == c[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Exhaustive best-modularity partition over all set partitions of the
/// nodes, enumerated as restricted growth strings. Only sane for n <= 10.
pub fn best_partition_exhaustive(net: &CoordinationNetwork) -> (BTreeMap<String, usize>, f64) {
    let n = net.nodes.len();
    assert!(n <= 10, "exhaustive search limited to 10 nodes");
    let mut labels = vec![0usize; n];
    let mut best = (vec![0usize; n], f64::NEG_INFINITY);

    // Restricted growth: labels[0] = 0 and labels[i] <= 1 + max(labels[..i]).
    fn recurse(
        i: usize,
        labels: &mut Vec<usize>,
        net: &CoordinationNetwork,
        best: &mut (Vec<usize>, f64),
    ) {
        let n = labels.len();
        if i == n {
            let map: BTreeMap<String, usize> =
                net.nodes.iter().cloned().zip(labels.iter().copied()).collect();
            let q = modularity_entrywise(net, &map);
            if q > best.1 {
                *best = (labels.clone(), q);
            }
            return;
        }
        let cap = labels[..i].iter().copied().max().map_or(0, |m| m + 1);
        for v in 0..=cap {
            labels[i] = v;
            recurse(i + 1, labels, net, best);
        }
    }
    recurse(1, &mut labels, net, &mut best);

    let map: BTreeMap<String, usize> =
        net.nodes.iter().cloned().zip(best.0.iter().copied()).collect();
    (map, best.1)
}

/// Erdos-Renyi graph with uniform random weights, for metric equivalence
/// sweeps.
pub fn random_graph(rng: &mut impl rand::Rng, n: usize, p: f64) -> CoordinationNetwork {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((a, b, 0.25 + 0.75 * rng.random::<f64>()));
            }
        }
    }
    graph(n, &edges)
}

/// NB2 sample as a Gamma mixture of Poissons; α = 0 degenerates to Poisson.
pub fn nb2_draw(rng: &mut impl rand::Rng, mu: f64, alpha: f64) -> u64 {
    let lambda = if alpha <= 0.0 {
        mu
    } else {
        Gamma::new(1.0 / alpha, alpha * mu).unwrap().sample(rng)
    };
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).unwrap().sample(rng) as u64
}

/// Intercept plus one dummy column: rows with dummy 1 are group 1, the rest
/// the reference group 2.
pub fn two_group_design(y: Vec<u64>, dummy: Vec<f64>) -> DesignMatrix {
    let n = y.len();
    let row_group = dummy.iter().map(|&d| if d > 0.0 { 1 } else { 2 }).collect();
    DesignMatrix {
        response: y,
        columns: vec![vec![1.0; n], dummy],
        column_names: vec!["intercept".to_string(), "group_1".to_string()],
        row_group,
        groups: vec![1, 2],
        reference_group: 2,
    }
}

/// Analytic NB2 score in β: Σ_i x_ij (y_i − μ_i) / (1 + αμ_i).
pub fn nb_beta_score(design: &DesignMatrix, fit: &NBRegressionFit) -> Vec<f64> {
    let mu: Vec<f64> = (0..design.n_rows())
        .map(|i| predict_mean(fit, &design.row(i)))
        .collect();
    design
        .columns
        .iter()
        .map(|col| {
            col.iter()
                .zip(&design.response)
                .zip(&mu)
                .map(|((&x, &y), &m)| x * (y as f64 - m) / (1.0 + fit.dispersion * m))
                .sum()
        })
        .collect()
}

/// Analytic NB2 score in α:
/// Σ_i (1/α²)(ln(1+αμ_i) − ψ(y_i+1/α) + ψ(1/α)) + (y_i−μ_i)/(α(1+αμ_i)).
pub fn nb_alpha_score(design: &DesignMatrix, fit: &NBRegressionFit) -> f64 {
    let a = fit.dispersion;
    let inv = 1.0 / a;
    (0..design.n_rows())
        .map(|i| {
            let m = predict_mean(fit, &design.row(i));
            let y = design.response[i] as f64;
            inv * inv * ((1.0 + a * m).ln() - digamma(y + inv) + digamma(inv))
                + (y - m) / (a * (1.0 + a * m))
        })
        .sum()
}
