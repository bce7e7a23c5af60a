//! Seeded k-means over embedding points, built so that reordering the input
//! points only reorders the labels. Every tie in the algorithm is broken by
//! point geometry (never by input position), and accumulation sums run in a
//! canonical coordinate order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::{derive_seed_indexed, rng_from};

#[derive(Debug, Clone)]
pub struct KmeansFit {
    /// Cluster index in 0..k per input point.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
}

const MAX_LLOYD_ITER: usize = 200;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Indices of `points` sorted by coordinates; the processing order used for
/// every accumulating loop, so input order cannot leak into results.
fn canonical_order(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        for (x, y) in points[i].iter().zip(&points[j]) {
            let c = x.total_cmp(y);
            if c != std::cmp::Ordering::Equal {
                return c;
            }
        }
        i.cmp(&j)
    });
    order
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| x.to_bits()).collect())
        .collect();
    keys.sort();
    keys.dedup();
    keys.len()
}

/// Greedy farthest-point seeding. The first centroid maximizes the
/// projection onto a seeded random direction; later centroids maximize the
/// distance to the nearest chosen one. All ties fall back to coordinate
/// order, which is safe: coordinate-equal points are interchangeable.
fn seed_farthest(
    points: &[Vec<f64>],
    order: &[usize],
    k: usize,
    direction: &[f64],
) -> Vec<Vec<f64>> {
    let mut best = order[0];
    let mut best_proj = f64::NEG_INFINITY;
    for &i in order {
        let proj: f64 = points[i].iter().zip(direction).map(|(x, d)| x * d).sum();
        if proj > best_proj {
            best_proj = proj;
            best = i;
        }
    }
    let mut centroids = vec![points[best].clone()];
    while centroids.len() < k {
        let mut far = order[0];
        let mut far_dist = f64::NEG_INFINITY;
        for &i in order {
            let d = centroids
                .iter()
                .map(|c| sq_dist(&points[i], c))
                .fold(f64::INFINITY, f64::min);
            if d > far_dist || (d == far_dist && lex_less(&points[i], &points[far])) {
                far_dist = d;
                far = i;
            }
        }
        centroids.push(points[far].clone());
    }
    centroids
}

/// Pick a point with probability proportional to its squared distance from
/// the nearest chosen centroid. The cumulative sum walks the canonical
/// order, so the draw depends only on point geometry and the rng stream.
fn sample_by_sq_dist(
    points: &[Vec<f64>],
    order: &[usize],
    centroids: &[Vec<f64>],
    rng: &mut impl Rng,
) -> usize {
    let mut cumulative = Vec::with_capacity(order.len());
    let mut total = 0.0;
    for &i in order {
        let d = centroids
            .iter()
            .map(|c| sq_dist(&points[i], c))
            .fold(f64::INFINITY, f64::min);
        total += d;
        cumulative.push(total);
    }
    if total <= 0.0 || !total.is_finite() {
        // Unreachable while fewer centroids exist than distinct points.
        return order[0];
    }
    let u = rng.random::<f64>() * total;
    // First point whose cumulative weight exceeds u; zero-weight points
    // (already-chosen coordinates) can never be selected.
    let pos = cumulative.partition_point(|&w| w <= u).min(order.len() - 1);
    order[pos]
}

/// Distance-sampled seeding: a uniform first pick, then squared-distance
/// draws. Restarts under this scheme explore different basins, where the
/// deterministic farthest-point spread revisits the same one.
fn seed_sampled(
    points: &[Vec<f64>],
    order: &[usize],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let first = order[rng.random_range(0..order.len())];
    let mut centroids = vec![points[first].clone()];
    while centroids.len() < k {
        let i = sample_by_sq_dist(points, order, &centroids, rng);
        centroids.push(points[i].clone());
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) {
    for (i, p) in points.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = sq_dist(p, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
    }
}

/// Move the point of the largest cluster farthest from its centroid into the
/// empty cluster `target`.
fn repair_empty(
    points: &[Vec<f64>],
    order: &[usize],
    labels: &mut [usize],
    sizes: &mut [usize],
    centroids: &[Vec<f64>],
    target: usize,
) {
    let largest = (0..sizes.len())
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .unwrap();
    let mut donor = None;
    let mut donor_dist = f64::NEG_INFINITY;
    for &i in order {
        if labels[i] != largest {
            continue;
        }
        let d = sq_dist(&points[i], &centroids[largest]);
        if d > donor_dist {
            donor_dist = d;
            donor = Some(i);
        }
    }
    let donor = donor.expect("largest cluster is nonempty");
    labels[donor] = target;
    sizes[largest] -= 1;
    sizes[target] += 1;
}

fn lloyd(points: &[Vec<f64>], order: &[usize], k: usize, mut centroids: Vec<Vec<f64>>) -> KmeansFit {
    let dim = points[0].len();
    let mut labels = vec![0usize; points.len()];
    for _ in 0..MAX_LLOYD_ITER {
        let previous = labels.clone();
        assign(points, &centroids, &mut labels);

        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        for target in 0..k {
            if sizes[target] == 0 {
                repair_empty(points, order, &mut labels, &mut sizes, &centroids, target);
            }
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for &i in order {
            for (s, x) in sums[labels[i]].iter_mut().zip(&points[i]) {
                *s += x;
            }
        }
        for c in 0..k {
            for s in sums[c].iter_mut() {
                *s /= sizes[c] as f64;
            }
        }
        centroids = sums;
        if labels == previous {
            break;
        }
    }
    let mut inertia = 0.0;
    for &i in order {
        inertia += sq_dist(&points[i], &centroids[labels[i]]);
    }
    KmeansFit {
        labels,
        centroids,
        inertia,
    }
}

/// Best-of-`restarts` k-means. Restart 0 seeds by deterministic
/// farthest-point spread along a seeded direction; later restarts seed by
/// squared-distance sampling so they can escape the spread's basin.
/// Deterministic for a fixed seed; equal inertia across restarts resolves to
/// the lowest restart index, so results do not depend on evaluation order.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KmeansFit> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if points.len() < k {
        return Err(Error::InsufficientPoints {
            distinct: points.len(),
            k,
        });
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(Error::InsufficientPoints { distinct, k });
    }
    let restarts = restarts.max(1);
    let order = canonical_order(points);
    let dim = points[0].len();

    let mut best: Option<KmeansFit> = None;
    for r in 0..restarts {
        let mut rng = rng_from(derive_seed_indexed(seed, "kmeans.init", r as u64));
        let centroids = if r == 0 {
            let mut direction = vec![0.0; dim];
            loop {
                for d in direction.iter_mut() {
                    *d = rng.random::<f64>() - 0.5;
                }
                let n: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
                if n > 1e-6 {
                    for d in direction.iter_mut() {
                        *d /= n;
                    }
                    break;
                }
            }
            seed_farthest(points, &order, k, &direction)
        } else {
            seed_sampled(points, &order, k, &mut rng)
        };
        let fit = lloyd(points, &order, k, centroids);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart ran"))
}
