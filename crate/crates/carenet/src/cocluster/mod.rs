//! Spectral co-clustering of the area × patient count matrix, treated as a
//! bipartite graph partitioning problem: scale by the degree matrices, take
//! the leading singular subspace (skipping the trivial first triplet), and
//! jointly k-means the scaled row and column points.

pub mod kmeans;
pub mod svd;

use std::collections::BTreeMap;

use crate::datamodel::AreaUtilizationMatrix;
use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;

pub use kmeans::{kmeans, KmeansFit};
pub use svd::{truncated_svd, SvdResult};

pub const DEFAULT_K: usize = 3;
pub const SVD_TOL: f64 = 1e-10;
pub const SVD_MAX_ITER: usize = 1000;
pub const KMEANS_RESTARTS: usize = 10;

/// D₁⁻¹ᐟ² A′ D₂⁻¹ᐟ² over the rows and columns that have any actions.
#[derive(Debug, Clone)]
pub struct NormalizedMatrix {
    pub values: CsrMatrix,
    /// D₁⁻¹ᐟ² diagonal, one entry per retained row.
    pub row_scale: Vec<f64>,
    /// D₂⁻¹ᐟ² diagonal, one entry per retained column.
    pub col_scale: Vec<f64>,
    /// Original indices of dropped all-zero rows and columns.
    pub dropped_rows: Vec<usize>,
    pub dropped_cols: Vec<usize>,
    /// Ids of the retained rows (areas) and columns (patients).
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
}

/// Joint embedding: one ℓ-dimensional point per retained row, then one per
/// retained column.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub points: Vec<Vec<f64>>,
    pub ell: usize,
    /// Points 0..n_row_points belong to rows, the rest to columns.
    pub n_row_points: usize,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
}

/// Joint group assignment; labels run 1..=k.
#[derive(Debug, Clone, PartialEq)]
pub struct CoClusterAssignment {
    pub k: usize,
    pub patient_group: BTreeMap<String, usize>,
    pub area_group: BTreeMap<String, usize>,
    pub inertia: f64,
}

pub fn normalize(aprime: &AreaUtilizationMatrix) -> Result<NormalizedMatrix> {
    let row_sums = aprime.counts.row_sums();
    let col_sums = aprime.counts.col_sums();

    let keep_rows: Vec<usize> = (0..aprime.counts.nrows())
        .filter(|&i| row_sums[i] > 0.0)
        .collect();
    let keep_cols: Vec<usize> = (0..aprime.counts.ncols())
        .filter(|&j| col_sums[j] > 0.0)
        .collect();
    if keep_rows.is_empty() {
        return Err(Error::DegenerateMatrix("all rows are zero".to_string()));
    }
    if keep_cols.is_empty() {
        return Err(Error::DegenerateMatrix("all columns are zero".to_string()));
    }
    let dropped_rows: Vec<usize> = (0..aprime.counts.nrows())
        .filter(|&i| row_sums[i] <= 0.0)
        .collect();
    let dropped_cols: Vec<usize> = (0..aprime.counts.ncols())
        .filter(|&j| col_sums[j] <= 0.0)
        .collect();

    let row_scale: Vec<f64> = keep_rows.iter().map(|&i| 1.0 / row_sums[i].sqrt()).collect();
    let col_scale: Vec<f64> = keep_cols.iter().map(|&j| 1.0 / col_sums[j].sqrt()).collect();

    let values = aprime
        .counts
        .select(&keep_rows, &keep_cols)
        .scale(&row_scale, &col_scale);

    Ok(NormalizedMatrix {
        values,
        row_scale,
        col_scale,
        dropped_rows,
        dropped_cols,
        row_ids: keep_rows.iter().map(|&i| aprime.areas[i].clone()).collect(),
        col_ids: keep_cols
            .iter()
            .map(|&j| aprime.patients[j].clone())
            .collect(),
    })
}

/// Embedding dimension for k groups.
pub fn embedding_dim(k: usize) -> usize {
    // ⌈log₂ k⌉ for k ≥ 2.
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

/// Build the joint point set from singular vectors 2..ℓ+1, scaled back by
/// the degree matrices. The first triplet is the trivial all-positive one.
pub fn embed(svd: &SvdResult, m: &NormalizedMatrix, k: usize) -> Result<SpectralEmbedding> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let ell = embedding_dim(k);
    if svd.singular_values.len() < ell + 1 {
        return Err(Error::invalid(format!(
            "embedding for k = {k} needs {} singular triplets, have {}",
            ell + 1,
            svd.singular_values.len()
        )));
    }
    let n_rows = m.row_scale.len();
    let n_cols = m.col_scale.len();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n_rows + n_cols);
    for i in 0..n_rows {
        points.push((0..ell).map(|d| m.row_scale[i] * svd.left[d + 1][i]).collect());
    }
    for j in 0..n_cols {
        points.push((0..ell).map(|d| m.col_scale[j] * svd.right[d + 1][j]).collect());
    }
    Ok(SpectralEmbedding {
        points,
        ell,
        n_row_points: n_rows,
        row_ids: m.row_ids.clone(),
        col_ids: m.col_ids.clone(),
    })
}

/// Label the embedding's points and split the result back into area and
/// patient maps.
pub fn cluster_embedding(
    embedding: &SpectralEmbedding,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<CoClusterAssignment> {
    let fit = kmeans(&embedding.points, k, seed, restarts)?;
    let mut area_group = BTreeMap::new();
    for (i, id) in embedding.row_ids.iter().enumerate() {
        area_group.insert(id.clone(), fit.labels[i] + 1);
    }
    let mut patient_group = BTreeMap::new();
    for (j, id) in embedding.col_ids.iter().enumerate() {
        patient_group.insert(id.clone(), fit.labels[embedding.n_row_points + j] + 1);
    }
    Ok(CoClusterAssignment {
        k,
        patient_group,
        area_group,
        inertia: fit.inertia,
    })
}

/// Full pipeline stage: normalize, decompose, embed, cluster.
pub fn cocluster(aprime: &AreaUtilizationMatrix, k: usize, seed: u64) -> Result<CoClusterAssignment> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let m = normalize(aprime)?;
    let ell = embedding_dim(k);
    let svd = truncated_svd(&m.values, ell + 1, SVD_TOL, SVD_MAX_ITER)?;
    let embedding = embed(&svd, &m, k)?;
    cluster_embedding(&embedding, k, seed, KMEANS_RESTARTS)
}

/// Mean silhouette over all points. Singleton clusters score 0 for their
/// point, the usual convention.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::LabelLengthMismatch(points.len(), labels.len()));
    }
    if points.is_empty() {
        return Err(Error::invalid("silhouette of an empty point set".to_string()));
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] <= 1 {
            continue; // contributes 0
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j == i {
                continue;
            }
            sums[labels[j]] += sq_dist_sqrt(&points[i], &points[j]);
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    Ok(total / n as f64)
}

fn sq_dist_sqrt(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pick k in `k_min..=k_max` by mean silhouette of the joint clustering.
/// Ties resolve toward smaller k; k values whose clustering is degenerate
/// (too few distinct points) are skipped.
pub fn choose_k(
    aprime: &AreaUtilizationMatrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<usize> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::invalid(format!(
            "need 2 <= k_min <= k_max, got {k_min}..={k_max}"
        )));
    }
    let m = normalize(aprime)?;
    let max_vectors = (embedding_dim(k_max) + 1)
        .min(m.values.nrows())
        .min(m.values.ncols());
    let svd = truncated_svd(&m.values, max_vectors, SVD_TOL, SVD_MAX_ITER)?;

    // A near-zero second singular value means the graph has no second
    // cluster direction at all: every k ties at nothing, smallest wins.
    if svd.singular_values.len() < 2
        || svd.singular_values[1] <= 1e-10 * svd.singular_values[0].max(1e-300)
    {
        return Ok(k_min);
    }

    let mut best: Option<(usize, f64)> = None;
    for k in k_min..=k_max {
        if embedding_dim(k) + 1 > svd.singular_values.len() {
            break; // matrix too small to embed this k
        }
        let embedding = embed(&svd, &m, k)?;
        let assignment = match kmeans(&embedding.points, k, seed, KMEANS_RESTARTS) {
            Ok(fit) => fit,
            Err(Error::InsufficientPoints { .. }) => continue,
            Err(e) => return Err(e),
        };
        let score = silhouette(&embedding.points, &assignment.labels)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    Ok(best.map(|(k, _)| k).unwrap_or(k_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aprime(areas: usize, patients: usize, triplets: &[(usize, usize, f64)]) -> AreaUtilizationMatrix {
        AreaUtilizationMatrix::from_counts(
            (0..areas).map(|i| format!("a{i:03}")).collect(),
            (0..patients).map(|j| format!("p{j:03}")).collect(),
            triplets,
        )
    }

    #[test]
    fn normalize_identity_counts() {
        let m = aprime(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let n = normalize(&m).unwrap();
        assert_eq!(n.values.get(0, 0), 1.0);
        assert_eq!(n.values.get(0, 1), 0.0);
        assert_eq!(n.values.get(1, 1), 1.0);
        assert!(n.dropped_rows.is_empty());
        assert!(n.dropped_cols.is_empty());
    }

    #[test]
    fn normalize_drops_zero_column() {
        let m = aprime(2, 3, &[(0, 0, 2.0), (1, 2, 5.0)]);
        let n = normalize(&m).unwrap();
        assert_eq!(n.dropped_cols, vec![1]);
        assert_eq!(n.col_ids, vec!["p000", "p002"]);
        assert_eq!(n.values.ncols(), 2);
    }

    #[test]
    fn normalize_all_zero_is_degenerate() {
        let m = aprime(2, 2, &[]);
        assert!(matches!(normalize(&m), Err(Error::DegenerateMatrix(_))));
    }

    #[test]
    fn normalize_matches_direct_formula() {
        // Random-ish sparse pattern, checked cell by cell.
        let mut triplets = Vec::new();
        let mut state = 3u64;
        for i in 0..50 {
            for j in 0..200 {
                state = crate::seeding::splitmix64(state);
                if state % 13 == 0 {
                    triplets.push((i, j, (state % 7 + 1) as f64));
                }
            }
        }
        let m = aprime(50, 200, &triplets);
        let n = normalize(&m).unwrap();
        let row_sums = m.counts.row_sums();
        let col_sums = m.counts.col_sums();
        let keep_rows: Vec<usize> = (0..50).filter(|&i| row_sums[i] > 0.0).collect();
        let keep_cols: Vec<usize> = (0..200).filter(|&j| col_sums[j] > 0.0).collect();
        for (ri, &i) in keep_rows.iter().enumerate() {
            for (cj, &j) in keep_cols.iter().enumerate() {
                let want = m.counts.get(i, j) / (row_sums[i] * col_sums[j]).sqrt();
                let got = n.values.get(ri, cj);
                assert!((got - want).abs() < 1e-12, "cell ({i},{j}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn embedding_dims_follow_log2() {
        assert_eq!(embedding_dim(2), 1);
        assert_eq!(embedding_dim(3), 2);
        assert_eq!(embedding_dim(4), 2);
        assert_eq!(embedding_dim(5), 3);
        assert_eq!(embedding_dim(8), 3);
    }

    #[test]
    fn embed_rejects_small_k_and_short_svd() {
        let m = aprime(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let n = normalize(&m).unwrap();
        let svd = truncated_svd(&n.values, 2, 1e-10, 1000).unwrap();
        assert!(embed(&svd, &n, 1).is_err());
        assert!(embed(&svd, &n, 2).is_ok());
        assert!(embed(&svd, &n, 4).is_err()); // needs 3 triplets
    }

    fn two_block_matrix() -> AreaUtilizationMatrix {
        // Areas 0-1 serve patients 0-2; areas 2-3 serve patients 3-5.
        let mut triplets = Vec::new();
        for a in 0..2 {
            for p in 0..3 {
                triplets.push((a, p, 2.0 + ((a + p) % 2) as f64));
            }
        }
        for a in 2..4 {
            for p in 3..6 {
                triplets.push((a, p, 1.0 + ((a * p) % 3) as f64));
            }
        }
        aprime(4, 6, &triplets)
    }

    #[test]
    fn two_blocks_recovered_exactly() {
        let assignment = cocluster(&two_block_matrix(), 2, 42).unwrap();
        let a = &assignment.area_group;
        let p = &assignment.patient_group;
        assert_eq!(a["a000"], a["a001"]);
        assert_eq!(a["a002"], a["a003"]);
        assert_ne!(a["a000"], a["a002"]);
        for j in 0..3 {
            assert_eq!(p[&format!("p{j:03}")], a["a000"]);
        }
        for j in 3..6 {
            assert_eq!(p[&format!("p{j:03}")], a["a002"]);
        }
    }

    #[test]
    fn scale_invariance() {
        let base = two_block_matrix();
        let scaled = AreaUtilizationMatrix::from_counts(
            base.areas.clone(),
            base.patients.clone(),
            &base
                .counts
                .triplets()
                .map(|(i, j, v)| (i, j, v * 37.5))
                .collect::<Vec<_>>(),
        );
        let a = cocluster(&base, 2, 7).unwrap();
        let b = cocluster(&scaled, 2, 7).unwrap();
        assert_eq!(a.patient_group, b.patient_group);
        assert_eq!(a.area_group, b.area_group);
    }

    #[test]
    fn determinism_bit_for_bit() {
        let m = two_block_matrix();
        let a = cocluster(&m, 2, 9).unwrap();
        let b = cocluster(&m, 2, 9).unwrap();
        assert_eq!(a.patient_group, b.patient_group);
        assert_eq!(a.area_group, b.area_group);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    #[test]
    fn silhouette_direct_two_cluster_case() {
        let points: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let labels = vec![0, 0, 1, 1];
        let got = silhouette(&points, &labels).unwrap();
        // By hand: a = 1, b for point 0 is (10+11)/2 = 10.5, etc.
        let s0 = (10.5 - 1.0) / 10.5;
        let s1 = (9.5 - 1.0) / 9.5;
        let want = (s0 + s1 + s1 + s0) / 4.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn choose_k_finds_planted_block_count() {
        let m = two_block_matrix();
        assert_eq!(choose_k(&m, 2, 4, 11).unwrap(), 2);
    }

    #[test]
    fn choose_k_homogeneous_block_takes_k_min() {
        let mut triplets = Vec::new();
        for a in 0..4 {
            for p in 0..6 {
                triplets.push((a, p, 3.0));
            }
        }
        let m = aprime(4, 6, &triplets);
        assert_eq!(choose_k(&m, 2, 4, 11).unwrap(), 2);
    }

    #[test]
    fn choose_k_rejects_bad_range() {
        let m = two_block_matrix();
        assert!(choose_k(&m, 1, 4, 0).is_err());
        assert!(choose_k(&m, 4, 2, 0).is_err());
    }
}
