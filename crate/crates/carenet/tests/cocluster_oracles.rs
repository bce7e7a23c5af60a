//! Co-clustering checked against dense brute-force linear algebra.

mod common;

use carenet::cocluster::{cocluster, embedding_dim, truncated_svd};
use carenet::datamodel::AreaUtilizationMatrix;
use carenet::matrix::CsrMatrix;
use carenet::seeding::{derive_seed, rng_from};
use carenet::synth::ari_maps;
use rand::Rng;

fn random_triplets(nrows: usize, ncols: usize, fill: f64, seed: u64) -> Vec<(usize, usize, f64)> {
    let mut rng = rng_from(seed);
    let mut triplets = Vec::new();
    for i in 0..nrows {
        for j in 0..ncols {
            if rng.random::<f64>() < fill {
                triplets.push((i, j, rng.random::<f64>() * 2.0 - 0.5));
            }
        }
    }
    triplets
}

#[test]
fn truncated_svd_matches_dense_jacobi() {
    let (nrows, ncols) = (40, 60);
    let triplets = random_triplets(nrows, ncols, 0.3, derive_seed(11, "svd.oracle"));
    let m = CsrMatrix::from_triplets(nrows, ncols, &triplets);
    let mut dense = vec![vec![0.0; ncols]; nrows];
    for &(i, j, v) in &triplets {
        dense[i][j] += v;
    }

    let k = 6;
    let svd = truncated_svd(&m, k, 1e-12, 5000).unwrap();
    let (sigma, u_cols, v_cols) = common::dense_svd(&dense);

    for j in 0..k {
        let rel = (svd.singular_values[j] - sigma[j]).abs() / sigma[0];
        assert!(rel <= 1e-8, "sigma[{j}]: {} vs oracle {}", svd.singular_values[j], sigma[j]);
    }
    // Random data has well-separated singular values, so each singular
    // vector must align with the oracle's up to sign.
    for j in 0..k {
        let du: f64 = svd.left[j].iter().zip(&u_cols[j]).map(|(a, b)| a * b).sum();
        let dv: f64 = svd.right[j].iter().zip(&v_cols[j]).map(|(a, b)| a * b).sum();
        assert!((du.abs() - 1.0).abs() < 1e-6, "left vector {j} misaligned: |dot| = {}", du.abs());
        assert!((dv.abs() - 1.0).abs() < 1e-6, "right vector {j} misaligned: |dot| = {}", dv.abs());
        // The two sides must carry consistent signs: A v = sigma u.
        assert!(
            (du - dv).abs() < 1e-6,
            "sign mismatch between sides on vector {j}: {du} vs {dv}"
        );
    }
}

#[test]
fn embedding_dim_is_ceil_log2() {
    for (k, ell) in [(2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4)] {
        assert_eq!(embedding_dim(k), ell, "k = {k}");
    }
}

#[test]
fn noisy_planted_blocks_recover_under_label_permutation() {
    // 30 areas x 120 patients, 3 blocks, strong contrast, light noise.
    let area_sizes = [12usize, 8, 10];
    let patient_sizes = [50usize, 30, 40];
    let mut rng = rng_from(derive_seed(11, "cocluster.noise"));
    let mut triplets = Vec::new();
    let mut truth_area = std::collections::BTreeMap::new();
    let mut truth_patient = std::collections::BTreeMap::new();
    let mut areas = Vec::new();
    let mut patients = Vec::new();
    let (mut a0, mut p0) = (0usize, 0usize);
    for g in 0..3 {
        for a in a0..a0 + area_sizes[g] {
            areas.push(format!("a{a:02}"));
            truth_area.insert(format!("a{a:02}"), g + 1);
        }
        for p in p0..p0 + patient_sizes[g] {
            patients.push(format!("p{p:03}"));
            truth_patient.insert(format!("p{p:03}"), g + 1);
        }
        a0 += area_sizes[g];
        p0 += patient_sizes[g];
    }
    let area_group = |i: usize| if i < 12 { 0 } else if i < 20 { 1 } else { 2 };
    let patient_group = |j: usize| if j < 50 { 0 } else if j < 80 { 1 } else { 2 };
    for i in 0..30 {
        for j in 0..120 {
            let base = if area_group(i) == patient_group(j) { 8.0 } else { 0.5 };
            let jitter: f64 = rng.random::<f64>();
            triplets.push((i, j, base + jitter));
        }
    }
    let matrix = AreaUtilizationMatrix::from_counts(areas, patients, &triplets);
    let assignment = cocluster(&matrix, 3, 17).unwrap();
    assert_eq!(ari_maps(&assignment.patient_group, &truth_patient).unwrap(), 1.0);
    assert_eq!(ari_maps(&assignment.area_group, &truth_area).unwrap(), 1.0);
}
