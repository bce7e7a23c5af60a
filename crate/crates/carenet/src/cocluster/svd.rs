//! Truncated SVD by orthogonal (subspace) iteration on the smaller Gram
//! operator, with a Rayleigh-Ritz rotation once the block converges.
//!
//! The start block is a fixed pseudorandom matrix, so results are
//! deterministic without any caller-supplied seed. Signs are canonicalized
//! with a coordinate-order-free rule so that permuting the input rows or
//! columns cannot flip a vector.

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;
use crate::seeding::splitmix64;

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Descending singular values.
    pub singular_values: Vec<f64>,
    /// Left singular vectors; `left[j]` has one entry per matrix row.
    pub left: Vec<Vec<f64>>,
    /// Right singular vectors; `right[j]` has one entry per matrix column.
    pub right: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Deterministic start vector; `tag` separates independent draws.
fn seed_vector(n: usize, tag: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let bits = splitmix64(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (i as u64 + 1));
            // Map to [-0.5, 0.5); never exactly zero across a whole vector.
            (bits >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Modified Gram-Schmidt. Columns that cancel to numerical zero are replaced
/// with fresh deterministic vectors so the block always stays full rank.
fn orthonormalize(block: &mut [Vec<f64>], fresh_tag: &mut u64) {
    let n = block[0].len();
    for j in 0..block.len() {
        let mut attempts = 0;
        loop {
            for i in 0..j {
                let (head, tail) = block.split_at_mut(j);
                let c = dot(&head[i], &tail[0]);
                axpy(&mut tail[0], -c, &head[i]);
            }
            let nrm = norm(&block[j]);
            if nrm > 1e-12 {
                let inv = 1.0 / nrm;
                for x in block[j].iter_mut() {
                    *x *= inv;
                }
                break;
            }
            *fresh_tag += 1;
            block[j] = seed_vector(n, 0xfeed_0000 + *fresh_tag);
            attempts += 1;
            assert!(attempts < 64, "cannot complete an orthonormal block");
        }
    }
}

/// Jacobi eigendecomposition of a small symmetric matrix, eigenvalues
/// descending. Returns (eigenvalues, eigenvectors as columns).
fn symmetric_eig(a: &mut Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + p as f64) {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if a[i][j].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[j][j] - a[i][i]) / (2.0 * a[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (aik, ajk) = (a[i][k], a[j][k]);
                    a[i][k] = c * aik - s * ajk;
                    a[j][k] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let (aki, akj) = (a[k][i], a[k][j]);
                    a[k][i] = c * aki - s * akj;
                    a[k][j] = s * aki + c * akj;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[k][i], v[k][j]);
                    v[k][i] = c * vki - s * vkj;
                    v[k][j] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..p).map(|row| v[row][col]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// Which side the Gram operator lives on.
enum Side {
    Rows,
    Cols,
}

/// Apply the Gram operator (M Mᵀ or Mᵀ M, whichever is smaller).
fn gram_apply(m: &CsrMatrix, side: &Side, x: &[f64]) -> Vec<f64> {
    match side {
        Side::Rows => {
            let mut mid = vec![0.0; m.ncols()];
            m.matvec_transpose(x, &mut mid);
            let mut out = vec![0.0; m.nrows()];
            m.matvec(&mid, &mut out);
            out
        }
        Side::Cols => {
            let mut mid = vec![0.0; m.nrows()];
            m.matvec(x, &mut mid);
            let mut out = vec![0.0; m.ncols()];
            m.matvec_transpose(&mid, &mut out);
            out
        }
    }
}

/// Flip the sign of a (u, v) pair so the orientation is independent of row
/// and column order. Uses the sum of cubes, an odd permutation-free
/// statistic; falls back to the other side, then to fifth powers.
fn canonical_sign(u: &[f64], v: &[f64]) -> f64 {
    for stat in [
        u.iter().map(|x| x * x * x).sum::<f64>(),
        v.iter().map(|x| x * x * x).sum::<f64>(),
        u.iter().map(|x| x.powi(5)).sum::<f64>(),
        v.iter().map(|x| x.powi(5)).sum::<f64>(),
    ] {
        if stat.abs() > 1e-12 {
            return stat.signum();
        }
    }
    1.0
}

/// Top `num_vectors` singular triplets of a sparse matrix, descending.
///
/// Residuals are driven below `tol` relative to the largest Ritz value;
/// exceeding `max_iter` sweeps is an error carrying the last residual.
pub fn truncated_svd(
    m: &CsrMatrix,
    num_vectors: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SvdResult> {
    let small = m.nrows().min(m.ncols());
    if num_vectors < 1 || num_vectors > small {
        return Err(Error::invalid(format!(
            "num_vectors must be in 1..={small}, got {num_vectors}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }

    let side = if m.nrows() <= m.ncols() {
        Side::Rows
    } else {
        Side::Cols
    };
    let n = small;
    let p = num_vectors;

    let mut block: Vec<Vec<f64>> = (0..p).map(|j| seed_vector(n, j as u64 + 1)).collect();
    let mut fresh_tag = 0u64;
    orthonormalize(&mut block, &mut fresh_tag);

    let mut last_residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let images: Vec<Vec<f64>> = block.iter().map(|x| gram_apply(m, &side, x)).collect();
        let thetas: Vec<f64> = block.iter().zip(&images).map(|(x, y)| dot(x, y)).collect();
        let scale = thetas.iter().cloned().fold(0.0_f64, f64::max).max(1e-300);
        last_residual = block
            .iter()
            .zip(&images)
            .zip(&thetas)
            .map(|((x, y), &t)| {
                let mut r = y.clone();
                axpy(&mut r, -t, x);
                norm(&r)
            })
            .fold(0.0_f64, f64::max)
            / scale;
        if last_residual <= tol {
            block = images;
            orthonormalize(&mut block, &mut fresh_tag);
            converged = true;
            break;
        }
        block = images;
        orthonormalize(&mut block, &mut fresh_tag);
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            iterations,
            residual: last_residual,
        });
    }

    // Rayleigh-Ritz: rotate the block to individual eigenvector estimates.
    let images: Vec<Vec<f64>> = block.iter().map(|x| gram_apply(m, &side, x)).collect();
    let mut t: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dot(&block[i], &images[j])).collect())
        .collect();
    // Symmetrize away matvec round-off.
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (t[i][j] + t[j][i]);
            t[i][j] = avg;
            t[j][i] = avg;
        }
    }
    let (thetas, rot) = symmetric_eig(&mut t);
    let mut gram_vectors: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, col) in block.iter().enumerate() {
                axpy(&mut out, rot[j][i], col);
            }
            out
        })
        .collect();
    orthonormalize(&mut gram_vectors, &mut fresh_tag);

    let mut singular_values = Vec::with_capacity(p);
    let mut left = Vec::with_capacity(p);
    let mut right = Vec::with_capacity(p);
    let sigma_floor = thetas[0].max(0.0).sqrt() * 1e-12;
    for (j, g) in gram_vectors.iter().enumerate() {
        let sigma = thetas[j].max(0.0).sqrt();
        singular_values.push(sigma);
        let (u, v) = match side {
            Side::Rows => {
                let mut image = vec![0.0; m.ncols()];
                m.matvec_transpose(g, &mut image);
                let v = cross_vector(&image, sigma, sigma_floor, &right, &mut fresh_tag);
                (g.clone(), v)
            }
            Side::Cols => {
                let mut image = vec![0.0; m.nrows()];
                m.matvec(g, &mut image);
                let u = cross_vector(&image, sigma, sigma_floor, &left, &mut fresh_tag);
                (u, g.clone())
            }
        };
        let s = canonical_sign(&u, &v);
        left.push(scaled(&u, s));
        right.push(scaled(&v, s));
    }
    Ok(SvdResult {
        singular_values,
        left,
        right,
    })
}

/// Recover the other-side vector M{ᵀ}g / σ. Below the σ floor the direction
/// is null-space filler: any unit vector orthogonal to the ones already
/// returned keeps the set orthonormal.
fn cross_vector(
    image: &[f64],
    sigma: f64,
    sigma_floor: f64,
    previous: &[Vec<f64>],
    fresh_tag: &mut u64,
) -> Vec<f64> {
    let n = image.len();
    let mut v = if sigma > sigma_floor && sigma > 0.0 {
        scaled(image, 1.0 / sigma)
    } else {
        vec![0.0; n]
    };
    // One clean-up pass against the previous vectors, then normalize; fall
    // back to filler if the result is numerically zero.
    let mut attempts = 0;
    loop {
        for prev in previous {
            let c = dot(prev, &v);
            axpy(&mut v, -c, prev);
        }
        let nrm = norm(&v);
        if nrm > 1e-12 {
            for x in v.iter_mut() {
                *x /= nrm;
            }
            return v;
        }
        *fresh_tag += 1;
        v = seed_vector(n, 0xcafe_0000 + *fresh_tag);
        attempts += 1;
        assert!(attempts < 64, "cannot complete an orthonormal block");
    }
}
