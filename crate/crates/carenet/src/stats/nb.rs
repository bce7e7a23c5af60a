//! NB2 regression with a log link. β is fit by iteratively reweighted least
//! squares at fixed dispersion, the dispersion by one-dimensional likelihood
//! maximization, and the two alternate to joint convergence.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::stats::design::DesignMatrix;

pub const ALPHA_MIN: f64 = 1e-8;
pub const ALPHA_MAX: f64 = 1e4;
const OUTER_MAX_ITER: usize = 100;
const IRLS_MAX_ITER: usize = 50;
const LOGLIK_TOL: f64 = 1e-8;
const ETA_CAP: f64 = 40.0;

/// Score exit tolerance, scaled like the score's rounding floor. The
/// matching β displacement is orders of magnitude below one standard error
/// at any n; a fixed absolute cutoff is unreachable for long responses.
fn score_tol(n: usize) -> f64 {
    1e-10 * (n as f64).max(100.0)
}

#[derive(Debug, Clone)]
pub struct NBRegressionFit {
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    /// NB2 dispersion α; variance is μ + αμ².
    pub dispersion: f64,
    pub loglik: f64,
    /// Coefficient covariance from the observed information.
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl NBRegressionFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|i| self.covariance[i][i].max(0.0).sqrt())
            .collect()
    }
}

/// Response collapsed to (value, multiplicity) pairs; the special-function
/// sums over y depend only on the distinct values.
struct CollapsedCounts {
    values: Vec<f64>,
    counts: Vec<f64>,
}

impl CollapsedCounts {
    fn new(response: &[u64]) -> Self {
        let mut sorted = response.to_vec();
        sorted.sort_unstable();
        let mut values = Vec::new();
        let mut counts = Vec::new();
        for &y in &sorted {
            if values.last() == Some(&(y as f64)) {
                *counts.last_mut().unwrap() += 1.0;
            } else {
                values.push(y as f64);
                counts.push(1.0);
            }
        }
        CollapsedCounts { values, counts }
    }

    /// Σ_i f(y_i) computed over distinct values.
    fn sum(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(&self.counts)
            .map(|(&y, &c)| c * f(y))
            .sum()
    }
}

fn linear_predictor(design: &DesignMatrix, beta: &[f64], eta: &mut [f64]) {
    eta.fill(0.0);
    for (c, col) in design.columns.iter().enumerate() {
        let b = beta[c];
        if b == 0.0 {
            continue;
        }
        for (e, &x) in eta.iter_mut().zip(col) {
            *e += b * x;
        }
    }
    for e in eta.iter_mut() {
        *e = e.clamp(-ETA_CAP, ETA_CAP);
    }
}

/// NB2 log-likelihood at (μ, α).
fn loglik_at(response: &[u64], collapsed: &CollapsedCounts, mu: &[f64], alpha: f64) -> f64 {
    let inv_alpha = 1.0 / alpha;
    let mut ll = collapsed.sum(|y| ln_gamma(y + inv_alpha) - ln_gamma(y + 1.0));
    ll -= response.len() as f64 * ln_gamma(inv_alpha);
    for (&y, &m) in response.iter().zip(mu) {
        let am = alpha * m;
        ll += -(inv_alpha) * (1.0 + am).ln() + y as f64 * (am.ln() - (1.0 + am).ln());
    }
    ll
}

/// dℓ/dα at fixed μ.
fn alpha_score(response: &[u64], collapsed: &CollapsedCounts, mu: &[f64], alpha: f64) -> f64 {
    let inv_alpha = 1.0 / alpha;
    let digamma_sum = collapsed.sum(|y| digamma(y + inv_alpha));
    let n = response.len() as f64;
    let mut score = inv_alpha * inv_alpha * (n * digamma(inv_alpha) - digamma_sum);
    for (&y, &m) in response.iter().zip(mu) {
        let am = alpha * m;
        score += inv_alpha * inv_alpha * (1.0 + am).ln() + (y as f64 - m) / (alpha * (1.0 + am));
    }
    score
}

/// β score vector Σ x_i (y_i − μ_i)/(1 + αμ_i).
fn beta_score(design: &DesignMatrix, mu: &[f64], alpha: f64) -> Vec<f64> {
    let mut score = vec![0.0; design.n_cols()];
    for (c, col) in design.columns.iter().enumerate() {
        let mut s = 0.0;
        for ((&x, &y), &m) in col.iter().zip(&design.response).zip(mu) {
            s += x * (y as f64 - m) / (1.0 + alpha * m);
        }
        score[c] = s;
    }
    score
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

/// Solve the symmetric positive definite system by Cholesky; None when the
/// matrix is not numerically positive definite.
pub(crate) fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Some(x)
}

pub(crate) fn invert_spd(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = cholesky_solve(a, &e)?;
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    // Symmetrize round-off.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (inv[i][j] + inv[j][i]);
            inv[i][j] = avg;
            inv[j][i] = avg;
        }
    }
    Some(inv)
}

/// Columns that are linear combinations of earlier ones, by Gram-Schmidt
/// with a relative threshold.
fn collinear_columns(design: &DesignMatrix) -> Vec<String> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for (c, col) in design.columns.iter().enumerate() {
        let original = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut residual = col.clone();
        for b in &basis {
            let proj: f64 = residual.iter().zip(b).map(|(r, q)| r * q).sum();
            for (r, q) in residual.iter_mut().zip(b) {
                *r -= proj * q;
            }
        }
        let nrm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Covers the all-zero column too: 0 <= 0.
        if nrm <= 1e-10 * original {
            names.push(design.column_names[c].clone());
        } else {
            for r in residual.iter_mut() {
                *r /= nrm;
            }
            basis.push(residual);
        }
    }
    names
}

/// Weighted normal equations XᵀWX and XᵀWz.
fn weighted_system(
    design: &DesignMatrix,
    weights: &[f64],
    z: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = design.n_cols();
    let mut xtwx = vec![vec![0.0; p]; p];
    let mut xtwz = vec![0.0; p];
    for a in 0..p {
        let col_a = &design.columns[a];
        for b in a..p {
            let col_b = &design.columns[b];
            let mut sum = 0.0;
            for i in 0..design.n_rows() {
                sum += col_a[i] * weights[i] * col_b[i];
            }
            xtwx[a][b] = sum;
            xtwx[b][a] = sum;
        }
        let mut sum = 0.0;
        for i in 0..design.n_rows() {
            sum += col_a[i] * weights[i] * z[i];
        }
        xtwz[a] = sum;
    }
    (xtwx, xtwz)
}

/// IRLS for β at fixed α; returns the improved β.
fn irls(
    design: &DesignMatrix,
    collapsed: &CollapsedCounts,
    mut beta: Vec<f64>,
    alpha: f64,
) -> Result<Vec<f64>> {
    let n = design.n_rows();
    let mut eta = vec![0.0; n];
    let mut mu = vec![0.0; n];
    for _ in 0..IRLS_MAX_ITER {
        linear_predictor(design, &beta, &mut eta);
        for (m, &e) in mu.iter_mut().zip(&eta) {
            *m = e.exp();
        }
        let current_ll = loglik_at(&design.response, collapsed, &mu, alpha);
        let score = beta_score(design, &mu, alpha);
        if max_abs(&score) <= score_tol(n) {
            break;
        }
        let weights: Vec<f64> = mu.iter().map(|&m| m / (1.0 + alpha * m)).collect();
        let z: Vec<f64> = eta
            .iter()
            .zip(&design.response)
            .zip(&mu)
            .map(|((&e, &y), &m)| e + (y as f64 - m) / m)
            .collect();
        let (xtwx, xtwz) = weighted_system(design, &weights, &z);
        let proposal = cholesky_solve(&xtwx, &xtwz)
            .ok_or_else(|| Error::CollinearColumns(collinear_columns(design)))?;

        // Step-halving keeps the likelihood from sliding backwards on an
        // aggressive IRLS update. The slack scales with |ℓ|: near the
        // optimum the true gain of a polish step sits below the rounding
        // noise of a length-n log-likelihood sum, and an absolute guard
        // would reject it.
        let slack = 1e-12 * (1.0 + current_ll.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&proposal)
                .map(|(&old, &new)| old + step * (new - old))
                .collect();
            linear_predictor(design, &candidate, &mut eta);
            for (m, &e) in mu.iter_mut().zip(&eta) {
                *m = e.exp();
            }
            let ll = loglik_at(&design.response, collapsed, &mu, alpha);
            if ll.is_finite() && ll >= current_ll - slack {
                // A bitwise no-op step means the arithmetic is exhausted.
                accepted = candidate.iter().zip(&beta).any(|(c, b)| c != b);
                beta = candidate;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // stuck at a numerically flat point
        }
    }
    Ok(beta)
}

/// Maximize the likelihood over α at fixed μ: expand a bracket geometrically
/// from `start`, then run Illinois false position on the score over ln α.
/// The bounds themselves are the answers when the score never changes sign
/// inside [ALPHA_MIN, ALPHA_MAX].
fn solve_alpha(response: &[u64], collapsed: &CollapsedCounts, mu: &[f64], start: f64) -> f64 {
    let score_at = |a: f64| alpha_score(response, collapsed, mu, a);
    let score_tol = 1e-10 * response.len() as f64;

    let a = start.clamp(ALPHA_MIN, ALPHA_MAX);
    let s = score_at(a);
    if s.abs() <= score_tol {
        return a;
    }
    // Bracket the sign change; score > 0 means the root lies above.
    let (lo, mut s_lo, hi, mut s_hi);
    if s > 0.0 {
        let (mut l, mut sl) = (a, s);
        loop {
            let c = (l * 16.0).min(ALPHA_MAX);
            let sc = score_at(c);
            if sc.abs() <= score_tol {
                return c;
            }
            if sc < 0.0 {
                (lo, s_lo, hi, s_hi) = (l, sl, c, sc);
                break;
            }
            if c >= ALPHA_MAX {
                return ALPHA_MAX;
            }
            (l, sl) = (c, sc);
        }
    } else {
        let (mut h, mut sh) = (a, s);
        loop {
            let c = (h / 16.0).max(ALPHA_MIN);
            let sc = score_at(c);
            if sc.abs() <= score_tol {
                return c;
            }
            if sc > 0.0 {
                (lo, s_lo, hi, s_hi) = (c, sc, h, sh);
                break;
            }
            if c <= ALPHA_MIN {
                // Likelihood decreasing in α down to the floor: equidispersion.
                return ALPHA_MIN;
            }
            (h, sh) = (c, sc);
        }
    }

    let (mut x_lo, mut x_hi) = (lo.ln(), hi.ln());
    let mut last_side = 0i8;
    for _ in 0..100 {
        if x_hi - x_lo < 1e-12 {
            break;
        }
        let x = ((x_lo * s_hi - x_hi * s_lo) / (s_hi - s_lo)).clamp(x_lo, x_hi);
        let s_x = score_at(x.exp());
        if s_x.abs() <= score_tol {
            return x.exp();
        }
        if s_x > 0.0 {
            (x_lo, s_lo) = (x, s_x);
            // Illinois damping: halve the stale endpoint's score so repeated
            // same-side updates cannot stall the secant.
            if last_side == 1 {
                s_hi *= 0.5;
            }
            last_side = 1;
        } else {
            (x_hi, s_hi) = (x, s_x);
            if last_side == -1 {
                s_lo *= 0.5;
            }
            last_side = -1;
        }
    }
    (0.5 * (x_lo + x_hi)).exp()
}

/// Observed information for β: Σ x xᵀ μ(1 + αy)/(1 + αμ)².
fn observed_information(design: &DesignMatrix, mu: &[f64], alpha: f64) -> Vec<Vec<f64>> {
    let weights: Vec<f64> = design
        .response
        .iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let denom = 1.0 + alpha * m;
            m * (1.0 + alpha * y as f64) / (denom * denom)
        })
        .collect();
    let p = design.n_cols();
    let mut info = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            let mut sum = 0.0;
            for i in 0..design.n_rows() {
                sum += design.columns[a][i] * weights[i] * design.columns[b][i];
            }
            info[a][b] = sum;
            info[b][a] = sum;
        }
    }
    info
}

pub fn fit_nb(design: &DesignMatrix) -> Result<NBRegressionFit> {
    fit_nb_inner(design, None)
}

/// Same model started from a nearby solution: skips the Poisson moment-start
/// pass and opens the dispersion search at `alpha0`. Converges to the same
/// optimum as [`fit_nb`]; the log-likelihood is strictly concave in β at
/// fixed α, and the α search is bracket-safeguarded.
pub fn fit_nb_warm(design: &DesignMatrix, beta0: &[f64], alpha0: f64) -> Result<NBRegressionFit> {
    if beta0.len() != design.n_cols() {
        return Err(Error::invalid(format!(
            "warm start has {} coefficients for {} columns",
            beta0.len(),
            design.n_cols()
        )));
    }
    if beta0.iter().any(|b| !b.is_finite()) || !alpha0.is_finite() {
        return Err(Error::invalid("warm start is not finite".to_string()));
    }
    fit_nb_inner(design, Some((beta0.to_vec(), alpha0.clamp(ALPHA_MIN, ALPHA_MAX))))
}

fn fit_nb_inner(design: &DesignMatrix, start: Option<(Vec<f64>, f64)>) -> Result<NBRegressionFit> {
    if design.n_rows() == 0 {
        return Err(Error::invalid("empty design".to_string()));
    }
    if design.n_rows() <= design.n_cols() {
        return Err(Error::invalid(format!(
            "{} rows cannot identify {} coefficients",
            design.n_rows(),
            design.n_cols()
        )));
    }
    let collinear = collinear_columns(design);
    if !collinear.is_empty() {
        return Err(Error::CollinearColumns(collinear));
    }

    let collapsed = CollapsedCounts::new(&design.response);
    let n = design.n_rows();
    let mut eta = vec![0.0; n];
    let mut mu = vec![0.0; n];

    let (mut beta, mut alpha) = match start {
        Some(pair) => pair,
        None => {
            // Moment start for α from a Poisson-ish first pass.
            let mean_y = design.response.iter().sum::<u64>() as f64 / n as f64;
            let mut beta = vec![0.0; design.n_cols()];
            beta[0] = (mean_y.max(0.1)).ln();
            beta = irls(design, &collapsed, beta, ALPHA_MIN)?;
            linear_predictor(design, &beta, &mut eta);
            for (m, &e) in mu.iter_mut().zip(&eta) {
                *m = e.exp();
            }
            let excess: f64 = design
                .response
                .iter()
                .zip(&mu)
                .map(|(&y, &m)| (y as f64 - m) * (y as f64 - m) - m)
                .sum();
            let mu_sq: f64 = mu.iter().map(|m| m * m).sum();
            let alpha = if mu_sq > 0.0 {
                (excess / mu_sq).clamp(ALPHA_MIN, ALPHA_MAX)
            } else {
                0.1
            };
            (beta, alpha)
        }
    };

    let mut last_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..OUTER_MAX_ITER {
        iterations += 1;
        beta = irls(design, &collapsed, beta, alpha)?;
        linear_predictor(design, &beta, &mut eta);
        for (m, &e) in mu.iter_mut().zip(&eta) {
            *m = e.exp();
        }
        alpha = solve_alpha(&design.response, &collapsed, &mu, alpha);
        let ll = loglik_at(&design.response, &collapsed, &mu, alpha);
        let score_ok = max_abs(&beta_score(design, &mu, alpha)) <= score_tol(n);
        if (ll - last_ll).abs() < LOGLIK_TOL && score_ok {
            last_ll = ll;
            converged = true;
            break;
        }
        last_ll = ll;
    }

    let info = observed_information(design, &mu, alpha);
    let covariance = invert_spd(&info)
        .ok_or_else(|| Error::CollinearColumns(collinear_columns(design)))?;

    Ok(NBRegressionFit {
        coefficients: beta,
        column_names: design.column_names.clone(),
        dispersion: alpha,
        loglik: last_ll,
        covariance,
        converged,
        iterations,
    })
}

/// Poisson log-likelihood, the α → 0 limit.
pub fn poisson_loglik(response: &[u64], mu: &[f64]) -> f64 {
    response
        .iter()
        .zip(mu)
        .map(|(&y, &m)| y as f64 * m.ln() - m - ln_gamma(y as f64 + 1.0))
        .sum()
}

/// Predicted mean at a covariate point.
pub fn predict_mean(fit: &NBRegressionFit, x: &[f64]) -> f64 {
    let eta: f64 = fit.coefficients.iter().zip(x).map(|(b, v)| b * v).sum();
    eta.exp()
}
