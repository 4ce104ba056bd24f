//! Naive reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use subspace_search::RngStream;

/// One-sided Jacobi SVD. Returns singular values in descending order and the
/// matching left singular vectors (columns with zero singular value are left
/// unnormalized and should not be used).
pub fn jacobi_svd(g: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut u = g.clone();
    let n = u.ncols();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u.nrows() {
                    let (a, b) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * a - s * b;
                    u[(i, q)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|j| (u.column(j).norm(), j)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut left = DMatrix::zeros(u.nrows(), n);
    for (k, &(sigma, j)) in pairs.iter().enumerate() {
        if sigma > 0.0 {
            left.set_column(k, &(u.column(j) / sigma));
        }
    }
    (pairs.iter().map(|p| p.0).collect(), left)
}

/// Frobenius residual of the best rank-`r` approximation, from singular values.
pub fn best_rank_residual(sigmas: &[f64], r: usize) -> f64 {
    sigmas.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt()
}

/// Spearman's rho straight from the definition: O(n^2) average ranks, then
/// Pearson on the ranks.
pub fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

/// `D x Q` matrix of rank at most `rank`, with a spread of singular values.
pub fn low_rank_matrix(rows: usize, cols: usize, rank: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for k in 0..rank {
        let scale = 10f64.powf(-(k as f64) / 4.0);
        let a = gaussian_matrix(rows, 1, rng);
        let b = gaussian_matrix(1, cols, rng);
        m += a * b * scale;
    }
    m
}

pub fn gaussian_vec(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}
