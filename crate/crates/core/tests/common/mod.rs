//! Reference implementations that share no numerical code with the crate.
#![allow(dead_code)]

use torp::DenseMatrix;

/// Left singular vectors (as columns) and singular values of `a`, sorted by
/// decreasing singular value, from a one-sided Jacobi sweep over the rows of
/// `a`.
pub fn jacobi_svd(a: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (d, n) = a.shape();
    // b[i] is row i of a; w accumulates the rotations applied to the rows.
    let mut b: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..n).map(|j| a.get(i, j)).collect())
        .collect();
    let mut w: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let alpha: f64 = b[p].iter().map(|x| x * x).sum();
                let beta: f64 = b[q].iter().map(|x| x * x).sum();
                let gamma: f64 = b[p].iter().zip(&b[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut b, p, q, c, s);
                rotate(&mut w, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = b
        .iter()
        .enumerate()
        .map(|(i, row)| (row.iter().map(|x| x * x).sum::<f64>().sqrt(), i))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    // Row i of w is the i-th rotated combination of the rows of a, i.e. the
    // i-th left singular vector.
    let u = order.iter().map(|&(_, i)| w[i].clone()).collect();
    let sigma = order.iter().map(|&(s, _)| s).collect();
    (u, sigma)
}

fn rotate(rows: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = rows.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Top-`k` left singular vectors of `a` as a `d x k` matrix.
pub fn oracle_basis(a: &DenseMatrix, k: usize) -> DenseMatrix {
    let (u, _) = jacobi_svd(a);
    DenseMatrix::from_columns(&u[..k]).unwrap()
}

pub fn oracle_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut s = jacobi_svd(a).1;
    s.truncate(a.rows().min(a.cols()));
    s
}

/// `‖(I - U Uᵀ) L‖_F` by explicit loops.
pub fn oracle_residual(u: &DenseMatrix, l: &DenseMatrix) -> f64 {
    let (d, n) = l.shape();
    let k = u.cols();
    let mut total = 0.0;
    for j in 0..n {
        let coeffs: Vec<f64> = (0..k)
            .map(|c| (0..d).map(|i| u.get(i, c) * l.get(i, j)).sum())
            .collect();
        for i in 0..d {
            let proj: f64 = (0..k).map(|c| u.get(i, c) * coeffs[c]).sum();
            let r = l.get(i, j) - proj;
            total += r * r;
        }
    }
    total.sqrt()
}

/// Projection of `x` onto `{U diag(sigma) z : ‖z‖ ≤ b}` by accelerated
/// projected gradient on `z`, run until the iterates stop moving.
pub fn oracle_ellipsoid_projection(u: &DenseMatrix, sigma: &[f64], b: f64, x: &[f64]) -> Vec<f64> {
    let (d, r) = u.shape();
    let c: Vec<f64> = (0..r)
        .map(|j| (0..d).map(|i| u.get(i, j) * x[i]).sum())
        .collect();
    let lipschitz = sigma.iter().map(|s| s * s).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let project_ball = |z: &mut Vec<f64>| {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > b {
            let f = if norm > 0.0 { b / norm } else { 0.0 };
            z.iter_mut().for_each(|v| *v *= f);
        }
    };
    let mut z = vec![0.0; r];
    let mut y = z.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        // Gradient of ½‖Σ y - c‖².
        let mut next: Vec<f64> = (0..r)
            .map(|j| y[j] - step * sigma[j] * (sigma[j] * y[j] - c[j]))
            .collect();
        project_ball(&mut next);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        let moved: f64 = next
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        y = next
            .iter()
            .zip(&z)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        z = next;
        t = t_next;
        if moved < 1e-16 {
            break;
        }
    }
    (0..d)
        .map(|i| (0..r).map(|j| u.get(i, j) * sigma[j] * z[j]).sum())
        .collect()
}

pub fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
