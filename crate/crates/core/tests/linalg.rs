mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torp::linalg::{
    coherence_scores, column_norms, operator_norm, residual_projection, singular_values,
    subspace_residual, truncated_svd, zero_columns, SIGMA_FLOOR,
};
use torp::{ColumnIndexSet, DenseMatrix};

use common::{jacobi_svd, oracle_residual, oracle_singular_values};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    DenseMatrix::from_column_slice(rows, cols, &data).unwrap()
}

fn orthonormal(d: usize, k: usize, seed: u64) -> DenseMatrix {
    truncated_svd(&random_matrix(d, k, seed), k).unwrap().u
}

fn max_abs_offdiag_gram(u: &DenseMatrix) -> f64 {
    let g = u.transpose().matmul(u).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - want).abs());
        }
    }
    worst
}

/// `‖m - best rank-k approximation‖_F` from the oracle's singular values.
fn oracle_tail(m: &DenseMatrix, k: usize) -> f64 {
    oracle_singular_values(m)[k..]
        .iter()
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn svd_matches_jacobi_oracle_on_random_8x10() {
    let m = random_matrix(8, 10, 3);
    let svd = truncated_svd(&m, 3).unwrap();
    let err = m.sub(&svd.reconstruct()).unwrap().frobenius_norm();
    assert!((err - oracle_tail(&m, 3)).abs() <= 1e-9);
    let (_, sigma) = jacobi_svd(&m);
    for (a, b) in svd.sigma.iter().zip(&sigma) {
        assert!((a - b).abs() <= 1e-10 * sigma[0]);
    }
}

#[test]
fn svd_sign_convention() {
    let m = random_matrix(6, 9, 11);
    let svd = truncated_svd(&m.scale(-1.0).unwrap(), 4).unwrap();
    for j in 0..4 {
        let first = svd.u.column(j).iter().find(|x| x.abs() > 1e-12).unwrap();
        assert!(*first >= 0.0);
    }
}

#[test]
fn pythagorean_identity() {
    for seed in 0..20 {
        let u = orthonormal(9, 3, seed);
        let m = random_matrix(9, 14, seed + 100);
        let r = residual_projection(&u, &m).unwrap().frobenius_norm();
        let inside = u.transpose().matmul(&m).unwrap().frobenius_norm();
        let total = m.frobenius_norm();
        assert!((r * r + inside * inside - total * total).abs() <= 1e-8);
    }
}

#[test]
fn residual_orthogonal_to_basis() {
    let u = orthonormal(7, 2, 1);
    let m = random_matrix(7, 12, 2);
    let r = residual_projection(&u, &m).unwrap();
    let ut_r = u.transpose().matmul(&r).unwrap();
    assert!(ut_r.as_slice().iter().all(|x| x.abs() <= 1e-10));
}

#[test]
fn coherence_matches_direct_evaluation() {
    let m = random_matrix(10, 25, 5);
    let svd = truncated_svd(&m, 4).unwrap();
    let e = coherence_scores(&svd, &m, SIGMA_FLOOR).unwrap();
    for i in 0..4 {
        for j in 0..25 {
            let direct: f64 =
                (0..10).map(|r| svd.u.get(r, i) * m.get(r, j)).sum::<f64>() / svd.sigma[i];
            assert!((e.get(i, j) - direct).abs() <= 1e-10);
        }
    }
}

#[test]
fn coherence_of_own_reconstruction_is_v() {
    let m = random_matrix(6, 15, 8);
    let svd = truncated_svd(&m, 3).unwrap();
    let l = svd.reconstruct();
    let e = coherence_scores(&svd, &l, SIGMA_FLOOR).unwrap();
    let norms = column_norms(&e);
    for (j, n) in norms.iter().enumerate() {
        let row: f64 = (0..3).map(|c| svd.v.get(j, c).powi(2)).sum::<f64>().sqrt();
        assert!((n - row).abs() <= 1e-10);
    }
}

#[test]
fn subspace_residual_is_compositional() {
    let u = orthonormal(8, 3, 21);
    let l = random_matrix(8, 11, 22);
    let direct = residual_projection(&u, &l).unwrap().frobenius_norm();
    assert!((subspace_residual(&u, &l).unwrap() - direct).abs() <= 1e-12);
    assert!((oracle_residual(&u, &l) - direct).abs() <= 1e-10);
}

#[test]
fn operator_norm_matches_oracle() {
    for seed in 0..10 {
        let m = random_matrix(6, 7, seed);
        let oracle = oracle_singular_values(&m)[0];
        assert!((operator_norm(&m) - oracle).abs() <= 1e-7 * oracle);
    }
}

#[test]
fn weyl_inequality() {
    for seed in 0..100 {
        let a = random_matrix(8, 12, seed);
        let e = random_matrix(8, 12, seed + 1000).scale(0.1).unwrap();
        let sa = singular_values(&a);
        let sae = singular_values(&a.add(&e).unwrap());
        let bound = operator_norm(&e) + 1e-8;
        for (x, y) in sa.iter().zip(&sae) {
            assert!((x - y).abs() <= bound, "seed {seed}");
        }
    }
}

#[test]
fn disjoint_support_monotonicity() {
    for seed in 0..100 {
        let full = random_matrix(7, 16, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let s: ColumnIndexSet = (0..16).filter(|_| rng.random_bool(0.5)).collect();
        let rest: ColumnIndexSet = (0..16).filter(|j| !s.contains(*j)).collect();
        let a = zero_columns(&full, &s).unwrap();
        let b = zero_columns(&full, &rest).unwrap();
        let sab = singular_values(&a.add(&b).unwrap());
        for ((x, y), z) in singular_values(&a)
            .iter()
            .zip(singular_values(&b))
            .zip(&sab)
        {
            assert!(x.max(y) <= z + 1e-8, "seed {seed}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_is_best_rank_k(rows in 1usize..30, cols in 1usize..30, k_seed in 0usize..1000, seed in 0u64..10_000) {
        let m = random_matrix(rows, cols, seed);
        let k = 1 + k_seed % rows.min(cols);
        let svd = truncated_svd(&m, k).unwrap();
        prop_assert!(max_abs_offdiag_gram(&svd.u) <= 1e-10);
        prop_assert!(max_abs_offdiag_gram(&svd.v) <= 1e-10);
        prop_assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.sigma.iter().all(|&s| s >= 0.0));
        let err = m.sub(&svd.reconstruct()).unwrap().frobenius_norm();
        prop_assert!(err <= oracle_tail(&m, k) + 1e-8 * m.frobenius_norm());
    }

    #[test]
    fn svd_handles_zeroed_columns(seed in 0u64..10_000, rank in 1usize..4) {
        // Low-rank input with many zero columns, as every solver iterate is.
        let left = random_matrix(9, rank, seed);
        let right = random_matrix(rank, 20, seed + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let s: ColumnIndexSet = (0..20).filter(|_| rng.random_bool(0.6)).collect();
        let m = zero_columns(&left.matmul(&right).unwrap(), &s).unwrap();
        let svd = truncated_svd(&m, rank.min(9)).unwrap();
        let err = m.sub(&svd.reconstruct()).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn residual_projection_idempotent(seed in 0u64..10_000, k in 1usize..5) {
        let u = orthonormal(6, k, seed);
        let m = random_matrix(6, 8, seed + 1);
        let once = residual_projection(&u, &m).unwrap();
        let twice = residual_projection(&u, &once).unwrap();
        prop_assert!(once.sub(&twice).unwrap().as_slice().iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn zero_columns_touches_only_selected(seed in 0u64..10_000, mask in proptest::collection::vec(any::<bool>(), 9)) {
        let m = random_matrix(4, 9, seed);
        let s: ColumnIndexSet = mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        let z = zero_columns(&m, &s).unwrap();
        prop_assert_eq!(z.shape(), m.shape());
        for j in 0..9 {
            if s.contains(j) {
                prop_assert!(z.column(j).iter().all(|&x| x == 0.0));
            } else {
                prop_assert_eq!(z.column(j), m.column(j));
            }
        }
    }
}
