use proptest::prelude::*;
use torp::threshold::{ht_fraction, ht_longest_count, ht_value};
use torp::{ColumnIndexSet, DenseMatrix};

/// One-row score matrix: column norms are the absolute values of `norms`.
fn scores(norms: &[f64]) -> DenseMatrix {
    DenseMatrix::from_rows(&[norms.to_vec()]).unwrap()
}

/// Sort-and-take oracle: indices ordered by decreasing norm, then index.
fn oracle_top(norms: &[f64], k: usize) -> ColumnIndexSet {
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&a, &b| norms[b].abs().total_cmp(&norms[a].abs()).then(a.cmp(&b)));
    ColumnIndexSet::new(idx[..k].to_vec())
}

#[test]
fn fraction_matches_sort_oracle() {
    let norms = [0.4, 2.5, 1.0, 3.3, 0.2, 2.5, 0.9, 1.7, 2.9, 0.1];
    assert_eq!(
        ht_fraction(&scores(&norms), 0.3).unwrap(),
        oracle_top(&norms, 3)
    );
}

fn norms_strategy() -> impl Strategy<Value = Vec<f64>> {
    // Small integer grid so ties are common.
    proptest::collection::vec((0u8..6).prop_map(f64::from), 1..40)
}

proptest! {
    #[test]
    fn fraction_size_and_oracle(norms in norms_strategy(), rho in 0.001f64..=1.0) {
        let n = norms.len();
        let got = ht_fraction(&scores(&norms), rho).unwrap();
        let x = rho * n as f64;
        let k = (x - 1e-9 * x.max(1.0)).ceil() as usize;
        prop_assert_eq!(got.len(), k.clamp(1, n));
        prop_assert_eq!(got, oracle_top(&norms, k.clamp(1, n)));
    }

    #[test]
    fn fraction_contains_argmax(norms in norms_strategy(), rho in 0.001f64..=1.0) {
        let argmax = oracle_top(&norms, 1).as_slice()[0];
        prop_assert!(ht_fraction(&scores(&norms), rho).unwrap().contains(argmax));
    }

    #[test]
    fn longest_count_size(norms in norms_strategy(), alpha in 0.0f64..=1.0) {
        let n = norms.len();
        let got = ht_longest_count(&scores(&norms), alpha);
        let x = alpha * n as f64;
        let k = (x + 1e-9 * x.max(1.0)).floor() as usize;
        prop_assert_eq!(got.len(), k.min(n));
        prop_assert_eq!(got, oracle_top(&norms, k.min(n)));
    }

    #[test]
    fn value_monotone(norms in norms_strategy(), a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let m = scores(&norms);
        let big = ht_value(&m, lo);
        let small = ht_value(&m, hi);
        prop_assert!(small.is_subset(&big));
        let want: ColumnIndexSet = (0..norms.len()).filter(|&i| norms[i] >= lo).collect();
        prop_assert_eq!(big, want);
    }

    #[test]
    fn permutation_equivariance(
        norms in proptest::collection::vec(0.0f64..10.0, 1..30),
        perm_seed in any::<u64>(),
        rho in 0.01f64..=1.0,
        zeta in 0.0f64..10.0,
    ) {
        // Distinct norms: with ties, index tie-breaking is deliberately not
        // permutation invariant.
        let mut norms = norms;
        for (i, v) in norms.iter_mut().enumerate() {
            *v += i as f64 * 1e-6;
        }
        let n = norms.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = perm_seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        // Column j of the permuted matrix is column perm[j] of the original.
        let permuted: Vec<f64> = perm.iter().map(|&p| norms[p]).collect();
        let map = |s: ColumnIndexSet| -> ColumnIndexSet { s.iter().map(|j| perm[j]).collect() };

        prop_assert_eq!(map(ht_fraction(&scores(&permuted), rho).unwrap()), ht_fraction(&scores(&norms), rho).unwrap());
        prop_assert_eq!(map(ht_value(&scores(&permuted), zeta)), ht_value(&scores(&norms), zeta));
        prop_assert_eq!(map(ht_longest_count(&scores(&permuted), rho)), ht_longest_count(&scores(&norms), rho));
    }
}
