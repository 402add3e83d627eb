//! Column hard-thresholding operators.
//!
//! All three select columns by ℓ₂ norm. Ties are broken toward the smaller
//! column index so that results are reproducible.

use crate::error::{Error, Result};
use crate::linalg::{column_norms, ColumnIndexSet, DenseMatrix};

/// Indices of the `⌈rho·n⌉` longest columns of `scores`.
pub fn ht_fraction(scores: &DenseMatrix, rho: f64) -> Result<ColumnIndexSet> {
    let norms = column_norms(scores);
    top_fraction(&norms, rho)
}

/// Indices `{i : ‖scores_i‖ ≥ zeta}`. A negative `zeta` selects everything.
pub fn ht_value(scores: &DenseMatrix, zeta: f64) -> ColumnIndexSet {
    at_least(&column_norms(scores), zeta)
}

/// Indices of the `⌊alpha_prime·n⌋` longest columns. `alpha_prime` is
/// clamped into `[0, 1]`.
pub fn ht_longest_count(scores: &DenseMatrix, alpha_prime: f64) -> ColumnIndexSet {
    let norms = column_norms(scores);
    let a = alpha_prime.clamp(0.0, 1.0);
    let count = floor_count(a, norms.len());
    top_k(&norms, count)
}

/// [`ht_fraction`] on precomputed column norms.
pub fn top_fraction(norms: &[f64], rho: f64) -> Result<ColumnIndexSet> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction must lie in (0, 1], got {rho}"
        )));
    }
    Ok(top_k(norms, ceil_count(rho, norms.len())))
}

/// [`ht_value`] on precomputed column norms.
pub fn at_least(norms: &[f64], zeta: f64) -> ColumnIndexSet {
    norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= zeta)
        .map(|(i, _)| i)
        .collect()
}

/// The `k` largest entries of `norms`, ties by smaller index.
pub fn top_k(norms: &[f64], k: usize) -> ColumnIndexSet {
    let k = k.min(norms.len());
    if k == 0 {
        return ColumnIndexSet::empty();
    }
    let mut order: Vec<usize> = (0..norms.len()).collect();
    let cmp = |a: &usize, b: &usize| norms[*b].total_cmp(&norms[*a]).then(a.cmp(b));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    ColumnIndexSet::new(order)
}

// Counts of the form ⌈x·n⌉ and ⌊x·n⌋ computed in floating point; a relative
// slack of a few ulps keeps exact products such as 0.1·500 from rounding the
// wrong way.
const COUNT_SLACK: f64 = 1e-9;

pub(crate) fn ceil_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    ((x - COUNT_SLACK * x.max(1.0)).ceil().max(0.0) as usize).min(n)
}

pub(crate) fn floor_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    ((x + COUNT_SLACK * x.max(1.0)).floor().max(0.0) as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_norms(norms: &[f64]) -> DenseMatrix {
        // One-row matrix whose column norms are |norms|.
        DenseMatrix::from_rows(&[norms.to_vec()]).unwrap()
    }

    #[test]
    fn fraction_single_maximum() {
        let s = ht_fraction(&with_norms(&[5.0, 1.0, 3.0]), 1.0 / 3.0).unwrap();
        assert_eq!(s.as_slice(), &[0]);
    }

    #[test]
    fn fraction_ties_by_index() {
        let s = ht_fraction(&with_norms(&[2.0, 2.0, 2.0, 2.0]), 0.5).unwrap();
        assert_eq!(s.as_slice(), &[0, 1]);
    }

    #[test]
    fn fraction_rejects_out_of_range() {
        let m = with_norms(&[1.0]);
        assert!(ht_fraction(&m, 0.0).is_err());
        assert!(ht_fraction(&m, 1.5).is_err());
        assert!(ht_fraction(&m, f64::NAN).is_err());
    }

    #[test]
    fn fraction_rounds_up() {
        // ⌈0.3·10⌉ = 3, ⌈0.31·10⌉ = 4
        let m = with_norms(&[1.0; 10]);
        assert_eq!(ht_fraction(&m, 0.3).unwrap().len(), 3);
        assert_eq!(ht_fraction(&m, 0.31).unwrap().len(), 4);
        assert_eq!(
            ht_fraction(&with_norms(&[1.0; 500]), 0.1).unwrap().len(),
            50
        );
    }

    #[test]
    fn value_examples() {
        let m = with_norms(&[3.0, 1.0, 5.0]);
        assert_eq!(ht_value(&m, 0.0).as_slice(), &[0, 1, 2]);
        assert!(ht_value(&m, 5.5).is_empty());
        assert_eq!(ht_value(&m, 3.0).as_slice(), &[0, 2]);
    }

    #[test]
    fn longest_count_examples() {
        let m = with_norms(&[2.0, 9.0, 4.0, 7.0]);
        assert!(ht_longest_count(&m, 0.0).is_empty());
        assert_eq!(ht_longest_count(&m, 1.0).as_slice(), &[0, 1, 2, 3]);
        assert_eq!(ht_longest_count(&m, 0.5).as_slice(), &[1, 3]);
        // ⌊0.7·4⌋ = 2
        assert_eq!(ht_longest_count(&m, 0.7).len(), 2);
    }

    #[test]
    fn negative_scores_use_magnitude() {
        let m = with_norms(&[-9.0, 1.0]);
        assert_eq!(ht_fraction(&m, 0.5).unwrap().as_slice(), &[0]);
    }
}
