use crate::error::{Error, Result};
use crate::linalg::{
    l2, operator_norm, truncated_svd_without, ColumnIndexSet, DenseMatrix, SIGMA_FLOOR,
};
use crate::threshold::top_fraction;

use super::{
    basis_without, check_rank, check_reference, default_iterations, reference_residual,
    IterationRecord, RecoveryResult, Termination,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TorpConfig {
    pub target_rank: usize,
    /// Fraction ρ of columns thresholded by each of the two scores.
    pub threshold_fraction: f64,
    /// Explicit iteration count; `None` derives it from `epsilon`.
    pub iterations: Option<usize>,
    /// Target accuracy behind the default iteration count
    /// `⌈log₂(10 n ‖M*‖₂ / ε)⌉`.
    pub epsilon: f64,
    /// Stop once the support repeats. The remaining iterations would
    /// reproduce it exactly, so the output is unchanged.
    pub stop_on_fixed_point: bool,
}

impl TorpConfig {
    pub fn new(target_rank: usize, threshold_fraction: f64, epsilon: f64) -> Self {
        Self {
            target_rank,
            threshold_fraction,
            iterations: None,
            epsilon,
            stop_on_fixed_point: true,
        }
    }

    /// ρ = 1/(128 μ² r).
    pub fn theoretical(target_rank: usize, mu: f64, epsilon: f64) -> Self {
        Self::new(
            target_rank,
            1.0 / (128.0 * mu * mu * target_rank as f64),
            epsilon,
        )
    }

    pub fn with_iterations(mut self, t: usize) -> Self {
        self.iterations = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rank == 0 {
            return Err(Error::InvalidParameter(
                "target rank must be at least 1".into(),
            ));
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold fraction must lie in (0, 1), got {}",
                self.threshold_fraction
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.iterations == Some(0) {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn iterations_for(&self, m: &DenseMatrix) -> usize {
        self.iterations
            .unwrap_or_else(|| default_iterations(10.0, m.cols(), operator_norm(m), self.epsilon))
    }
}

/// Column scores of the full data against the rank-`k` SVD of `M*` with the
/// `support` columns zeroed.
pub(crate) struct Scores {
    pub residual: Vec<f64>,
    pub expressivity: Vec<f64>,
    pub degenerate: bool,
}

pub(crate) fn score_columns(m: &DenseMatrix, support: &ColumnIndexSet, k: usize) -> Result<Scores> {
    let svd = truncated_svd_without(m, support, k)?;
    let top = svd.sigma[0];
    let inv: Vec<f64> = svd
        .sigma
        .iter()
        .map(|&s| {
            if s > SIGMA_FLOOR * top && s > 0.0 {
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    let all_floored = inv.iter().all(|&x| x == 0.0);
    let basis: Vec<&[f64]> = (0..k).map(|c| svd.u.column(c)).collect();

    // One pass per column: c = Uᵀm_j gives both m_j - Uc and Σ⁻¹c.
    let mut residual = Vec::with_capacity(m.cols());
    let mut expressivity = Vec::with_capacity(m.cols());
    let mut rest = vec![0.0; m.rows()];
    for j in 0..m.cols() {
        let col = m.column(j);
        rest.copy_from_slice(col);
        let mut e: f64 = 0.0;
        for (b, w) in basis.iter().zip(&inv) {
            let c: f64 = b.iter().zip(col).map(|(x, y)| x * y).sum();
            rest.iter_mut().zip(*b).for_each(|(r, x)| *r -= c * x);
            e += (c * w).powi(2);
        }
        residual.push(l2(&rest));
        expressivity.push(e.sqrt());
    }
    Ok(Scores {
        residual,
        expressivity,
        degenerate: all_floored || svd.is_rank_deficient(),
    })
}

/// Noiseless thresholding-based outlier robust PCA.
pub fn torp(m: &DenseMatrix, cfg: &TorpConfig) -> Result<RecoveryResult> {
    torp_with_reference(m, cfg, None)
}

/// [`torp`], additionally recording `‖(I - U*U*ᵀ)(M* - C⁽ᵗ⁾)‖_F` for the
/// given reference basis in each trace record.
pub fn torp_with_reference(
    m: &DenseMatrix,
    cfg: &TorpConfig,
    reference: Option<&DenseMatrix>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    check_rank(m, cfg.target_rank)?;
    check_reference(m, reference)?;
    let r = cfg.target_rank;
    let rho = cfg.threshold_fraction;
    let total = cfg.iterations_for(m);

    let mut support = ColumnIndexSet::empty();
    let mut trace = Vec::new();
    let mut degenerate = false;
    let mut converged = false;

    for t in 0..=total {
        let scores = score_columns(m, &support, r)?;
        degenerate |= scores.degenerate;
        let next =
            top_fraction(&scores.residual, rho)?.union(&top_fraction(&scores.expressivity, rho)?);
        trace.push(IterationRecord {
            stage: 0,
            iteration: t,
            rank: r,
            support: next.clone(),
            reference_residual: reference_residual(reference, m, &support)?,
            high_expressivity: None,
            influence: None,
        });
        let repeated = next == support;
        support = next;
        if repeated && cfg.stop_on_fixed_point {
            converged = true;
            break;
        }
    }

    let (u, deficient, final_residual) = basis_without(m, &support, r, reference)?;
    degenerate |= deficient;
    let termination = if degenerate {
        Termination::Degenerate
    } else if converged {
        Termination::SupportConverged
    } else {
        Termination::Completed
    };
    Ok(RecoveryResult {
        subspace_u: u,
        estimated_support: support,
        trace,
        termination,
        degenerate,
        inner_loop_runs: 1,
        final_reference_residual: final_residual,
    })
}
