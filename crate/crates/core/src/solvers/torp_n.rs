use crate::error::{Error, Result};
use crate::linalg::{operator_norm, truncated_svd, ColumnIndexSet, DenseMatrix};
use crate::threshold::top_fraction;

use super::torp::score_columns;
use super::{
    basis_without, check_rank, check_reference, default_iterations, reference_residual,
    IterationRecord, RecoveryResult, Termination,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TorpNConfig {
    pub target_rank: usize,
    /// Expressivity level η counted by the stopping rule.
    pub expressivity: f64,
    pub threshold_fraction: f64,
    /// Inner iterations per rank; `None` uses `⌈log₂(20 n ‖M*‖₂ / ε)⌉`.
    pub inner_iterations: Option<usize>,
    pub epsilon: f64,
    /// Leave an inner loop early once its support repeats (output unchanged).
    pub stop_on_fixed_point: bool,
}

impl TorpNConfig {
    pub fn new(
        target_rank: usize,
        expressivity: f64,
        threshold_fraction: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            target_rank,
            expressivity,
            threshold_fraction,
            inner_iterations: None,
            epsilon,
            stop_on_fixed_point: true,
        }
    }

    /// ρ = 1/(128 μ² r) and η = 2 μ √(r/n).
    pub fn theoretical(target_rank: usize, mu: f64, n: usize, epsilon: f64) -> Self {
        let r = target_rank as f64;
        Self::new(
            target_rank,
            2.0 * mu * (r / n as f64).sqrt(),
            1.0 / (128.0 * mu * mu * r),
            epsilon,
        )
    }

    pub fn with_inner_iterations(mut self, t: usize) -> Self {
        self.inner_iterations = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rank == 0 {
            return Err(Error::InvalidParameter(
                "target rank must be at least 1".into(),
            ));
        }
        if !(self.expressivity > 0.0 && self.expressivity.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "expressivity must be positive, got {}",
                self.expressivity
            )));
        }
        // HT_{2ρ} is applied to the expressivity scores, so 2ρ must stay a
        // valid fraction.
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "threshold fraction must lie in (0, 1/2], got {}",
                self.threshold_fraction
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.inner_iterations == Some(0) {
            return Err(Error::InvalidParameter(
                "inner iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn inner_iterations_for(&self, m: &DenseMatrix) -> usize {
        self.inner_iterations
            .unwrap_or_else(|| default_iterations(20.0, m.cols(), operator_norm(m), self.epsilon))
    }
}

/// Outcome of one inner loop at a fixed rank.
pub(crate) struct InnerLoop {
    /// Whether the expressivity count reached `2ρn` in some iteration.
    pub stopped: bool,
    pub support: ColumnIndexSet,
    pub degenerate: bool,
}

pub(crate) fn inner_loop(
    m: &DenseMatrix,
    cfg: &TorpNConfig,
    k: usize,
    stage: usize,
    iterations: usize,
    reference: Option<&DenseMatrix>,
    trace: &mut Vec<IterationRecord>,
) -> Result<InnerLoop> {
    let rho = cfg.threshold_fraction;
    let cutoff = 2.0 * rho * m.cols() as f64;
    let mut support = ColumnIndexSet::empty();
    let mut stopped = false;
    let mut degenerate = false;

    for t in 0..=iterations {
        let scores = score_columns(m, &support, k)?;
        degenerate |= scores.degenerate;
        let next = top_fraction(&scores.expressivity, 2.0 * rho)?
            .union(&top_fraction(&scores.residual, rho)?);
        let n_thres = scores
            .expressivity
            .iter()
            .filter(|&&e| e >= cfg.expressivity)
            .count();
        stopped |= n_thres as f64 >= cutoff;
        trace.push(IterationRecord {
            stage,
            iteration: t,
            rank: k,
            support: next.clone(),
            reference_residual: reference_residual(reference, m, &support)?,
            high_expressivity: Some(n_thres),
            influence: None,
        });
        let repeated = next == support;
        support = next;
        if repeated && cfg.stop_on_fixed_point {
            break;
        }
    }
    Ok(InnerLoop {
        stopped,
        support,
        degenerate,
    })
}

/// Accepted basis of a successful inner loop.
pub(crate) struct Accepted {
    pub u: DenseMatrix,
    pub support: ColumnIndexSet,
    pub residual: Option<f64>,
}

/// Vanilla `SVD_r(M*)` returned when no rank stage succeeded.
pub(crate) fn fallback(
    m: &DenseMatrix,
    r: usize,
    reference: Option<&DenseMatrix>,
) -> Result<Accepted> {
    Ok(Accepted {
        u: truncated_svd(m, r)?.u,
        support: ColumnIndexSet::empty(),
        residual: reference_residual(reference, m, &ColumnIndexSet::empty())?,
    })
}

/// Noisy thresholding-based outlier robust PCA with a linear scan over the
/// rank `k = 1..=r`.
pub fn torp_n(m: &DenseMatrix, cfg: &TorpNConfig) -> Result<RecoveryResult> {
    torp_n_with_reference(m, cfg, None)
}

pub fn torp_n_with_reference(
    m: &DenseMatrix,
    cfg: &TorpNConfig,
    reference: Option<&DenseMatrix>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    check_rank(m, cfg.target_rank)?;
    check_reference(m, reference)?;
    let iterations = cfg.inner_iterations_for(m);

    let mut trace = Vec::new();
    let mut accepted: Option<Accepted> = None;
    let mut degenerate = false;
    let mut stopped_early = false;
    let mut runs = 0;

    for k in 1..=cfg.target_rank {
        let inner = inner_loop(m, cfg, k, k - 1, iterations, reference, &mut trace)?;
        runs += 1;
        degenerate |= inner.degenerate;
        if inner.stopped {
            stopped_early = true;
            break;
        }
        let (u, deficient, residual) = basis_without(m, &inner.support, k, reference)?;
        degenerate |= deficient;
        accepted = Some(Accepted {
            u,
            support: inner.support,
            residual,
        });
    }

    let fell_back = accepted.is_none();
    let accepted = match accepted {
        Some(a) => a,
        None => fallback(m, cfg.target_rank, reference)?,
    };
    degenerate |= fell_back;
    let termination = if stopped_early {
        Termination::EarlyStopNThres
    } else if degenerate {
        Termination::Degenerate
    } else {
        Termination::Completed
    };

    Ok(RecoveryResult {
        subspace_u: accepted.u,
        estimated_support: accepted.support,
        trace,
        termination,
        degenerate,
        inner_loop_runs: runs,
        final_reference_residual: accepted.residual,
    })
}
