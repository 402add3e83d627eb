//! Thresholding-based outlier robust PCA solvers.
//!
//! * [`torp`]: noiseless setting, fixed rank, fresh thresholded set each
//!   iteration.
//! * [`torp_n`]: arbitrary noise, linear scan over the rank with an
//!   expressivity-count stopping rule.
//! * [`torp_bin`]: as `torp_n` with a binary search over the rank.
//! * [`torp_g`]: Gaussian noise, length and influence thresholds against an
//!   ellipsoid of typical inliers, cumulative support.
//!
//! Every solver is single-threaded and deterministic.

mod torp;
mod torp_bin;
mod torp_g;
mod torp_n;

pub use torp::{torp, torp_with_reference, TorpConfig};
pub use torp_bin::{torp_bin, torp_bin_with_reference};
pub use torp_g::{torp_g, torp_g_with_reference, TorpGConfig, DEFAULT_C1, DEFAULT_C2};
pub use torp_n::{torp_n, torp_n_with_reference, TorpNConfig};

use crate::error::{Error, Result};
use crate::linalg::{
    residual_projection, truncated_svd_without, zero_columns, ColumnIndexSet, DenseMatrix,
};

/// Why a solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Ran the full iteration budget.
    Completed,
    /// The expressivity count fired; the last accepted rank was returned.
    EarlyStopNThres,
    /// The thresholded support stopped changing. For `torp`/`torp_n` the
    /// remaining iterations would have been exact repeats.
    SupportConverged,
    /// `torp_g` hit its iteration cap with the support still changing.
    IterationCap,
    /// Some iterate had numerical rank below the requested rank.
    Degenerate,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::EarlyStopNThres => "early_stop_n_thres",
            Termination::SupportConverged => "support_converged",
            Termination::IterationCap => "iteration_cap",
            Termination::Degenerate => "degenerate",
        }
    }
}

/// Details of one `torp_g` thresholding step.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceStep {
    /// `|{i : dist_i > ζ₂}|`.
    pub large_influence: usize,
    /// Whether the count reached the influence cutoff.
    pub fired: bool,
    /// Columns selected by the length threshold ζ₁.
    pub length_selected: ColumnIndexSet,
    /// Columns selected by the influence threshold ζ₂ (empty unless fired).
    pub influence_selected: ColumnIndexSet,
}

/// One solver iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// Outer pass index (rank stage for `torp_n`/`torp_bin`, 0 otherwise).
    pub stage: usize,
    /// Inner iteration index within the stage.
    pub iteration: usize,
    /// Rank of the SVD computed in this iteration.
    pub rank: usize,
    /// Support produced by this iteration.
    pub support: ColumnIndexSet,
    /// `‖(I - U* U*ᵀ)(M* - C)‖_F` of the iterate fed into this iteration,
    /// when a reference basis was supplied.
    pub reference_residual: Option<f64>,
    /// Expressivity count `|{i : ‖E_i‖ ≥ η}|` (`torp_n`/`torp_bin`).
    pub high_expressivity: Option<usize>,
    /// Thresholding details (`torp_g`).
    pub influence: Option<InfluenceStep>,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    /// Orthonormal `d x k` estimate of the principal subspace.
    pub subspace_u: DenseMatrix,
    /// Columns flagged as outliers by the final thresholding step.
    pub estimated_support: ColumnIndexSet,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// Set when an iterate was rank-deficient or a fallback answer was
    /// returned.
    pub degenerate: bool,
    /// Number of complete inner loops run (rank stages or binary-search
    /// passes); 1 for single-loop solvers.
    pub inner_loop_runs: usize,
    /// `‖(I - U* U*ᵀ)(M* - C_final)‖_F` for the matrix the returned basis was
    /// computed from, when a reference basis was supplied.
    pub final_reference_residual: Option<f64>,
}

impl RecoveryResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// `⌈log₂(factor · n · ‖M‖₂ / ε)⌉`, at least 1.
pub(crate) fn default_iterations(factor: f64, n: usize, op_norm: f64, epsilon: f64) -> usize {
    let x = factor * n as f64 * op_norm / epsilon;
    if x.is_finite() && x > 2.0 {
        x.log2().ceil() as usize
    } else {
        1
    }
}

pub(crate) fn check_rank(m: &DenseMatrix, r: usize) -> Result<()> {
    let max = m.rows().min(m.cols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { k: r, max });
    }
    Ok(())
}

pub(crate) fn check_reference(m: &DenseMatrix, reference: Option<&DenseMatrix>) -> Result<()> {
    match reference {
        Some(u) if u.rows() != m.rows() => Err(Error::DimensionMismatch(format!(
            "reference basis has {} rows, data has {}",
            u.rows(),
            m.rows()
        ))),
        _ => Ok(()),
    }
}

/// Reference residual of `M*` with the columns in `support` zeroed.
pub(crate) fn reference_residual(
    reference: Option<&DenseMatrix>,
    m: &DenseMatrix,
    support: &ColumnIndexSet,
) -> Result<Option<f64>> {
    reference
        .map(|u| {
            let iterate = zero_columns(m, support)?;
            residual_projection(u, &iterate).map(|r| r.frobenius_norm())
        })
        .transpose()
}

/// Left factor of `SVD_k(M* - C)` where `C` is `M*` restricted to `support`.
pub(crate) fn basis_without(
    m: &DenseMatrix,
    support: &ColumnIndexSet,
    k: usize,
    reference: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, bool, Option<f64>)> {
    let svd = truncated_svd_without(m, support, k)?;
    let residual = reference_residual(reference, m, support)?;
    Ok((svd.u.clone(), svd.is_rank_deficient(), residual))
}
