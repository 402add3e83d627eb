use crate::error::Result;
use crate::linalg::DenseMatrix;

use super::torp_n::{fallback, inner_loop, Accepted, TorpNConfig};
use super::{basis_without, check_rank, check_reference, RecoveryResult, Termination};

/// [`torp_n`](super::torp_n) with a binary search over the rank instead of a
/// linear scan. Runs at most `⌊log₂ r⌋ + 1` inner loops.
pub fn torp_bin(m: &DenseMatrix, cfg: &TorpNConfig) -> Result<RecoveryResult> {
    torp_bin_with_reference(m, cfg, None)
}

pub fn torp_bin_with_reference(
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
    let mut any_stopped = false;
    let (mut min_k, mut max_k) = (1usize, cfg.target_rank);
    let mut runs = 0;

    while min_k <= max_k {
        let k = (min_k + max_k) / 2;
        let inner = inner_loop(m, cfg, k, runs, iterations, reference, &mut trace)?;
        runs += 1;
        degenerate |= inner.degenerate;
        if inner.stopped {
            any_stopped = true;
            max_k = k - 1;
        } else {
            min_k = k + 1;
            let (u, deficient, residual) = basis_without(m, &inner.support, k, reference)?;
            degenerate |= deficient;
            accepted = Some(Accepted {
                u,
                support: inner.support,
                residual,
            });
        }
    }

    let fell_back = accepted.is_none();
    let accepted = match accepted {
        Some(a) => a,
        None => fallback(m, cfg.target_rank, reference)?,
    };
    degenerate |= fell_back;
    let termination = if any_stopped {
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
