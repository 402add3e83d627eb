use crate::ellipsoid::{project, EllipsoidSpec};
use crate::error::{Error, Result};
use crate::linalg::{l2, truncated_svd_without, ColumnIndexSet, DenseMatrix, SIGMA_FLOOR};
use crate::threshold::at_least;

use super::{
    check_rank, check_reference, reference_residual, InfluenceStep, IterationRecord,
    RecoveryResult, Termination,
};

pub const DEFAULT_C1: f64 = 1.0 / 12288.0;
pub const DEFAULT_C2: f64 = 1.0 / 1536.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TorpGConfig {
    pub target_rank: usize,
    /// Incoherence μ of the inliers.
    pub incoherence: f64,
    /// Per-entry standard deviation σ of the Gaussian noise.
    pub noise_sigma: f64,
    pub c1: f64,
    pub c2: f64,
    /// Cap on support-changing passes; `None` uses `⌈n / (1024 μ² r)⌉`.
    pub max_iterations: Option<usize>,
    /// ℓ₂ accuracy of each ellipsoid projection.
    pub projection_tolerance: f64,
}

impl TorpGConfig {
    pub fn new(target_rank: usize, incoherence: f64, noise_sigma: f64) -> Self {
        Self {
            target_rank,
            incoherence,
            noise_sigma,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            max_iterations: None,
            projection_tolerance: 1e-10,
        }
    }

    pub fn with_max_iterations(mut self, t: usize) -> Self {
        self.max_iterations = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rank == 0 {
            return Err(Error::InvalidParameter(
                "target rank must be at least 1".into(),
            ));
        }
        if !(self.incoherence >= 1.0 && self.incoherence.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "incoherence must be at least 1, got {}",
                self.incoherence
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise level must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {c}"
                )));
            }
        }
        if !(self.projection_tolerance > 0.0 && self.projection_tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "projection tolerance must be positive, got {}",
                self.projection_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidParameter(
                "max iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Length threshold ζ₁ and influence threshold ζ₂ for ambient dimension `d`.
    pub fn thresholds(&self, d: usize) -> (f64, f64) {
        let mu = self.incoherence;
        let r = self.target_rank as f64;
        let d = d as f64;
        let s = self.noise_sigma;
        let zeta1 = s
            * (1.25 * mu * r.sqrt()
                + d.sqrt()
                + 2.0 * d.powf(0.25) * (mu * mu * r / self.c2).ln().max(0.0).sqrt());
        let zeta2 = s
            * (2.0 * r).sqrt()
            * (1.25 * mu + 2.0 * (mu * mu * r * r * d / self.c1).ln().max(0.0).sqrt());
        (zeta1, zeta2)
    }

    /// Minimum count of large-influence columns, `24 n c₁ / (μ² d r)`, for the
    /// ζ₂ threshold to apply.
    pub fn influence_cutoff(&self, d: usize, n: usize) -> f64 {
        let mu = self.incoherence;
        24.0 * n as f64 * self.c1 / (mu * mu * d as f64 * self.target_rank as f64)
    }

    /// Radius `2 μ √(r/n)` of the coefficient ball.
    pub fn ellipsoid_bound(&self, n: usize) -> f64 {
        2.0 * self.incoherence * (self.target_rank as f64 / n as f64).sqrt()
    }

    pub fn max_iterations_for(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| {
            let mu = self.incoherence;
            let t = n as f64 / (1024.0 * mu * mu * self.target_rank as f64);
            (t.ceil() as usize).max(1)
        })
    }
}

/// Distance of every column of the rank-`k` approximation `U Σ Vᵀ` to the
/// ellipsoid `{U Σ y : ‖y‖ ≤ b}`. Components with floored singular values are
/// dropped from both.
fn ellipsoid_distances(
    u: &DenseMatrix,
    sigma: &[f64],
    v: &DenseMatrix,
    bound: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = v.rows();
    let top = sigma[0];
    let kept = sigma
        .iter()
        .take_while(|&&s| s > 0.0 && s > SIGMA_FLOOR * top)
        .count();
    if kept == 0 {
        return Ok(vec![0.0; n]);
    }
    let spec = EllipsoidSpec::new(u.leading_columns(kept)?, sigma[..kept].to_vec(), bound)?;
    let mut out = Vec::with_capacity(n);
    let mut coeff = vec![0.0; kept];
    for i in 0..n {
        for (j, c) in coeff.iter_mut().enumerate() {
            *c = v.get(i, j);
        }
        let column = spec.embed(&coeff);
        let p = project(&spec, &column, tol)?;
        let diff: Vec<f64> = column.iter().zip(&p.point).map(|(a, b)| a - b).collect();
        out.push(l2(&diff));
    }
    Ok(out)
}

/// Outlier robust PCA for i.i.d. Gaussian noise.
///
/// Each pass takes the rank-`(r+1)` SVD of the data with the current support
/// removed, measures how far each column of that approximation lies from the
/// ellipsoid of typical inliers, and adds columns beyond ζ₁ (and beyond ζ₂
/// when enough columns exceed it) to the support. The support only grows.
/// Stops once a pass adds nothing.
pub fn torp_g(m: &DenseMatrix, cfg: &TorpGConfig) -> Result<RecoveryResult> {
    torp_g_with_reference(m, cfg, None)
}

pub fn torp_g_with_reference(
    m: &DenseMatrix,
    cfg: &TorpGConfig,
    reference: Option<&DenseMatrix>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let r = cfg.target_rank;
    check_rank(m, r)?;
    check_reference(m, reference)?;
    let (d, n) = m.shape();
    let k = (r + 1).min(d.min(n));
    let (zeta1, zeta2) = cfg.thresholds(d);
    // With σ = 0 both thresholds vanish and every column would pass `≥ 0`;
    // keep them above the projection accuracy.
    let floor = 2.0 * cfg.projection_tolerance;
    let (zeta1, zeta2) = (zeta1.max(floor), zeta2.max(floor));
    let cutoff = cfg.influence_cutoff(d, n);
    let bound = cfg.ellipsoid_bound(n);
    let cap = cfg.max_iterations_for(n);

    let mut support = ColumnIndexSet::empty();
    let mut trace = Vec::new();
    let mut degenerate = false;
    let mut changes = 0;
    let mut t = 0;

    let (u, final_residual, termination) = loop {
        let svd = truncated_svd_without(m, &support, k)?;
        let top = svd.sigma[0];
        degenerate |= top == 0.0 || svd.sigma[r - 1] <= SIGMA_FLOOR * top;
        let dist =
            ellipsoid_distances(&svd.u, &svd.sigma, &svd.v, bound, cfg.projection_tolerance)?;

        let length_selected = at_least(&dist, zeta1);
        let large_influence = dist.iter().filter(|&&x| x > zeta2).count();
        let fired = large_influence as f64 >= cutoff;
        let influence_selected = if fired {
            at_least(&dist, zeta2)
        } else {
            ColumnIndexSet::empty()
        };
        let next = support.union(&length_selected).union(&influence_selected);
        let residual = reference_residual(reference, m, &support)?;
        trace.push(IterationRecord {
            stage: 0,
            iteration: t,
            rank: k,
            support: next.clone(),
            reference_residual: residual,
            high_expressivity: None,
            influence: Some(InfluenceStep {
                large_influence,
                fired,
                length_selected,
                influence_selected,
            }),
        });

        let u = svd.u.leading_columns(r)?;
        if next == support {
            break (u, residual, Termination::SupportConverged);
        }
        if changes == cap {
            break (u, residual, Termination::IterationCap);
        }
        support = next;
        changes += 1;
        t += 1;
    };

    let termination = match termination {
        Termination::SupportConverged if degenerate => Termination::Degenerate,
        other => other,
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
