//! Euclidean projection onto the ellipsoid `{U Σ z : ‖z‖ ≤ b}`.
//!
//! The projection of `x` is `U Σ z*` with `z* = (Σ² + λ* I)⁻¹ Σ Uᵀ x`, where
//! the multiplier `λ* ≥ 0` is the root of the decreasing function
//! `f(λ) = ‖(Σ² + λ I)⁻¹ Σ Uᵀ x‖ = b`. [`fast_pr`] finds `λ*` by bisection
//! on `[0, ‖Σ Uᵀ x‖ / b]`.

use crate::error::{Error, Result};
use crate::linalg::{l2, DenseMatrix};

const ORTHONORMAL_TOL: f64 = 1e-10;

// Bisection on an f64 interval stops making progress long before this.
const MAX_BISECTION_STEPS: usize = 2_200;

/// Ellipsoid `{U Σ z : ‖z‖ ≤ b}` with orthonormal `U` (`d x r`) and strictly
/// positive diagonal `Σ`.
#[derive(Clone, Debug)]
pub struct EllipsoidSpec {
    u: DenseMatrix,
    sigma: Vec<f64>,
    bound: f64,
}

impl EllipsoidSpec {
    pub fn new(u: DenseMatrix, sigma: Vec<f64>, bound: f64) -> Result<Self> {
        if sigma.len() != u.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} semi-axes for a basis of {} columns",
                sigma.len(),
                u.cols()
            )));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid semi-axis must be positive, got {s}"
            )));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid bound must be finite and nonnegative, got {bound}"
            )));
        }
        let gram = u.as_dmatrix().transpose() * u.as_dmatrix();
        let r = u.cols();
        for i in 0..r {
            for j in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - want).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidParameter(
                        "ellipsoid basis is not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Self { u, sigma, bound })
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn semi_axes(&self) -> &[f64] {
        &self.sigma
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `U Σ z`.
    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (j, (&zj, &sj)) in z.iter().zip(&self.sigma).enumerate() {
            let c = zj * sj;
            if c != 0.0 {
                for (o, &uij) in out.iter_mut().zip(self.u.column(j)) {
                    *o += c * uij;
                }
            }
        }
        out
    }

    /// `Uᵀ x`.
    fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rank())
            .map(|j| self.u.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Output of [`project`].
#[derive(Clone, Debug)]
pub struct Projection {
    /// `w = U Σ z`.
    pub point: Vec<f64>,
    /// The coefficient `z`.
    pub coefficients: Vec<f64>,
    /// Final KKT multiplier estimate.
    pub multiplier: f64,
    /// Bisection steps taken (0 on the short-circuit branches).
    pub steps: usize,
}

/// `f(λ) = ‖(Σ² + λ I)⁻¹ Σ Uᵀ x‖`.
pub fn multiplier_residual(spec: &EllipsoidSpec, x: &[f64], lambda: f64) -> f64 {
    let c = spec.coordinates(x);
    let z: Vec<f64> = c
        .iter()
        .zip(&spec.sigma)
        .map(|(ci, s)| s * ci / (s * s + lambda))
        .collect();
    l2(&z)
}

/// Projection of `x` onto the ellipsoid, accurate to `eps` in ℓ₂.
pub fn fast_pr(spec: &EllipsoidSpec, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    project(spec, x, eps).map(|p| p.point)
}

/// [`fast_pr`] with the coefficient and multiplier exposed.
pub fn project(spec: &EllipsoidSpec, x: &[f64], eps: f64) -> Result<Projection> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "projection accuracy must be positive, got {eps}"
        )));
    }
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for an ellipsoid in R^{}",
            x.len(),
            spec.dim()
        )));
    }
    let r = spec.rank();
    let zero = || Projection {
        point: vec![0.0; spec.dim()],
        coefficients: vec![0.0; r],
        multiplier: 0.0,
        steps: 0,
    };
    let b = spec.bound;
    if b == 0.0 {
        return Ok(zero());
    }
    let c = spec.coordinates(x);
    if c.iter().all(|&v| v == 0.0) {
        return Ok(zero());
    }

    // λ* = 0: the unconstrained coefficient Σ⁻¹Uᵀx is already feasible and
    // the projection is U Uᵀ x.
    let unconstrained: Vec<f64> = c.iter().zip(&spec.sigma).map(|(ci, s)| ci / s).collect();
    if l2(&unconstrained) <= b {
        return Ok(Projection {
            point: spec.embed(&unconstrained),
            coefficients: unconstrained,
            multiplier: 0.0,
            steps: 0,
        });
    }

    let y: Vec<f64> = c.iter().zip(&spec.sigma).map(|(ci, s)| s * ci).collect();
    let sigma_min = spec.sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    let mut hi = l2(&y) / b;
    let ratio = hi * (r as f64).sqrt() * l2(x) / (sigma_min * sigma_min * eps);
    let steps = if ratio > 1.0 {
        (ratio.log2().ceil() as usize).min(MAX_BISECTION_STEPS)
    } else {
        0
    };

    let coefficient = |lambda: f64| -> Vec<f64> {
        y.iter()
            .zip(&spec.sigma)
            .map(|(yi, s)| yi / (s * s + lambda))
            .collect()
    };

    let mut lambda = 0.5 * (lo + hi);
    let mut z = coefficient(lambda);
    for _ in 0..=steps {
        lambda = 0.5 * (lo + hi);
        z = coefficient(lambda);
        if l2(&z) <= b {
            hi = lambda;
        } else {
            lo = lambda;
        }
    }

    Ok(Projection {
        point: spec.embed(&z),
        coefficients: z,
        multiplier: lambda,
        steps: steps + 1,
    })
}
