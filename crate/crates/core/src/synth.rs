//! Ground-truth instances `M* = L* + C* + N*` with incoherent low-rank
//! inliers, column-sparse outliers and optional Gaussian noise.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`) seeded with
//! `seed_from_u64`; each component draws from its own stream so that, for a
//! fixed seed, changing the noise level does not move the outliers.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    column_norms, l2, operator_norm, truncated_svd, ColumnIndexSet, DenseMatrix, SIGMA_FLOOR,
};
use crate::threshold::floor_count;

const STREAM_BASIS: u64 = 1;
const STREAM_COEFFICIENTS: u64 = 2;
const STREAM_SUPPORT: u64 = 3;
const STREAM_OUTLIERS: u64 = 4;
const STREAM_NOISE: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseModel {
    None,
    GaussianIid,
}

impl NoiseModel {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseModel::None => "none",
            NoiseModel::GaussianIid => "gaussian_iid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseModel::None),
            "gaussian_iid" | "gaussian" => Ok(NoiseModel::GaussianIid),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise model {other:?}"
            ))),
        }
    }
}

/// How inlier coefficients `W` in `L* = U* W` are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InlierModel {
    /// Standard Gaussian entries. Incoherence grows like `√log n`.
    Gaussian,
    /// Each column uniform on the unit sphere of `R^r`: inliers are uniform
    /// directions in the true subspace, giving μ close to 1.
    Sphere,
}

impl InlierModel {
    pub fn as_str(self) -> &'static str {
        match self {
            InlierModel::Gaussian => "gaussian",
            InlierModel::Sphere => "sphere",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(InlierModel::Gaussian),
            "sphere" => Ok(InlierModel::Sphere),
            other => Err(Error::InvalidParameter(format!(
                "unknown inlier model {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceParams {
    pub d: usize,
    pub n: usize,
    pub r: usize,
    /// Fraction of outlier columns; `⌊alpha·n⌋` columns are corrupted.
    pub alpha: f64,
    /// Outlier column norm as a multiple of `σ₁(L*)`.
    pub outlier_scale: f64,
    pub noise_sigma: f64,
    pub noise_model: NoiseModel,
    pub inlier_model: InlierModel,
    pub seed: u64,
}

impl InstanceParams {
    /// Noiseless Gaussian-coefficient instance with unit outlier scale.
    pub fn new(d: usize, n: usize, r: usize, alpha: f64, seed: u64) -> Self {
        Self {
            d,
            n,
            r,
            alpha,
            outlier_scale: 1.0,
            noise_sigma: 0.0,
            noise_model: NoiseModel::None,
            inlier_model: InlierModel::Gaussian,
            seed,
        }
    }

    pub fn with_outlier_scale(mut self, scale: f64) -> Self {
        self.outlier_scale = scale;
        self
    }

    pub fn with_gaussian_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self.noise_model = NoiseModel::GaussianIid;
        self
    }

    pub fn with_inlier_model(mut self, model: InlierModel) -> Self {
        self.inlier_model = model;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn outlier_count(&self) -> usize {
        floor_count(self.alpha, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.d == 0 || self.n == 0 || self.r == 0 {
            return bad(format!(
                "d, n, r must be positive (got {}, {}, {})",
                self.d, self.n, self.r
            ));
        }
        if self.r > self.d.min(self.n) {
            return bad(format!("rank {} exceeds min(d, n)", self.r));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if self.outlier_count() + self.r > self.n {
            return bad(format!(
                "{} outliers leave fewer than r = {} clean columns",
                self.outlier_count(),
                self.r
            ));
        }
        if !(self.outlier_scale.is_finite() && self.outlier_scale > 0.0) {
            return bad(format!(
                "outlier scale must be positive, got {}",
                self.outlier_scale
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise sigma must be nonnegative, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

/// Ground-truth decomposition together with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub m_star: DenseMatrix,
    pub l_star: DenseMatrix,
    pub c_star: DenseMatrix,
    pub n_star: DenseMatrix,
    pub true_support: ColumnIndexSet,
    pub measured_mu: f64,
    pub params: InstanceParams,
}

impl ProblemInstance {
    /// Assembles an instance from explicit parts; `M*` is their sum.
    pub fn from_parts(
        l_star: DenseMatrix,
        c_star: DenseMatrix,
        n_star: DenseMatrix,
        params: InstanceParams,
    ) -> Result<Self> {
        let m_star = l_star.add(&c_star)?.add(&n_star)?;
        let c_norms = column_norms(&c_star);
        let true_support: ColumnIndexSet = c_norms
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect();
        let measured_mu = measure_incoherence(&l_star, params.r)?;
        Ok(Self {
            m_star,
            l_star,
            c_star,
            n_star,
            true_support,
            measured_mu,
            params,
        })
    }

    pub fn d(&self) -> usize {
        self.m_star.rows()
    }

    pub fn n(&self) -> usize {
        self.m_star.cols()
    }

    /// Top-`r` left singular vectors of `L*`.
    pub fn true_basis(&self) -> Result<DenseMatrix> {
        Ok(truncated_svd(&self.l_star, self.params.r)?.u)
    }

    /// Rescales `N*` to the given Frobenius norm and rebuilds `M*`.
    pub fn rescale_noise(&mut self, target_fro: f64) -> Result<()> {
        let current = self.n_star.frobenius_norm();
        if current == 0.0 {
            return Err(Error::InvalidParameter(
                "cannot rescale an all-zero noise matrix".into(),
            ));
        }
        let factor = target_fro / current;
        self.n_star = self.n_star.scale(factor)?;
        self.params.noise_sigma *= factor;
        self.m_star = self.l_star.add(&self.c_star)?.add(&self.n_star)?;
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random `d x r` matrix with orthonormal columns.
pub fn random_orthonormal(d: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    if r == 0 || r > d {
        return Err(Error::RankOutOfRange { k: r, max: d });
    }
    let mut rng = stream(seed, STREAM_BASIS);
    let g = gaussian_matrix(&mut rng, d, r);
    DenseMatrix::from_dmatrix(g.qr().q())
}

/// Draws an instance. Deterministic in `params`.
pub fn generate(params: &InstanceParams) -> Result<ProblemInstance> {
    params.validate()?;
    let InstanceParams { d, n, r, .. } = *params;

    let basis = random_orthonormal(d, r, params.seed)?;

    let mut rng = stream(params.seed, STREAM_COEFFICIENTS);
    let mut w = gaussian_matrix(&mut rng, r, n);
    if params.inlier_model == InlierModel::Sphere {
        for mut col in w.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
    }

    let k = params.outlier_count();
    let mut rng = stream(params.seed, STREAM_SUPPORT);
    let support = ColumnIndexSet::new(index::sample(&mut rng, n, k).into_vec());

    let mut l = basis.as_dmatrix() * w;
    for j in support.iter() {
        l.column_mut(j).fill(0.0);
    }
    let l_star = DenseMatrix::from_dmatrix(l)?;
    let sigma_top = operator_norm(&l_star);

    let mut c = DMatrix::zeros(d, n);
    let mut rng = stream(params.seed, STREAM_OUTLIERS);
    for j in support.iter() {
        let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = l2(&dir);
        let scale = params.outlier_scale * sigma_top / norm;
        for v in &mut dir {
            *v *= scale;
        }
        c.column_mut(j).copy_from_slice(&dir);
    }
    let c_star = DenseMatrix::from_dmatrix(c)?;

    let mut noise = DMatrix::zeros(d, n);
    if params.noise_model == NoiseModel::GaussianIid && params.noise_sigma > 0.0 {
        let mut rng = stream(params.seed, STREAM_NOISE);
        noise = gaussian_matrix(&mut rng, d, n) * params.noise_sigma;
        for j in support.iter() {
            noise.column_mut(j).fill(0.0);
        }
    }
    let n_star = DenseMatrix::from_dmatrix(noise)?;

    let m_star = l_star.add(&c_star)?.add(&n_star)?;
    let measured_mu = measure_incoherence(&l_star, r)?;

    Ok(ProblemInstance {
        m_star,
        l_star,
        c_star,
        n_star,
        true_support: support,
        measured_mu,
        params: params.clone(),
    })
}

/// Smallest μ with `‖e_iᵀ V‖ ≤ μ √(r/n)` for the top-`r` right factor `V` of
/// `l`, where `n` counts all columns of `l` (zero columns included).
pub fn measure_incoherence(l: &DenseMatrix, r: usize) -> Result<f64> {
    let svd = truncated_svd(l, r)?;
    if svd.is_rank_deficient() {
        return Err(Error::RankDegenerate);
    }
    let n = l.cols();
    let scale = (n as f64 / r as f64).sqrt();
    let v = svd.v.as_dmatrix();
    let norms = column_norms(l);
    let mu = (0..n)
        .filter(|&i| norms[i] > SIGMA_FLOOR * svd.sigma[0])
        .map(|i| v.row(i).norm())
        .fold(0.0, f64::max);
    Ok(mu * scale)
}

/// Draws `n` iid standard Gaussian vectors in `R^d` and counts those with
/// norm at least `threshold`.
pub fn gaussian_tail_census(d: usize, n: usize, threshold: f64, seed: u64) -> usize {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let sq: f64 = (0..d)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * g
                })
                .sum();
            sq.sqrt() >= threshold
        })
        .count()
}
