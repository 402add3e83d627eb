//! Thresholding-based outlier robust PCA.
//!
//! Given `M* = L* + C* + N*` with a low-rank, incoherent `L*`, a
//! column-sparse corruption `C*` and noise `N*`, the solvers in [`solvers`]
//! estimate the column space of `L*` by alternating a truncated SVD with hard
//! thresholding of suspicious columns. [`synth`] draws ground-truth
//! instances and [`harness`] runs experiments, writes CSV results and backs
//! the `torp` binary.

pub mod ellipsoid;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod solvers;
pub mod synth;
pub mod threshold;

pub use error::{Error, Result};
pub use linalg::{ColumnIndexSet, DenseMatrix, TruncatedSvd};
pub use solvers::{
    torp, torp_bin, torp_g, torp_n, RecoveryResult, Termination, TorpConfig, TorpGConfig,
    TorpNConfig,
};
pub use synth::{generate, InstanceParams, ProblemInstance};
