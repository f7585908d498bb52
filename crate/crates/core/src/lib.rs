//! Stochastic log-determinant estimation for large symmetric positive
//! definite matrices.
//!
//! The main estimator approximates `log` by a low-order rational function
//! `r_k(z) = b + Σ_j c_j / (z − α_j)`, applies it to a preconditioned matrix
//! `M P⁻¹` through one Lanczos factorization per probe vector, and averages
//! the resulting quadratic forms (Hutchinson's estimator). Stochastic
//! Lanczos quadrature and an exact Cholesky reference share the same
//! interface, and [`harness`] runs seeded comparisons on Gaussian-process
//! covariance matrices.
//!
//! ```
//! use ratdet::{build_covariance, estimate, sample_index_points, EstimatorConfig, KernelFamily, KernelSpec, Rng};
//!
//! let pts = sample_index_points(200, 2, &mut Rng::new(1)).unwrap();
//! let m = build_covariance(&KernelSpec::unit(KernelFamily::Matern52, 1e-6).unwrap(), &pts);
//! let est = estimate(&m, &EstimatorConfig::default()).unwrap();
//! assert!(est.value.is_finite());
//! ```

pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod lanczos;
pub mod linalg;
pub mod precond;
pub mod probes;
pub mod rational;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{
    estimate, exact_logdet, rstar_logdet, slq_logdet, Algorithm, EstimatorConfig, LanczosOperator, LogDetEstimate,
};
pub use kernels::{build_covariance, kernel_value, sample_index_points, IndexPoints, KernelFamily, KernelSpec};
pub use lanczos::{lanczos, lanczos_many, multishift_solve, LanczosFactorization, LinearOperator, PreconditionedOperator, SplitPreconditionedOperator};
pub use linalg::{cholesky, cholesky_logdet, thomas_solve, DenseSymMatrix, TridiagMatrix};
pub use precond::{build_preconditioner, Preconditioner, PreconditionerConfig, PreconditionerKind};
pub use probes::{make_probes, ProbeBatch, ProbeKind};
pub use rational::{partial_fraction, RationalClosedForm, RationalPartialFraction};
pub use rng::Rng;
pub use harness::{run_single, run_sweep, run_trial, verify, BenchRecord, RunConfig, SweepParam, SweepSpec, VerifyReport};
