//! Numerical workbench for the reduction from unit-norm Riesz bases to
//! ε-Riesz partitions through pavings of zero-diagonal lower-triangular
//! matrices.
//!
//! * [`linalg`]: Gram matrices, spectral norms, Hermitian eigenvalues,
//!   Gram-Schmidt and projection residuals.
//! * [`riesz`]: Riesz bounds, ε-Riesz and ε-minimality predicates.
//! * [`partition`]: labeled partitions, the within-block correlation
//!   objective, its local search and an exhaustive oracle.
//! * [`paving`]: diagonal compressions, paving norms and paving search.
//! * [`reduction`]: the end-to-end pipeline and its report.
//! * [`instance`] and [`verify`]: seeded inputs and report re-checking.

pub mod error;
pub mod instance;
pub mod linalg;
pub mod partition;
pub mod paving;
pub mod reduction;
pub mod riesz;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Scalar, Vector, VectorFamily};
pub use partition::{LocalSearchTrace, Partition};
pub use paving::{PavingCertificate, PavingMethod, TargetKind};
pub use reduction::{PavingStrategy, ReductionConfig, ReductionReport};
pub use riesz::{EpsRieszReport, RieszBounds};
