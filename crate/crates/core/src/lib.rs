//! Numerical laboratory for sharpness-aware minimization.
//!
//! * [`densela`]: dense symmetric eigensolver and spectral projectors
//! * [`losses`]: the loss interface and the quadratic, 4D toy and factored
//!   regression losses
//! * [`optim`]: SAM, 1-SAM, GD on the ascent-direction loss, GD, and the
//!   trajectory runner
//! * [`sharpness`]: worst/ascent/average sharpness and their limiting
//!   regularizers
//! * [`manifold`]: the limit map Φ and Riemannian flows on the minimizer
//!   manifold
//! * [`harness`]: experiment drivers behind the `samlab` CLI

pub mod densela;
pub mod error;
pub mod harness;
pub mod losses;
pub mod manifold;
pub mod optim;
pub mod rng;
pub mod sharpness;

pub use densela::{eig_sym, numerical_rank, spectral_projector, EigenDecomposition, SymMatrix, Vector};
pub use error::{Error, Result};
pub use losses::{FactoredRegressionLoss, LossModel, LossSpec, QuadraticLoss, Toy4dLoss};
pub use manifold::{phi, FlowKind, FlowOptions, FlowSolution, ManifoldPoint, PhiOptions};
pub use optim::{Algorithm, OptimizerConfig, Stepper, Trajectory};
