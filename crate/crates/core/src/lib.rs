//! Sparse canonical correlation analysis by sparse alternating regression.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense helpers (centering, covariance, symmetric eigen,
//!   Cholesky, least squares, principal angles).
//! * [`lasso`]: coordinate-descent lasso with penalty paths and BIC selection.
//! * [`cca`]: classical and population CCA, the canonical ridge, its
//!   cross-validated tuning and rank selection.
//! * [`sar`]: the sparse alternating regression estimator.
//! * [`simbench`]: simulation designs, accuracy metrics, Monte-Carlo
//!   campaigns and leave-one-out scoring.
//!
//! All randomness is drawn from [`rand_chacha::ChaCha8Rng`] seeded through
//! [`seeded_rng`], so results are reproducible from a single `u64`.

pub mod cca;
pub mod error;
pub mod lasso;
pub mod linalg;
pub mod sar;
pub mod simbench;

pub use cca::{
    canonical_ridge, classical_cca, population_cca, ridge_cv, select_rank, CcaModel, RankSelection,
    RidgeParams,
};
pub use error::{Error, Result};
pub use lasso::{bic_select, lambda_path, lasso_fit, LambdaPath, LassoSolution};
pub use linalg::{Mat, Vector};
pub use sar::{sar_fit, SarConfig, SarModel};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 12345;

/// The generator behind every stochastic path in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
