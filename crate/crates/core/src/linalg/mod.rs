//! Dense and diagonal matrix kernels.

mod eigen;
mod expm;
mod lyapunov;
mod matrix;
mod power;

pub use eigen::{condition_number, eig_radius_exact, eigenvalues, Conditioning, MAX_EXACT_DIM, SWEEPS_PER_DIM};
pub use expm::mat_exp;
pub use lyapunov::{lyapunov_residual, solve_discrete_lyapunov};
pub use matrix::{Matrix, MatrixKind};
pub use power::{power_method, start_vector, SpectralEstimate, SpectralMethod};
