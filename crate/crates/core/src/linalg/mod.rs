//! Dense real linear algebra with structured matrix types.

mod affine;
mod bjorck;
mod det;
mod householder;
mod matrix;
mod structured;

pub use affine::Affine;
pub use bjorck::{
    bjorck_orthogonalize, bjorck_orthogonalize_batch, gram_deviation_norm, symmetric_spectral_norm,
    BjorckSettings, DEFAULT_MAX_STEPS,
};
pub use det::{dense_det, sylvester_identity_check, MAX_DET_DIM};
pub use householder::{householder_apply, householder_materialize, HouseholderChain};
pub use matrix::Matrix;
pub use structured::{OrthonormalColumns, UpperTriangular, ORTHO_TOLERANCE};
