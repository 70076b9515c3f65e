//! Differentiable-computation substrate.
//!
//! Every learnable weight lives in a [`ParamTensor`]. Model blocks own their
//! tensors and implement explicit forward/backward passes; there is no tape.
//! [`gradient_check`] verifies those hand-written backward passes against
//! central finite differences, and [`AdamState`] applies updates.

mod adam;
mod affine;
mod archive;
mod gradcheck;
mod param;
mod rng;
mod softmax;

pub use adam::{AdamConfig, AdamState};
pub use affine::{affine_backward, affine_forward, Affine};
pub use archive::{TensorArchive, ARCHIVE_VERSION};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport, ParamCheck};
pub use param::{ParamContainer, ParamSet, ParamTensor};
pub use rng::{derive_seed, gaussian_matrix, seeded_rng, uniform_matrix, Rng64};
pub use softmax::{
    log_softmax_rows, scaled_softmax, scaled_softmax_backward, softmax_rows, softmax_rows_backward,
};

use serde::{Deserialize, Serialize};

/// Floating-point width used for parameter storage.
///
/// Arithmetic always runs in `f64`. With [`Precision::Single`] the optimizer
/// rounds every parameter through `f32` after each step, emulating single
/// precision storage. Gradient checks always run in double precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    #[default]
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeConfig {
    pub precision: Precision,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            precision: Precision::Double,
            seed: 0,
            deterministic: true,
        }
    }
}
