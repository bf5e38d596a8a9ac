//! Shared numerical kernels.

pub mod linalg;
pub mod rng;
pub mod water_level;

pub use linalg::{
    generalized_eig_max, hermitian_eig, hermitian_log2_det, psd_sqrt, CMatrix, CVector, EigenPair,
    RMatrix,
};
pub use rng::{Label, RngStream};
pub use water_level::{water_level, WaterLevel, WeightedGain};
