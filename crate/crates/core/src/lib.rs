//! Pilot-assisted training design for binary signaling over correlated Rayleigh fading.
//!
//! The crate covers fading autocorrelation models, LLSE estimation error
//! profiles, the binary-input rate surface `I_sub(P, v)`, policy optimizers for
//! pilot spacing, clustering and power, and brute-force checks of the power
//! allocation results for causal Gauss-Markov estimation.

pub mod error;
pub mod estimator;
pub mod fading;
pub mod mi;
pub mod optim;
pub mod policy;
pub mod quadrature;
pub mod theory;

pub use error::{Error, Result};
pub use estimator::{
    causal_error_variance_gm, error_variance_profile, pilot_index_set, ErrorProfile, EstimationMode,
    PilotPattern,
};
pub use fading::{bessel_j0, FadingModel};
pub use mi::{
    build_grid, conditional_mi, expected_mi, optimize_isub, BinaryInput, GridSpec, IsubGrid, RateUnit,
};

/// Noise variance for a received SNR in dB at unit average power.
pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
