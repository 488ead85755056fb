//! Mutual information, max-min CPAC optimization and the CPAC lookup table.
//!
//! SNRs passed around here are linear `P |h|² / 2σ²` per user unless the
//! name says `_db`.

mod lut;
mod mi;
mod optimize;
mod quadrature;

pub use lut::{build_lut, snr_axis, LutCell, LutGrid, LUT_FORMAT_VERSION};
pub use mi::{
    mi_conditional, mi_conditional_quadrature, mi_joint, mi_single, mi_single_quadrature, Decoder, MiEstimate,
    MIN_SAMPLES,
};
pub use optimize::{
    alphabet_rates, cat1_rates, default_alpha_grid, default_decoder, far_user, optimize_cpacs, optimize_must, GridSpec, MustChoice,
    Optimized,
};
pub use quadrature::gauss_hermite;
