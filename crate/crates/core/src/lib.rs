//! Structured multiuser superposition transmission (S-MUST).
//!
//! Users' legacy QAM symbols are superimposed with complex power allocation
//! coefficients (CPACs) that weight the in-phase and quadrature components
//! independently. The crate covers:
//!
//! * [`constellation`]: Gray-labelled legacy mappers with I/Q separation.
//! * [`superposition`]: composite alphabets for S-MUST Cat. 1-3 and the MUST
//!   Cat. 1-3 baselines, centered modulo arithmetic and CRT residues.
//! * [`channel`]: AWGN/Rayleigh channels, path loss and SNR bookkeeping.
//! * [`receiver`]: SIC multistage detection with bit LLRs, modulo-based
//!   parallel interference cancellation (M-PIC) and a brute-force ML oracle.
//! * [`power_alloc`]: finite-alphabet mutual information, max-min CPAC
//!   optimization and the SNR-indexed lookup table.
//! * [`scheduler`]: proportional-fair scheduling for dynamic MA and S-MUST.
//! * [`mimo`]: user clustering, zero-forcing beams and cluster scheduling.
//! * [`sim`]: cell drops, experiment drivers and result emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod constellation;
pub mod error;
pub mod mimo;
pub mod power_alloc;
pub mod receiver;
pub mod scheduler;
pub mod sim;
pub mod superposition;

pub use error::{Error, Result};
pub use num_complex::Complex64;
