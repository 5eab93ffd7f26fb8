//! Cascaded channel estimation for RIS-aided mmWave MIMO links with
//! few-bit ADCs.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel_model`] synthesises UPA steering vectors, the RIS-BS and
//!   user-RIS channels and the Khatri-Rao cascaded channel.
//! * [`angular_domain`] holds the DFT dictionaries, the virtual angular
//!   representation and the lossless `M²→M` compression of the Kronecker
//!   sparse matrix.
//! * [`quantizer`] is the B-bit uniform mid-rise ADC model.
//! * [`linear_operator`] is the structured measurement map with its FFT
//!   fast paths and the eigen-structure of `AᴴA`.
//! * [`denoisers`] and [`vamp_solver`] implement the VAMP estimator.
//! * [`baselines`] provides the ridge-regularised least-squares reference.
//! * [`harness`] runs seeded Monte Carlo sweeps and writes CSV.
//!
//! [`oracle`] contains slow, independent reference implementations (dense
//! matrices, adaptive quadrature) used by the test suites and by
//! `estimate selftest`.

pub mod angular_domain;
pub mod baselines;
pub mod channel_model;
pub mod denoisers;
pub mod error;
pub mod fft;
pub mod harness;
pub mod linear_operator;
pub mod oracle;
pub mod par;
pub mod quantizer;
pub mod selftest;
pub mod special;
pub mod vamp_solver;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Squared Euclidean norm of a complex slice.
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}
