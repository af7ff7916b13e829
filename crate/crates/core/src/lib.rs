//! Multiresolution (wavelet) analysis of temporal Poisson point processes.
//!
//! * [`models`] — intensity functions with exact integrals and true Haar projections.
//! * [`simulate`] — homogeneous and thinning-based inhomogeneous Poisson sampling.
//! * [`haar`] — dyadic binning, Haar coefficients and the linear estimator.
//! * [`lrt`] — likelihood-ratio tests for level homogeneity and level innovation.
//! * [`threshold`] — DM-L, FDR-local, recursive-intermediate and Holm-global selection.
//! * [`daubechies`] — D4 cascade wavelets, estimation and Gaussian coefficient tests.
//! * [`bench`] — Monte Carlo RMISE study and size/power curves.

pub mod bench;
pub mod daubechies;
pub mod error;
pub mod exec;
pub mod haar;
pub mod lrt;
pub mod models;
pub mod quadrature;
pub mod simulate;
pub mod special;
pub mod threshold;

pub use error::{Error, Result};
pub use exec::Execution;
