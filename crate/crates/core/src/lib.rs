//! Exact sampling of Gauss–Hermite projection determinantal point processes
//! on ℝ^d, and DPP-based Monte Carlo integration against the unnormalised
//! Gaussian measure dμ = e^{-|x|²/2} dx.
//!
//! The pipeline, bottom to top:
//!
//! * [`basis`] — orthonormal Hermite functions ψ_j, the 𝔟-ordered
//!   multivariate basis φ_ı, and the rank-N projection kernel K_N.
//! * [`rmt`] — univariate machinery: GUE spectra (the sampling oracle), the
//!   spectral density ρ_n, the Wigner semicircle, the Student-t/semicircle
//!   mixture proposal and its calibrated rejection sampler.
//! * [`dpp`] — the exact DPP sampler: coordinate-factorised proposals f_{n^d},
//!   a general-N rejection layer, and the sequential chain-rule sampler with
//!   incremental Cholesky updates; plus the 1-D GUE shortcut.
//! * [`mc`] — naive, Bardenet–Hardy and Ermakov–Zolotukhin estimators and the
//!   Gaussian reparametrisation.
//! * [`experiments`] — polynomial-integration and GP-hyperparameter
//!   marginalisation studies at desk scale.
//! * [`spherical`] — an alternative Gaussian orthonormal basis built from
//!   spherical orthogonal polynomials, exposed purely as a diagnostic: its
//!   rejection bounds scale so badly that the approach is impractical.
//!
//! Supporting modules: [`quadrature`] (Gauss–Hermite rules used as test
//! oracles), [`stats`] (KS/χ²/slope utilities), [`rng`] (deterministic
//! substream derivation so parallel and serial runs agree exactly).

pub mod basis;
pub mod dpp;
pub mod error;
pub mod experiments;
pub mod mc;
pub mod quadrature;
pub mod rmt;
pub mod rng;
pub mod spherical;
pub mod stats;

pub use error::{Error, Result};
