// SPDX-License-Identifier: MIT

//! # gapflow-core
//!
//! Numerical potential theory and canonical-system machinery for finite-gap
//! subsets of the real line.
//!
//! A *finite-gap set* is a closed set `E ⊂ ℝ` whose complement in the line is a
//! finite union of open intervals (*gaps*).  The domain `Ω = ℂ ∖ E` carries a
//! rich function theory: a Martin function at infinity, complex Green
//! functions, harmonic measures of the bands, and a finite-dimensional torus of
//! *divisors* which parametrizes the reflectionless Schur functions supported
//! on `E`.  This crate constructs all of these objects numerically and builds
//! on top of them:
//!
//! * [`gapset`] — validated descriptions of finite-gap sets and configuration
//!   parsing,
//! * [`quad`] — quadrature rules (Gauss–Legendre, Gauss–Jacobi, endpoint
//!   substitutions) and path-continued logarithms,
//! * [`potential`] — Martin function, harmonic measures, complex Green
//!   functions, the Widom function, and their characters,
//! * [`abel`] — divisors on the isospectral torus, the Abel map, its Newton
//!   inversion, and the translation flow,
//! * [`kernels`] — character-automorphic reproducing kernels, Schur functions
//!   `s±`, the transfer-matrix seed `𝒯`, and resolvent diagnostics,
//! * [`arov`] — transfer matrices in the Arov gauge, the spectral measure `μ`,
//!   the coefficient `𝔞`, canonical-system integration, and Weyl disks,
//! * [`gauges`] — asymptotic observables and the Potapov–de Branges and Dirac
//!   gauge transforms,
//! * [`fourier`] — the generalized Fourier transform, truncated reproducing
//!   kernels, and the Gram identity,
//! * [`apscan`] — almost-periodicity scans of the canonical-system data.
//!
//! The numerical contract of every module is covered by the integration tests
//! of this crate; the `acceptance` test target checks the headline identities
//! end to end at documented tolerances.

pub mod abel;
pub mod apscan;
pub mod arov;
pub mod error;
pub mod fourier;
pub mod gapset;
pub mod gauges;
pub mod kernels;
pub mod potential;
pub mod quad;

pub use error::{Error, Result};
pub use gapset::{GapSet, Normalization, SideMode};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
