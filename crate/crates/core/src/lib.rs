//! Inhomogeneous phase-type distributions and their heavy-tailed relatives.
//!
//! The crate is organised bottom up:
//!
//! * [`matfun`]: matrix exponential, powers, logarithm, general analytic
//!   matrix functions and the matrix incomplete gamma function;
//! * [`phcore`]: classical phase-type laws `PH(π, T)`;
//! * [`iph`]: time-inhomogeneous laws `IPH(π, T, λ)` and product integrals;
//! * [`families`]: matrix-Pareto, matrix-Weibull, matrix-Gumbel and
//!   matrix-GEV distributions;
//! * [`emfit`]: maximum-likelihood fitting by the EM algorithm.

pub mod emfit;
pub mod error;
pub mod families;
pub mod iph;
pub mod ks;
pub mod matfun;
pub mod par;
pub mod phcore;
pub mod quad;
pub mod roots;

pub use error::{Error, Result};
pub use par::Parallelism;
