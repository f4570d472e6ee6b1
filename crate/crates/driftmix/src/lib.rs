//! Longitudinal inverse-probit drift-diffusion mixed models for category
//! learning.
//!
//! Response categories are modeled as the winners of latent races between
//! drifted diffusion processes, one per category; only the categorical
//! outcomes are observed. Drifts vary smoothly over training blocks through
//! penalized B-splines, combine population-level trajectories (clustered
//! across input-response combinations) with subject-level deviations, and are
//! identified by projecting onto a fixed-sum simplex with a small
//! componentwise floor. Fitting is by MCMC over the latent first-passage
//! times with conjugate coefficient updates and Metropolis variance moves.
//!
//! The crate also ships a simulation module reproducing a four-cluster
//! synthetic design, convergence diagnostics (Geweke, autocorrelations) and
//! clustering indices (Rand, adjusted Rand), and CSV-based persistence for
//! every artifact. The `driftmix` binary exposes the full
//! simulate/fit/summarize/diagnose/validate pipeline.

pub mod diagnostics;
pub mod dists;
pub mod error;
pub mod io;
pub mod model;
pub mod numeric;
pub mod projection;
pub mod rng;
pub mod sampler;
pub mod simulate;
pub mod splines;

pub use error::{DriftError, Result};
