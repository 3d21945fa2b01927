//! Thinning and splitting of point configurations, with exact verification
//! on small discrete spaces and Monte Carlo tests on continuous windows of
//! the factorization property that characterizes the Poisson point process:
//! the joint law of (retained, deleted) halves of an independent thinning
//! factorizes into its marginals exactly for Poisson processes.
//!
//! The crate is organized as:
//! - [`measure`], [`intensity`], [`testfn`]: point measures with
//!   multiplicities, intensity measures, bounded test functions;
//! - [`process`]: samplers (Poisson, Pólya difference, and two non-Poisson
//!   counterexamples) with closed-form first moments;
//! - [`thinning`]: independent thinning, two-way splitting, and sequential
//!   n-way multi-splitting;
//! - [`functionals`]: Laplace transforms, Campbell measures, Mecke
//!   residuals, and the exact thinning Papangelou identity;
//! - [`exact`]: dense probability tables on tiny discrete spaces — the
//!   ground truth every statistical claim is checked against;
//! - [`stats`]: Monte Carlo factorization tests on continuous windows;
//! - [`config`], [`report`]: experiment configuration and structured output.

pub mod config;
pub mod error;
pub mod exact;
pub mod functionals;
pub mod intensity;
pub mod io;
pub mod measure;
pub mod process;
pub mod report;
pub mod stats;
pub mod testfn;
pub mod thinning;

pub use error::{Error, Result};
