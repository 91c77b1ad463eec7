//! A desk-scale laboratory for the last iterate of SGD on linear regression.
//!
//! Everything works in the eigenbasis of the data covariance, so a problem is
//! a sorted eigenvalue list plus eigen-coordinates of the optimum and the
//! initial point. The crate provides:
//!
//! - [`problem`]: covariance spectra, targets, noise, and stepsize limits;
//! - [`schedule`]: constant, tail-geometric, and tail-polynomial stepsizes;
//! - [`oracle`]: the exact expected bias/variance of the last iterate under
//!   Gaussian features, via an `O(d)` diagonal recursion;
//! - [`montecarlo`]: reproducible stochastic simulation of the same process;
//! - [`bounds`]: closed-form upper/lower bounds on both error terms,
//!   effective dimensions, and the geometric-vs-polynomial comparison ratio.

pub mod bounds;
pub mod error;
pub mod montecarlo;
pub mod oracle;
pub mod problem;
pub mod schedule;

pub use error::{Error, Result};
