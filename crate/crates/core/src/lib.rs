//! Recovery of point heat sources from boundary flux measurements.
//!
//! The forward model solves the heat equation on a square with homogeneous
//! Dirichlet boundary and point sources at interior mesh nodes, observing
//! the outward normal flux at boundary sensors. The inverse problem is
//! sampled with a preconditioned Crank-Nicolson chain over a Gaussian
//! latent field, thresholded to a point configuration, with a thinning
//! sweep that proposes removing active points one at a time.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fd;
pub mod forward;
pub mod inference;
pub mod levelset;
pub mod mesh;
pub mod output;
pub mod ppp;
pub mod prior;
pub mod rng;
pub mod verification;

pub use error::{Error, Result};
