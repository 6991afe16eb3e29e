//! Multiscale solvers for acoustic and elastic wave propagation on spatial
//! networks.
//!
//! A spatial network is a connected graph embedded in the unit hypercube with
//! edge weights given by Euclidean length. This crate provides
//!
//! - random fiber network generation and a text/binary network file format,
//! - assembly of the lumped mass operator `M`, the reciprocal edge-length
//!   weighted graph Laplacian `L`, scalar stiffness operators with per-edge
//!   coefficients, and a three-component elastic stiffness (axial springs plus
//!   in-plane/out-of-plane bending),
//! - a coarse square mesh with a Scott–Zhang style quasi-interpolant onto the
//!   restricted bilinear finite element space,
//! - localized orthogonal decomposition (LOD): element correctors computed on
//!   patches, the corrected multiscale basis, and Ritz projections,
//! - symmetric generalized eigenvalue utilities,
//! - an energy conserving implicit time integrator for `M u'' + K u = M f`,
//! - convergence experiment drivers with CSV/plot-data output.
//!
//! The `netwave` binary exposes the pipeline as subcommands; see the README.

pub mod coarse_fem;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod lod;
pub mod network;
pub mod operators;
pub mod rng;
pub mod wave;

pub use error::{Error, Result};
pub use network::{GeneratorConfig, Network, NetworkQualityReport};
pub use operators::{DofMap, ElasticParams, SparseOperator};
