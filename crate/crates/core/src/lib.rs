//! Simulator for decentralized composite optimization over mesh networks.
//!
//! The crate implements the SONATA inner loop with gradient tracking and its
//! accelerated outer loop (ACC-SONATA), the gossip matrices they communicate
//! with, and the diagnostics used to check the convergence guarantees:
//! optimality gaps, inner and outer potential functions and communication
//! counts to a target accuracy.
//!
//! ```
//! use accsonata::datagen::{gen_ridge, SyntheticRidgeConfig};
//! use accsonata::network::{erdos_renyi, metropolis_hastings};
//! use accsonata::problems::estimate_constants;
//!
//! let inst = gen_ridge(&SyntheticRidgeConfig { m: 4, n: 50, d: 5, ..Default::default() }).unwrap();
//! let c = estimate_constants(&inst.problem).unwrap();
//! assert!(c.mu <= c.l && c.l <= c.l_max);
//! let w = metropolis_hastings(&erdos_renyi(4, 1.0, 7).unwrap());
//! // Metropolis-Hastings on a complete graph is exact averaging.
//! assert!(w.rho() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod accel;
pub mod datagen;
pub mod diagnostics;
pub mod experiment;
pub mod linalg;
pub mod network;
pub mod problems;
pub mod sonata;

pub use error::{Error, Result};
