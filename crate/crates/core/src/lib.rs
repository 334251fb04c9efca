//! Experiments on distribution shift across training domains and what pooled
//! empirical risk minimization learns under it.
//!
//! The crate is organised by experiment layer:
//!
//! - [`sem_data`]: multi-domain linear structural-equation data and its CSV layout.
//! - [`regression`]: closed-form and iterative least-squares fits, plus the L1
//!   hypothesis distance.
//! - [`divergence`]: exact KL divergences and pairwise shift matrices.
//! - [`bounds`]: the Fano/Hoeffding bound arithmetic for clean and Massart
//!   families.
//! - [`massart_sim`]: Monte-Carlo checks of those bounds on a finite input space.
//! - [`spurious_sim`]: a two-feature colored-digit analog with a spurious color bit.
//! - [`hyptest`]: OLS t-tests used to read shift sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod divergence;
pub mod error;
pub mod hyptest;
pub mod massart_sim;
pub mod regression;
pub mod rng;
pub mod sem_data;
pub mod spurious_sim;

mod fmt;

pub use error::{Error, ErrorKind, Result};
pub use fmt::format_f64;
