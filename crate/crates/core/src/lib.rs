//! Kinetic Monte Carlo engines for the 2D Ising model.
//!
//! The crate contains a rejection-free n-fold way sampler, a rejection-based
//! Metropolis reference chain, and a synchronous relaxation engine that runs the
//! n-fold way on a block decomposition of the lattice with one optimistic worker
//! per block. Two ground-truth generators live in [`oracle`]: a sequential
//! multi-stream simulation reproducing the relaxation fixed point, and an
//! exhaustive Boltzmann enumerator for small lattices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lattice;
pub mod metropolis;
pub mod nfoldway;
pub mod observables;
pub mod oracle;
pub mod relaxation;
pub mod rngstream;

pub use error::{Error, Result};
pub use lattice::{ClassIndex, Init, Lattice, ModelParams, Rule};
pub use nfoldway::{ClassTable, FlipEvent, History};
pub use oracle::{GlobalEvent, GlobalHistory};
pub use rngstream::RngStream;
