#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod lattice;
pub mod paths;
pub mod periods;
pub mod poly;
pub mod quadrature;
pub mod scenario;
pub mod system;
pub mod verifier;

pub use error::{Error, Result};
