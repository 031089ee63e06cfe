//! Trace finite elements for the vector Laplacian on a closed surface given
//! implicitly by a level set, with parametric higher-order geometry.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod cut;
pub mod deform;
pub mod dual;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod study;
pub mod sparse;

pub use error::{Error, Result};
