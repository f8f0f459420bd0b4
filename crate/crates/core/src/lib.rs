//! Contraction of closed tensor networks by belief propagation, corrected by
//! a loop series of excitations over the BP vacuum.

#![no_std]

extern crate alloc;

pub mod bp;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod loops;
pub mod models;
pub mod network;
pub mod observables;
pub mod reference;
pub mod tensor;

pub use error::{Error, Result};
pub use network::{Edge, Endpoint, NetworkBuilder, Node, NodeId, TensorNetwork};
pub use tensor::Tensor;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
