//! Core of a context- and schema-fusion network (CSFN) dialogue state
//! tracker: a minimal dense-tensor library with reverse-mode gradients,
//! the schema graph with its masking rules, the three input serializations,
//! the fusion layers, and the slot-gate / pointer-generator state predictor.
//!
//! The crate is `no_std`-compatible (`--no-default-features --features libm`);
//! it allocates but performs no IO. File formats, corpus handling, training
//! orchestration and the CLI live in the companion `csfn-dst` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("either the `std` or the `libm` feature must be enabled");

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod decoder;
pub mod embedding;
pub mod error;
pub mod fusion;
pub mod gate;
pub mod gradcheck;
pub mod graph;
pub(crate) mod math;
pub mod model;
pub mod nn;
pub mod params;
pub mod rng;
pub mod schema;
pub mod sequence;
pub mod state;
pub mod tensor;
pub mod vocab;

pub use error::{CoreError, Result};
pub use graph::{Graph, NodeId};
pub use params::{GradBuffer, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
