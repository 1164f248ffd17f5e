//! Liquid time-constant (LTC) circuits on sparse neural-circuit-policy wirings,
//! and the steering models built from them.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`]: dense row-major tensors, the numeric kernels, and a portable PRNG.
//! - [`autodiff`]: a dynamic reverse-mode graph over those kernels.
//! - [`wiring`]: sensory → inter → command ⟲ → motor connectomes.
//! - [`ltc`]: the conductance-based neuron/synapse cell and its fused solver.
//! - [`models`]: the CNN baseline, CNN-NCP and the dual-circuit CNN-DNCP variants.
//! - [`data`]: frame preprocessing, augmentation, synthetic road episodes, drive logs.
//! - [`training`]: MSE, Adam, the fit loop and evaluation.
//!
//! Everything numeric is generic over [`Scalar`]: `f32` at runtime, `f64` for
//! finite-difference verification.
//!
//! With the default `parallel` feature, kernels and per-sample gradient work fan
//! out over rayon. Reductions always run in a fixed order, so results do not
//! depend on the number of worker threads. Building with
//! `--no-default-features` gives the sequential code path.

pub mod autodiff;
pub mod data;
mod error;
pub mod ltc;
pub mod models;
pub mod tensor;
pub mod training;
pub mod wiring;

pub use error::{Error, Result};
pub use tensor::{Rng, Scalar, Tensor};
