//! Source modeling and scalar quantization for transform-coefficient data.
//!
//! The crate covers four layers that build on each other:
//!
//! * [`ggd`]: the generalized Gaussian family. Density, entropy, moment-based
//!   parameter estimation, and seeded sampling.
//! * [`rd`]: discretized sources, Blahut rate-distortion curves, and the
//!   Shannon / entropy-coded-quantizer lower bounds.
//! * [`quant`]: the extended-zero-zone quantizer family (uniform, dead-zone,
//!   and centroid-reconstruction variants) with model and empirical
//!   rate/distortion evaluation.
//! * [`adaptive`]: per-band operating-point tables, encode/decode with
//!   compact side information.
//!
//! Everything is deterministic: randomness always flows from an explicit
//! seed, and parallel sweeps (enabled by the default `parallel` feature)
//! merge results in input order.

pub mod adaptive;
mod error;
pub mod ggd;
mod parallel;
pub mod quant;
pub mod rd;

pub use error::{Error, Result};
