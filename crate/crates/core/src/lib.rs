//! Equivalent kernels of infinitely wide rectified MLPs.
//!
//! The crate has two halves. [`analytic`] holds the closed forms: the
//! arc-cosine kernel, the leaky-ReLU kernel, the layer-to-layer angle map and
//! the initialization rule that preserves signal norms. [`simulate`] builds
//! finite but wide random networks with weights drawn from the families in
//! [`distributions`] and estimates the same quantities by Monte Carlo, so every
//! closed form has an empirical counterpart.
//!
//! [`diagnostics`] checks whether a vector dataset is spread out enough for
//! the central-limit argument behind universality to apply.
//!
//! All sampling is deterministic in `(seed, shape)` and independent of the
//! rayon pool size; see [`rng`].

pub mod activation;
pub mod analytic;
pub mod diagnostics;
pub mod distributions;
mod error;
pub mod rng;
pub mod simulate;
pub mod special;

pub use activation::Activation;
pub use analytic::{DepthTrace, KernelQuery};
pub use distributions::DistributionSpec;
pub use error::{Error, Result};
pub use simulate::{EmpiricalKernel, InputPair, NetworkConfig};
