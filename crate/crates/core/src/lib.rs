//! Numerical laboratory for Riesz and logarithmic interactions.
//!
//! The crate evaluates the kernels `g(x) = |x|^{-s}/s` and `-log|x|`, the
//! diagonal-excluded modulated energy of a particle configuration against a
//! density, the transport commutators obtained by differentiating that
//! energy along a vector field, and runs particle and mean-field dynamics.
//!
//! * [`kernel`]: kernels, Fourier symbols, admissible potentials.
//! * [`fields`]: periodic grids, spectral transforms, seminorms, mollifiers.
//! * [`energy`]: modulated energy, commutators, right-hand side evaluators.
//! * [`counterexamples`]: the BMO and frequency-shell constructions.
//! * [`dynamics`]: particle ODE, mean-field PDE, coupled runs, Grönwall bounds.

pub mod counterexamples;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod fields;
pub mod kernel;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
pub use kernel::{AdmissiblePotential, RieszParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
