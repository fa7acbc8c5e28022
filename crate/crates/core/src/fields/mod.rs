//! Grid fields, spectral transforms, norms and mollification.

mod grid;
pub mod io;
mod measure;
mod modulus;
mod mollify;
mod norms;
pub mod spectral;

pub use grid::{GridField, GridSpec};
pub(crate) use grid::{fd_partial, Stencil};
pub use measure::GridMeasure;
pub use modulus::{log_lipschitz_modulus_check, ModulusReport};
pub use mollify::{
    chi, chi_support, derivatives, mollification_rates, mollification_rates_with, mollify,
    modulus_of_continuity, MollifierSpec, RateReport,
};
pub use norms::{
    bmo_seminorm, energy_seminorm, holder_zygmund_seminorm, lp_norm, multiplier_lp_norm,
    sobolev_seminorm,
};
pub(crate) use mollify::{smooth_step, smooth_step_derivative};
pub(crate) use norms::is_zero_mean;
pub use spectral::{spectral_transform, Direction, Spectrum};
