//! Modulated energy, commutator functionals and the inequalities they satisfy.
//!
//! All interaction integrals against a grid density use the node quadrature
//! of [`quadrature`]; particle sums are direct and diagonal-free.

mod bilinear;
mod bounds;
mod diagnostics;
mod modulated;
mod particles;
pub mod quadrature;

pub use bilinear::{unrenormalized_commutator, unrenormalized_commutator_periodic};
pub use bounds::{
    defect_factor, defective_rhs, defective_rhs_from, renormalized_rhs, renormalized_rhs_from,
    velocity_norms, BoundConstants, DefectiveRhs, RhsEvaluation, RhsVariant, VelocityNorms,
};
pub use diagnostics::{
    coercivity_report, moment_bound, smallscale_report, CoercivityReport, MmdIdentity,
    MomentReport, SmallScaleReport,
};
pub use modulated::{
    commutator_an, modulated_energy, mollified_split, term1_reference, CommutatorReport,
    EnergyReport, MollifiedSplit,
};
pub use particles::ParticleConfig;
pub use quadrature::EnergyContext;
