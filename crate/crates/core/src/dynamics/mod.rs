//! Particle dynamics, the mean-field equation and the Grönwall machinery.
//!
//! The particle system `x_i' = (1/N) sum_{j != i} M grad g(x_i - x_j) - V^t(x_i)`
//! is integrated with RK4 on exact pairwise forces. Its mean-field limit
//! `d_t mu = div(mu (V - M grad g * mu))` is solved pseudo-spectrally on a
//! padded grid. [`coupled_run`] advances both and records the modulated
//! energy, the first commutator and the norms entering the mean-field bound,
//! which [`mf_bound_trajectory`] then audits.

mod coupled;
mod gronwall;
mod meanfield;
mod mfbound;
mod particles;
mod setup;

pub use coupled::{coupled_run, write_trajectory_csv, CoupledRow, CoupledRun, NormConfig, TRAJECTORY_COLUMNS};
pub use gronwall::{gronwall_bound, GronwallBound, GronwallInput};
pub use meanfield::{solve_meanfield, MeanFieldSolver, MeanFieldTrajectory};
pub use mfbound::{
    fit_bound_constant, mf_bound_trajectory, required_c_p, solve_epsilon, MfBound, MfBoundParams, MfRegime,
    FIT_MARGIN, VERDICT_RTOL,
};
pub use particles::{interaction_energy, simulate_particles, ParticleTrajectory};
pub use setup::{External, SimSetup};
