//! Density-dependent incompressible Navier–Stokes in the `a = 1/rho - 1` form.

mod energy;
mod initial;
mod integrate;
mod momentum;
mod transport;
mod viscosity;

pub use energy::{energy_diagnostics, EnergyMonitor, EnergyRow, EnergySeries};
pub use initial::{free_heat_reference, mollify_initial_data, MollifiedData, TruncationReport};
pub use integrate::{
    ns_integrate, ns_integrate_observed, DiagnosticsSample, DiagnosticsSeries, IntegratorConfig,
    StopReason, Trajectory,
};
pub use momentum::{
    momentum_step, momentum_step_with, pressure_of, MomentumOptions, MomentumStats, StateSnapshot,
};
pub use transport::{
    cfl_number, check_divergence, range_drift, relative_divergence, semi_lagrangian_values,
    transport_step, TransportScheme, CFL_LIMIT, DIVERGENCE_TOLERANCE,
};
pub use viscosity::ViscosityLaw;
