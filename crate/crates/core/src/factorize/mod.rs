//! Factorization `Q ~ A (hD_n - iB)`, left parametrices, the normal
//! propagator `E(h)` and the transport chain on Fermi tubes.

pub mod residual;
pub mod symbols;
pub mod tube;

pub use residual::{plateau_cutoff, residual_order_fit, Cutoff, PeriodicDomain, ResidualFit, TestFunctionPool};
pub use symbols::{factor_symbols, left_parametrix, FactorizationResult, FactorizationSummary};
pub use tube::{
    apply_propagator, propagator_ode_residual, transport_identity_check, tube_to_restriction_bound, RestrictionBound,
    TangentialGrid, TransportCheck, TransportSample, TubeFunction,
};
