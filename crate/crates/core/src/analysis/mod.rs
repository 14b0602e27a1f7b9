pub mod agmon;
pub mod finite_diff;
pub mod fit;
pub mod quadrature;
pub mod restriction;

pub use agmon::{admissible_beta, agmon_distance_1d, agmon_length, allowed_set_distance, AgmonDistance, AgmonTarget};
pub use fit::{decay_rate_fit, RateFit};
pub use restriction::{
    restriction_norm, restriction_report, riemannian_distance, theorem_verdicts, tube_mass, DistanceSource,
    HypersurfaceSpec, Orientation, RestrictionReport, TheoremVerdicts,
};
