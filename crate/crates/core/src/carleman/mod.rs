//! Carleman weights near a convex geodesic sphere: weight construction,
//! bracket positivity on the characteristic set, the region partition of
//! the proof chain, and a discretized check of the subelliptic estimate.

pub mod model;
pub mod regions;
pub mod scan;
pub mod sigma;

pub use model::{
    build_rho, conjugated_symbol, smoothstep, smoothstep_derivative, MollifiedRamp, mollifier, CarlemanWeight, ConjugatedSymbol,
    ExprForms, FlatForms, GeodesicSphereModel, ModelInvariants, PotentialFn, Rho, SphereForms,
    TangentialForms,
};
pub use regions::{
    circle_embedding, control_ball_constant, region_partition, ubb_inclusion_constant,
    weight_envelope_report, EnvelopeReport, PartitionParams, Region, RegionPartition,
};
pub use scan::{
    bracket_margin, default_char_tol, max_tau_estimate, BracketScan, CharSample, ScanSpec, TauEstimate,
    WeightFamily,
};
pub use sigma::{assemble_conjugated, ConjugatedOperator, discrete_carleman_sigma_min, SigmaGrid, SigmaPoint, SigmaStudy};
