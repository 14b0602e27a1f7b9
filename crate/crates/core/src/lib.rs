pub mod analysis;
pub mod carleman;
pub mod cli;
pub mod error;
pub mod factorize;
pub mod linalg;
pub mod microlocal;
pub mod models;
pub mod phase_symbols;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;

pub type Family = models::EigenfunctionFamily<f64>;
pub type Family32 = models::EigenfunctionFamily<f32>;
pub type Support = microlocal::SupportEstimate<f64>;
pub type Support32 = microlocal::SupportEstimate<f32>;
pub type Report = analysis::RestrictionReport<f64>;
pub type Report32 = analysis::RestrictionReport<f32>;
pub type Weight = carleman::CarlemanWeight<f64>;
pub type Weight32 = carleman::CarlemanWeight<f32>;
pub type SphereModel = carleman::GeodesicSphereModel<f64>;
pub type SphereModel32 = carleman::GeodesicSphereModel<f32>;
pub type Symbol = phase_symbols::SymbolExpansion<f64>;
pub type Symbol32 = phase_symbols::SymbolExpansion<f32>;
pub type Tube = factorize::TubeFunction<f64>;
pub type Tube32 = factorize::TubeFunction<f32>;
