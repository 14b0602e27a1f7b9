//! Periodic quantization, defect-measure pairings, support estimation and
//! lacunarity fits.

pub mod defect;
pub mod lacunarity;
pub mod quantize;
pub mod support;

pub use defect::{defect_mass, defect_mass_with, entry_on_grid, MicrolocalProbe};
pub use lacunarity::{arc_cutoff, lacunarity_fit, LacunarityFit, LacunaryOperator};
pub use quantize::{fft_nd, fourier_coefficients, quantize_apply, quantize_apply_with, PeriodicGrid};
pub use support::{support_estimate, CellRate, RateTolerance, Sensitivity, SupportEstimate};
