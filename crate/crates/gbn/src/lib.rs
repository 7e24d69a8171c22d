pub mod density;
pub mod error;
pub mod init;
pub mod kernel;
pub mod optimize;
pub mod points;
pub mod seed;
pub mod spectral;

mod adaptive;
mod bounded;
mod integrate;
mod pairsum;
mod pointfile;
mod stepbn;
mod uniform;

pub use adaptive::{
    adaptive_energy, adaptive_gradient, mutual_shape, optimize_adaptive, pixel_attraction,
    reconstruct, shape_factors, AdaptiveState, ShapeFactors,
};
pub use bounded::{
    bounded_terms, domain_gradient, optimize_bounded, optimize_bounded_weighted, BoundedGradient,
};
pub use density::DensityMap;
pub use error::{Error, Result};
pub use init::{random_init, stratified_init, weighted_random_init};
pub use kernel::{
    axis_replica_eval, axis_theta_eval, freq_weight, pair_energy, pair_gradient,
    reference_profile, theta_fmax, AxisKernelEval, KernelConfig, ReferenceSpectrum,
};
pub use integrate::{
    estimate, gbn_sweep_set, make_gaussian_sum, make_halfspace, variance_sweep, IntegrandFamily,
    IntegrandSpec, Sampler, VarianceReport, VarianceRow,
};
pub use optimize::{OptimizeConfig, OptimizeTrace, TraceRecord};
pub use pointfile::{read_points, write_points};
pub use points::{min_image, toroidal_dist2, toroidal_wrap, Domain, PointSet};
pub use seed::{rng_for, Seed};
pub use spectral::{
    anisotropy, default_fmax, filtered_power, fit_rising_band, min_toroidal_distance,
    noise_floor, periodogram, radial_profile, AnisotropyEntry, Periodogram, RadialEntry,
    RadialProfile, RisingFit,
};
pub use stepbn::{optimize_step, truncated_pair_terms};
pub use uniform::{bn_energy, bn_gradient, optimize_uniform};
