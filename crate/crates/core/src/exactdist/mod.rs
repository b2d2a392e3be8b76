//! Certified oracles for the distributions the samplers are meant to produce.

mod dist;
pub mod divergence;
mod mass;
pub mod pmf;
mod real;
pub mod unroll;

pub use dist::Dist;
pub use divergence::{renyi_divergence, renyi_divergence_dist, renyi_divergence_ln, LnDist, RenyiParts, tv_distance, tv_distance_dist};
pub use mass::MassFunction;
pub use pmf::{gaussian_mass_function, gaussian_pmf, geo_pmf, laplace_mass_function, laplace_pmf};
pub use real::BigReal;
pub use unroll::{loop_unroll, LoopSpec, Unrolled};
