//! Numerical laboratory for directional maximal operators on periodic grids.
//!
//! Fields live on a periodic cube sampled uniformly; smoothed directional
//! averages are applied as Fourier multipliers. The crate provides the
//! operators, the frequency-side geometry (annuli, caps, tubes, strips), the
//! incidence combinatorics, dyadic martingale tools and experiment drivers
//! that emit long-format CSV.

pub mod combinat;
pub mod directions;
pub mod experiments;
pub mod freqdecomp;
pub mod grid;
pub mod martingale;
pub mod maxop;

pub use directions::{gen_clustered, gen_random, gen_separated, min_separation, DirectionError, DirectionKind, DirectionSet};
pub use freqdecomp::{make_profile, Fejer, Profile};
pub use grid::{inverse_transform, make_grid, norm, pointwise_reduce_max, transform, Field, GridError, GridSpec, Spectrum};
