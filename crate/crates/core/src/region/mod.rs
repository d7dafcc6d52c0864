//! Equilibrium utility regions for two-player games.

pub mod geometry;
pub mod lp;
pub mod minmax;
pub mod sweep;

pub use geometry::{convex_hull, convex_hull_clip, polygon_area, Point};
pub use minmax::{is_individually_rational, minmax_levels, MinmaxLevels};
pub use sweep::{sweep_region, RegionResult, SweepOptions};
