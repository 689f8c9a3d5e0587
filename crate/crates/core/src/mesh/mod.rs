//! Conforming triangulations, newest vertex bisection and the bookkeeping
//! that relates nested refinement levels.

pub mod builders;
mod io;
mod nesting;
mod refine;
mod triangulation;

pub use nesting::{
    nesting_sets, overlap_constant, patches, refinement_ratio, similarity_classes,
    similarity_min_angle, NestingSets, Patches,
};
pub use triangulation::{Edge, Point, Triangle, Triangulation, MAX_DEPTH};
