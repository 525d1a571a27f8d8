//! Spatial statistics for replicated point patterns organised as trees: a
//! base point with attached end points, as in epidermal nerve fibre data.
//!
//! The crate covers summary functions (K, centered L, empty space F, mark
//! correlation), reactive territories, Poisson and Matérn cluster simulation
//! with minimum contrast fitting, independent and dependent thinning,
//! ABC inference for the dependent thinning parameter, and global envelopes.
//!
//! Randomised functions take an [`RngSpec`]; identical specs give identical
//! results regardless of the rayon thread count.

pub mod abc;
pub mod curve;
pub mod envelopes;
pub mod error;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod sample;
pub mod simulate;
pub mod stats;
pub mod summaries;
pub mod territory;
pub mod thinning;

pub use curve::{CurveKind, SummaryCurve};
pub use error::{Error, ErrorClass, Result};
pub use geometry::{MarkedPointPattern, Point, PointPattern, Window};
pub use rng::RngSpec;
pub use sample::{Group, NerveSample, NerveTree, SampleSet};
