//! Grain extraction for 3D grey-level tomography volumes.
//!
//! The crate covers the full chain from an 8-bit volume to individual grains:
//!
//! * [`median`] pre-filtering and [`pipeline::threshold_segment`] with an
//!   opening/closing filtration ([`morphology`]),
//! * double-labels watershed extraction: label localization, a recursive
//!   gradient ([`gradient`]) and a labels-controlled flood ([`watershed`]),
//! * grain splitting on the negated distance function, filtered with the
//!   h-minima dynamic ([`minima`]),
//! * chord-length and two-point descriptors ([`descriptors`]) and the
//!   parameter-stability protocol built on them ([`robustness`]).
//!
//! Kernels run in parallel with rayon when the default `parallel` feature is
//! enabled; disabling it yields the sequential implementation with identical
//! output.

pub mod descriptors;
pub mod error;
pub mod gradient;
pub mod io;
pub mod median;
pub mod minima;
pub mod morphology;
mod par;
pub mod phantom;
pub mod pipeline;
pub mod robustness;
pub mod volume;
pub mod watershed;

pub use error::{Error, Result};
pub use par::is_parallel;
pub use volume::{
    neighbors, BinaryVolume, BorderRule, Connectivity, Coord, Dims, GreyVolume, LabelVolume,
    Sample, Volume, WideVolume,
};
