//! Mechanical systems as locality-sensitive hash functions over distributed
//! loads.
//!
//! A load `w(x)` on the top surface of a mechanical system is hashed to the
//! vertical reaction forces at a handful of sensors. [`beams`] covers simply
//! supported and composite beams analytically, [`elastic`] covers 2-D
//! plane-strain domains by finite elements, [`theory`] holds the collision
//! radii and far-pair probabilities of the beam families, and [`metrics`] and
//! [`harness`] evaluate and sweep whole families of systems over a labelled
//! load corpus generated by [`loads`].

pub mod beams;
pub mod elastic;
pub mod error;
pub mod harness;
pub mod hash;
pub mod io;
pub mod loads;
pub mod metrics;
pub mod norm;
pub mod theory;

pub use error::{Error, Result};
pub use hash::HashValue;
pub use loads::LoadProfile;
pub use norm::Norm;
