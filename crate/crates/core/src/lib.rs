//! Exact ground states, excitations and disorder-chaos statistics for the
//! nearest-neighbour Edwards-Anderson spin glass on small boxes.

pub mod disorder;
pub mod chaos;
pub mod error;
pub mod excitation;
pub mod experiment;
pub mod groundstate;
pub mod lattice;
pub mod stats;
pub mod variance;

pub use error::{Error, Result};
