//! Geometrically continuous multipatch splines around extraordinary vertices,
//! iso-geometric elements built from them, and jet-based verification that
//! such elements are smooth across patch interfaces.

// `!(x > t)` checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod galerkin;
pub mod gluing;
pub mod io;
pub mod isogeo;
pub mod jet;
pub mod patch;
pub mod space;

pub use error::{Error, Result};
pub use gluing::{check_gk, enforce_gk, Reparameterization, SmoothnessReport};
pub use jet::{jet_compose, jet_distance, jet_invert, Jet};
pub use patch::{jet_extract, EdgeId, TensorPatch};
