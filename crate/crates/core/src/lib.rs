//! Equiaffine differential geometry of locally strongly convex hypersurfaces:
//! Blaschke invariants, parallel affine immersions and affine tubes.

// tensor formulas read best with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod cli;
pub mod error;
pub mod expr;
pub mod immersion;
pub mod invariants;
pub mod jet;
pub mod jet_linalg;
pub mod numeric;
pub mod parallel;
pub mod report;
pub mod tube;

pub use error::{Error, Result};
pub use immersion::{Immersion, SharedImmersion};
pub use jet::{Jet, JetVector};
