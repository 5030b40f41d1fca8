//! Robust mean estimation under strong contamination with sum-of-squares
//! moment relaxations, plus exact checkers for the matching lower bounds.

pub mod adversary;
pub mod bench;
pub mod certify;
pub mod error;
pub mod estimators;
pub mod io;
pub mod numeric;
pub mod relax;
pub mod sdp;
pub mod synth;

pub use error::{Error, Result};
