//! Exact enumeration, path transformations and lace expansion for self-avoiding
//! walks with an attraction between adjacent parallel edges.

pub mod analysis;
pub mod cli;
pub mod enumerate;
pub mod error;
pub mod fixtures;
pub mod flips;
pub mod greens;
pub mod interaction;
pub mod lace;
pub mod lattice;
pub mod rational;
pub mod series;
pub mod stepdist;
pub mod unfold;
pub mod walks;

pub use error::{AsawError, Result};
pub use rational::Q;
