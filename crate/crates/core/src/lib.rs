//! Seed set expansion on stochastic block models.

pub mod error;
pub mod estimate;
pub mod eval;
pub mod bp;
pub mod discriminant;
pub mod fmt;
pub mod rng;
pub mod sbm;
pub mod theory;
pub mod walk;

pub use error::{Error, Result};
