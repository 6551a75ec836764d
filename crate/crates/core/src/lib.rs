pub mod dynamics;
pub mod error;
pub mod field;
pub mod gauge;
pub mod harmonics;
pub mod integrators;
pub mod profile;
pub mod sampling;
pub mod scenarios;
pub mod tracker;

pub use error::{Error, Result};
