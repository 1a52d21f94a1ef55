pub mod checkpoint;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod losses;
pub mod networks;
pub mod nn;
pub mod pose;
pub mod skeleton;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
