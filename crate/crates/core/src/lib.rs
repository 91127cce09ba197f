//! Haptic compliance classification of food items.
//!
//! Classifies fork-skewering trials into four compliance categories
//! (hard-skin, hard, medium, soft) from force/torque and pose time series.

pub mod classifier;
pub mod error;
pub mod eval;
pub mod hmm;
pub mod io;
pub mod nn;
pub mod preprocess;
pub mod svm;
pub mod synth;
pub mod trial;

pub use error::{Error, Result};
