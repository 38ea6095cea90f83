pub mod audio;
pub mod autodiff;
pub mod cli;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod losses;
pub mod model;
pub mod train;

pub use audio::AudioBuffer;
pub use error::{Error, Result};
