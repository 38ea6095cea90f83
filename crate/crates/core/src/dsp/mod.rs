//! Deterministic signal-processing kernels shared by every other module.

pub mod griffin_lim;
pub mod iir;
pub mod resample;
pub mod spline;
pub mod stft;
pub mod stretch;

pub use griffin_lim::{griffin_lim, griffin_lim_traced, GriffinLimTrace};
pub use iir::{apply_iir, design_iir, BandFilters, FilterKind, IirFilterSpec};
pub use resample::resample;
pub use spline::spline_interpolate;
pub use stft::{istft, stft, Spectrogram, SpectrogramConfig, SpectrogramLayout};
pub use stretch::time_stretch;
