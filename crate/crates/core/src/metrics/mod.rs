//! Flow statistics and optical-distortion measurements.

mod flow;
mod markers;
mod stats;

pub use flow::{mean_vorticity, tke, vorticity};
pub use markers::{
    apparent_position, apparent_position_with, approach_distance, depth_linearity, displacement_variance, fit_line,
    ApparentPosition, LinearFit, MarkerTrack, TrackingOptions,
};
pub use stats::{kld, mse_curves, Axis, DisplacementHistogram, HISTOGRAM_BINS, HISTOGRAM_FLOOR};
