//! Curved-ray rendering through a refractive volume.

mod camera;
mod image;
mod scene;
mod tracer;

pub use camera::Camera;
pub use image::{read_ppm, write_step_map, Image};
pub use scene::{shell_test, Checkerboard, Hit, Scene};
pub use tracer::{
    adaptive_step, advance, curvature, march, ray_step, render, render_straight, trace_ray, trace_ray_observed,
    trace_to_plane, MarchOutcome, MarchVisitor, RayState, Render, Segment, SegmentKind, StepMode, StepRecord,
    SteppingPolicy, TraceResult,
};
