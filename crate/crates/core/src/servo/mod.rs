//! Image-based visual servoing of free-flying cameras onto a four-dot plate.

mod camera;
mod control;
mod sim;

pub use camera::{detect_dots, project_plate, render_dots, CameraPose, DotPlate, FeatureSet, Intrinsics};
pub use control::{
    control_law, interaction_matrix, orthonormalize, rodrigues, step_sim, FeatureError, InteractionMatrix, Twist,
};
pub use sim::{
    run_tracking, CameraSetup, CaptureRecord, DepthMode, LossEvent, Measurement, PlateMotion, ServoConfig, Trace,
    TraceRow, TrackingScenario,
};
