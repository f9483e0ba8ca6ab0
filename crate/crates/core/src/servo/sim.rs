//! Closed-loop tracking simulation: free-flying eye-in-hand cameras driven
//! by the image-space control law at the control rate, with features
//! captured at a lower rate and held between captures.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::camera::{detect_dots, project_plate, render_dots, CameraPose, DotPlate, FeatureSet, Intrinsics};
use super::control::{control_law, interaction_matrix, step_sim, FeatureError, Twist};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthMode {
    /// Current depth of each dot from the simulator.
    True,
    /// Depth at the desired pose, held constant.
    Desired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measurement {
    /// Exact projection of the dot centers.
    Ideal,
    /// Rendered frame followed by dot detection.
    Rendered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoConfig {
    /// Control gain, 1/s.
    pub lambda: f64,
    pub control_dt: f64,
    pub capture_dt: f64,
    pub depth: DepthMode,
    pub measurement: Measurement,
}

impl Default for ServoConfig {
    /// 1 kHz control, 20 Hz capture.
    fn default() -> Self {
        ServoConfig {
            lambda: 2.0,
            control_dt: 0.001,
            capture_dt: 0.05,
            depth: DepthMode::True,
            measurement: Measurement::Ideal,
        }
    }
}

impl ServoConfig {
    /// Control ticks per capture.
    pub fn capture_every(&self) -> Result<usize> {
        if !(self.lambda > 0.0) {
            return Err(Error::domain(format!("gain must be positive, got {}", self.lambda)));
        }
        if !(self.control_dt > 0.0 && self.capture_dt > 0.0) {
            return Err(Error::domain("time steps must be positive"));
        }
        let ratio = self.capture_dt / self.control_dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::domain(format!(
                "capture period {} is not an integer multiple of the control period {}",
                self.capture_dt, self.control_dt
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlateMotion {
    Static,
    /// `center(t) = center + amplitude * sin(2 pi f t)`.
    Sinusoid { amplitude_m: [f64; 3], frequency_hz: f64 },
}

impl PlateMotion {
    pub fn offset(&self, t: f64) -> Vector3<f64> {
        match *self {
            PlateMotion::Static => Vector3::zeros(),
            PlateMotion::Sinusoid {
                amplitude_m,
                frequency_hz,
            } => Vector3::from(amplitude_m) * (std::f64::consts::TAU * frequency_hz * t).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSetup {
    pub name: String,
    pub desired_pose: CameraPose,
    pub initial_pose: CameraPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingScenario {
    pub plate: DotPlate,
    pub motion: PlateMotion,
    pub intrinsics: Intrinsics,
    pub cameras: Vec<CameraSetup>,
    pub duration_s: f64,
    pub config: ServoConfig,
}

/// Lateral offset that shifts every dot by `px` pixels at the plate depth.
fn offset_for_pixels(px: f64, k: &Intrinsics, depth: f64) -> f64 {
    px * depth / k.focal_px
}

fn down() -> Vector3<f64> {
    Vector3::new(0.0, 1.0, 0.0)
}

impl TrackingScenario {
    /// One camera, static plate, start displaced so each dot sits 100 px
    /// from its goal.
    pub fn static_target() -> Self {
        let plate = DotPlate::default();
        let k = Intrinsics::default();
        let desired = CameraPose::look_at(Vector3::zeros(), plate.center, down());
        let mut initial = desired;
        initial.position.x += offset_for_pixels(100.0, &k, plate.center.z);
        TrackingScenario {
            plate,
            motion: PlateMotion::Static,
            intrinsics: k,
            cameras: vec![CameraSetup {
                name: "finger".into(),
                desired_pose: desired,
                initial_pose: initial,
            }],
            duration_s: 3.0,
            config: ServoConfig::default(),
        }
    }

    /// The static scenario with the plate swaying 2 cm sideways at 0.2 Hz.
    pub fn moving_target() -> Self {
        TrackingScenario {
            motion: PlateMotion::Sinusoid {
                amplitude_m: [0.02, 0.0, 0.0],
                frequency_hz: 0.2,
            },
            duration_s: 5.0,
            ..Self::static_target()
        }
    }

    /// Two cameras viewing the plate from either side, each with its own
    /// start offset, captured on a shared clock.
    pub fn two_camera() -> Self {
        let mut s = Self::static_target();
        let k = s.intrinsics;
        let target = s.plate.center;
        let thumb_desired = CameraPose::look_at(Vector3::new(0.06, 0.0, 0.0), target, down());
        let mut thumb_initial = thumb_desired;
        thumb_initial.position -= thumb_desired.orientation.column(1) * offset_for_pixels(60.0, &k, 0.5);
        s.cameras[0].desired_pose = CameraPose::look_at(Vector3::new(-0.06, 0.0, 0.0), target, down());
        let finger = s.cameras[0].desired_pose;
        s.cameras[0].initial_pose = finger;
        s.cameras[0].initial_pose.position += finger.orientation.column(0) * offset_for_pixels(100.0, &k, 0.5);
        s.cameras.push(CameraSetup {
            name: "thumb".into(),
            desired_pose: thumb_desired,
            initial_pose: thumb_initial,
        });
        s
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "static" => Ok(Self::static_target()),
            "moving" => Ok(Self::moving_target()),
            "two-camera" => Ok(Self::two_camera()),
            other => Err(Error::domain(format!(
                "unknown servo preset {other:?} (static, moving, two-camera)"
            ))),
        }
    }

    pub fn plate_at(&self, t: f64) -> DotPlate {
        self.plate.translated(self.motion.offset(t))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::synth::write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::synth::read_json(path.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: usize,
    pub time_s: f64,
    pub camera: usize,
    pub pose: [f64; 12],
    /// `focal * ||s - s*||` with `s` the exact current projection.
    pub error_norm_px: f64,
    pub captured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub tick: usize,
    pub time_s: f64,
    pub camera: usize,
    /// Measured dot centers `(row, col)`, in plate order.
    pub features_px: [(f64, f64); 4],
    pub twist: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEvent {
    pub tick: usize,
    pub time_s: f64,
    pub camera: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub cameras: Vec<String>,
    pub rows: Vec<TraceRow>,
    pub captures: Vec<CaptureRecord>,
    pub loss: Option<LossEvent>,
}

impl Trace {
    /// `(time, error)` for one camera.
    pub fn error_series(&self, camera: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.camera == camera)
            .map(|r| (r.time_s, r.error_norm_px))
            .collect()
    }

    pub fn final_error(&self, camera: usize) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.camera == camera).map(|r| r.error_norm_px)
    }

    pub fn capture_times(&self, camera: usize) -> Vec<f64> {
        self.captures
            .iter()
            .filter(|c| c.camera == camera)
            .map(|c| c.time_s)
            .collect()
    }

    /// First time after which the error of `camera` stays below `px`.
    pub fn settling_time(&self, camera: usize, px: f64) -> Option<f64> {
        let series = self.error_series(camera);
        let last_above = series.iter().rposition(|(_, e)| *e >= px);
        match last_above {
            None => series.first().map(|s| s.0),
            Some(i) => series.get(i + 1).map(|s| s.0),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "tick", "time_s", "camera", "px", "py", "pz", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32",
            "r33", "error_norm_px", "captured",
        ])?;
        for r in &self.rows {
            let mut rec = vec![r.tick.to_string(), r.time_s.to_string(), self.cameras[r.camera].clone()];
            rec.extend(r.pose.iter().map(|v| v.to_string()));
            rec.push(r.error_norm_px.to_string());
            rec.push(u8::from(r.captured).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn error_vector(s: &FeatureSet, desired: &FeatureSet) -> FeatureError {
    let (a, b) = (s.to_vector(), desired.to_vector());
    FeatureError::from_fn(|i, _| a[i] - b[i])
}

/// Reorders detections `(row, col)` to the dot order of `previous` by the
/// assignment with the smallest total squared distance.
fn match_detections(found: &[(f64, f64)], previous: &[(f64, f64); 4]) -> [(f64, f64); 4] {
    let mut best = ([0usize, 1, 2, 3], f64::INFINITY);
    let mut perm = [0usize, 1, 2, 3];
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = (0..4)
            .map(|i| (found[p[i]].0 - previous[i].0).powi(2) + (found[p[i]].1 - previous[i].1).powi(2))
            .sum();
        if cost < best.1 {
            best = (*p, cost);
        }
    });
    best.0.map(|j| found[j])
}

fn permute(p: &mut [usize; 4], k: usize, visit: &mut impl FnMut(&[usize; 4])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

struct CameraState {
    pose: CameraPose,
    desired: FeatureSet,
    twist: Twist,
    last_px: [(f64, f64); 4],
}

/// Runs the scenario. A measurement failure ends the run early with the
/// loss recorded in the trace.
pub fn run_tracking(scenario: &TrackingScenario) -> Result<Trace> {
    let cfg = &scenario.config;
    let every = cfg.capture_every()?;
    if !(scenario.duration_s >= 0.0) {
        return Err(Error::domain("duration must be non-negative"));
    }
    if scenario.cameras.is_empty() {
        return Err(Error::domain("scenario has no cameras"));
    }
    let k = &scenario.intrinsics;
    let ticks = (scenario.duration_s / cfg.control_dt).round() as usize;
    let plate0 = scenario.plate_at(0.0);
    let mut states = Vec::with_capacity(scenario.cameras.len());
    for cam in &scenario.cameras {
        let desired = project_plate(&cam.desired_pose, &plate0)?;
        let start = project_plate(&cam.initial_pose, &plate0)?;
        states.push(CameraState {
            pose: cam.initial_pose,
            desired,
            twist: Twist::zeros(),
            last_px: start.points.map(|(x, y)| k.to_pixel(x, y)),
        });
    }
    let mut trace = Trace {
        cameras: scenario.cameras.iter().map(|c| c.name.clone()).collect(),
        rows: Vec::with_capacity((ticks + 1) * states.len()),
        captures: Vec::new(),
        loss: None,
    };

    'run: for tick in 0..=ticks {
        let t = tick as f64 * cfg.control_dt;
        let plate = scenario.plate_at(t);
        // one shared capture clock for every camera
        let captured = tick % every == 0;
        for (ci, st) in states.iter_mut().enumerate() {
            let truth = match project_plate(&st.pose, &plate) {
                Ok(f) => f,
                Err(e) => {
                    trace.loss = Some(LossEvent {
                        tick,
                        time_s: t,
                        camera: ci,
                        reason: e.to_string(),
                    });
                    break 'run;
                }
            };
            if captured {
                let measured = match cfg.measurement {
                    Measurement::Ideal => Ok(truth),
                    Measurement::Rendered => render_dots(&st.pose, &plate, k)
                        .and_then(|img| detect_dots(&img, 4))
                        .map(|found| {
                            let px = match_detections(&found, &st.last_px);
                            let mut f = truth;
                            for (p, (r, c)) in f.points.iter_mut().zip(px) {
                                *p = k.to_normalized(r, c);
                            }
                            f
                        }),
                };
                let mut measured = match measured {
                    Ok(f) => f,
                    Err(e) => {
                        trace.loss = Some(LossEvent {
                            tick,
                            time_s: t,
                            camera: ci,
                            reason: e.to_string(),
                        });
                        break 'run;
                    }
                };
                if cfg.depth == DepthMode::Desired {
                    measured.depths = st.desired.depths;
                }
                let l = interaction_matrix(&measured)?;
                st.twist = control_law(&l, &error_vector(&measured, &st.desired), cfg.lambda)?;
                st.last_px = measured.points.map(|(x, y)| k.to_pixel(x, y));
                trace.captures.push(CaptureRecord {
                    tick,
                    time_s: t,
                    camera: ci,
                    features_px: st.last_px,
                    twist: st.twist.into(),
                });
            }
            trace.rows.push(TraceRow {
                tick,
                time_s: t,
                camera: ci,
                pose: st.pose.to_row(),
                error_norm_px: k.focal_px * error_vector(&truth, &st.desired).norm(),
                captured,
            });
        }
        if tick < ticks {
            for st in &mut states {
                st.pose = step_sim(&st.pose, &st.twist, cfg.control_dt)?;
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starting_at_the_goal_stays_there() {
        let mut s = TrackingScenario::static_target();
        s.cameras[0].initial_pose = s.cameras[0].desired_pose;
        s.duration_s = 0.5;
        let tr = run_tracking(&s).unwrap();
        assert!(tr.rows.iter().all(|r| r.error_norm_px <= 1e-9));
        assert_eq!(tr.rows.first().unwrap().pose, tr.rows.last().unwrap().pose);
    }

    #[test]
    fn twist_is_held_between_captures() {
        let mut s = TrackingScenario::static_target();
        s.duration_s = 0.3;
        let tr = run_tracking(&s).unwrap();
        assert_eq!(tr.captures.len(), 7);
        assert!(tr.captures.windows(2).all(|w| w[1].tick - w[0].tick == 50));
    }

    #[test]
    fn capture_period_must_divide() {
        let mut s = TrackingScenario::static_target();
        s.config.capture_dt = 0.0505;
        assert!(run_tracking(&s).is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = TrackingScenario::two_camera();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        s.save(&p).unwrap();
        assert_eq!(TrackingScenario::load(&p).unwrap(), s);
    }

    #[test]
    fn matching_restores_plate_order() {
        let prev = [(10.0, 10.0), (10.0, 50.0), (40.0, 10.0), (40.0, 50.0)];
        let found = vec![(41.0, 11.0), (9.0, 49.0), (11.0, 9.0), (39.0, 51.0)];
        assert_eq!(
            match_detections(&found, &prev),
            [(11.0, 9.0), (9.0, 49.0), (41.0, 11.0), (39.0, 51.0)]
        );
    }
}
