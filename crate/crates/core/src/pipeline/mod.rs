//! Commands chaining the modules into calibration, training, estimation,
//! simulation, servoing and reporting runs. Every command is a function of
//! its config and input files.

mod config;
mod estimator;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

pub use config::{AnalysisConfig, GridSpec, OracleConfig, PipelineConfig, ServoSpec, SessionSpec, TrainConfig};
pub use estimator::{FrameEstimate, NailEstimator};

use crate::analysis::{detect_phases_with, trial_report, write_report, GraspTrial, Report};
use crate::eigennail::EigenNailModel;
use crate::error::{Error, Result};
use crate::force::{FingerId, ForceVector, Phase};
use crate::imaging::{read_image, write_image, write_image_with_depth, BitDepth, Image};
use crate::records::{write_force_csv, ForceRecord};
use crate::registration::{
    piecewise_warp, write_landmarks_csv, AppearanceModel, LandmarkShape,
};
use crate::segmentation::{crop_file_name, segment_frame, write_detection_log, CameraSide, DetectionRecord};
use crate::servo::{run_tracking, TrackingScenario};
use crate::synth::{
    frame_path, make_grid, read_session_manifest, simulate_session_with, write_session, CameraFrameRenderer,
    FrameRenderer, NailForwardModel, PhaseEvents, Scenario, SessionManifest,
};

/// Process exit code for an error: 3 for bad or missing data, 4 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Underdetermined { .. }
        | Error::DegenerateTriangle { .. }
        | Error::FeatureLoss { .. }
        | Error::DegenerateConfiguration { .. }
        | Error::UndefinedGap(_) => 4,
        Error::Trial { source, .. } => exit_code(source),
        _ => 3,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    crate::synth::write_json(path, value)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    crate::synth::read_json(path)
}

pub const CALIBRATION_FORMAT: &str = "nailforce-calibration/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationManifest {
    pub format: String,
    pub samples: usize,
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub bit_depth: BitDepth,
    pub image_pattern: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CalibrationRow {
    sample: usize,
    fx_n: f64,
    fy_n: f64,
    fz_n: f64,
}

pub fn calibration_image_path(dir: &Path, sample: usize) -> PathBuf {
    dir.join("images").join(format!("nail_{sample:05}.pgm"))
}

/// Renders the calibration grid into `calibration/`: `forces.csv`,
/// `images/nail_NNNNN.pgm`, `landmarks.csv` and `manifest.json`.
pub fn cmd_calibrate(cfg: &PipelineConfig) -> Result<CalibrationManifest> {
    let dir = cfg.calibration_dir();
    create_dir(&dir.join("images"))?;
    let forces = make_grid(&cfg.grid.grid())?;
    let model = NailForwardModel::standard(cfg.oracle.height, cfg.oracle.width, cfg.oracle.noise_sigma, cfg.seed);
    let path = dir.join("forces.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for (i, f) in forces.iter().enumerate() {
        w.serialize(CalibrationRow {
            sample: i,
            fx_n: f.fx,
            fy_n: f.fy,
            fz_n: f.fz,
        })?;
        write_image_with_depth(&model.render(*f, i as u64), calibration_image_path(&dir, i), cfg.oracle.bit_depth)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_landmarks_csv(dir.join("landmarks.csv"), &model.geometry().landmarks())?;
    let manifest = CalibrationManifest {
        format: CALIBRATION_FORMAT.into(),
        samples: forces.len(),
        height: cfg.oracle.height,
        width: cfg.oracle.width,
        noise_sigma: cfg.oracle.noise_sigma,
        seed: cfg.seed,
        bit_depth: cfg.oracle.bit_depth,
        image_pattern: "images/nail_<sample>.pgm".into(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    info!("calibration: {} samples in {}", forces.len(), dir.display());
    Ok(manifest)
}

/// Images, forces and template landmarks of a calibration directory.
pub struct CalibrationSet {
    pub manifest: CalibrationManifest,
    pub images: Vec<Image>,
    pub forces: Vec<ForceVector>,
    pub landmarks: LandmarkShape,
}

pub fn read_calibration(dir: &Path) -> Result<CalibrationSet> {
    let mpath = dir.join("manifest.json");
    let manifest: CalibrationManifest = read_json(&mpath)?;
    if manifest.format != CALIBRATION_FORMAT {
        return Err(Error::format(mpath, format!("unknown format {:?}", manifest.format)));
    }
    let path = dir.join("forces.csv");
    let mut rdr = csv::Reader::from_path(&path)?;
    let mut forces = Vec::with_capacity(manifest.samples);
    let mut images = Vec::with_capacity(manifest.samples);
    for (i, row) in rdr.deserialize::<CalibrationRow>().enumerate() {
        let row = row?;
        if row.sample != i {
            return Err(Error::format(&path, format!("row {i} has sample {}", row.sample)));
        }
        forces.push(ForceVector::new(row.fx_n, row.fy_n, row.fz_n));
        images.push(read_image(calibration_image_path(dir, i))?);
    }
    if forces.len() != manifest.samples {
        return Err(Error::format(
            &path,
            format!("{} rows, manifest lists {}", forces.len(), manifest.samples),
        ));
    }
    let landmarks = crate::registration::read_landmarks_csv(dir.join("landmarks.csv"))?;
    Ok(CalibrationSet {
        manifest,
        images,
        forces,
        landmarks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub samples: usize,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub appearance_samples: usize,
    pub texture_modes: usize,
    pub combined_modes: usize,
    /// In-sample RMS of the force fit per axis, N.
    pub training_rms_n: [f64; 3],
}

/// Appearance model from an evenly spaced subset of the calibration images
/// and force model from all of them, registered onto the template.
pub fn train_models(
    images: &[Image],
    forces: &[ForceVector],
    landmarks: &LandmarkShape,
    cfg: &TrainConfig,
) -> Result<(AppearanceModel, EigenNailModel)> {
    let n = images.len();
    if n == 0 {
        return Err(Error::Underdetermined { samples: 0, unknowns: 1 });
    }
    let (h, w) = images[0].dims();
    let take = cfg.appearance_samples.clamp(1, n);
    let subset: Vec<Image> = (0..take).map(|i| images[i * n / take].clone()).collect();
    let shapes = vec![landmarks.clone(); take];
    let appearance = AppearanceModel::train(&subset, &shapes, landmarks.clone(), h, w)?;
    let tri = &appearance.triangulation;
    let registered = images
        .iter()
        .map(|img| piecewise_warp(img, landmarks, tri))
        .collect::<Result<Vec<_>>>()?;
    let model = EigenNailModel::train_with(&registered, forces, cfg.variance_fraction)?;
    Ok((appearance, model))
}

/// Trains the appearance model and the force model from a calibration
/// directory and writes `model/appearance.json`, `model/eigennail.json`
/// and `model/training.json`.
pub fn cmd_train(cfg: &PipelineConfig, dataset: &Path) -> Result<TrainingSummary> {
    let set = read_calibration(dataset)?;
    let n = set.images.len();
    let (appearance, model) = train_models(&set.images, &set.forces, &set.landmarks, &cfg.train)?;
    let tri = &appearance.triangulation;
    let registered = set
        .images
        .iter()
        .map(|img| piecewise_warp(img, &set.landmarks, tri))
        .collect::<Result<Vec<_>>>()?;
    let mut ss = [0.0; 3];
    for (img, f) in registered.iter().zip(&set.forces) {
        let d = (model.predict(img)?.force - *f).to_array();
        for a in 0..3 {
            ss[a] += d[a] * d[a];
        }
    }
    let summary = TrainingSummary {
        samples: n,
        k: model.k(),
        eigenvalues: model.eigenvalues.clone(),
        appearance_samples: cfg.train.appearance_samples.clamp(1, n.max(1)),
        texture_modes: appearance.texture.pca.retained(),
        combined_modes: appearance.combined.components.len(),
        training_rms_n: ss.map(|s| (s / n as f64).sqrt()),
    };
    let dir = cfg.model_dir();
    create_dir(&dir)?;
    appearance.save(dir.join("appearance.json"))?;
    model.save(dir.join("eigennail.json"))?;
    write_json(&dir.join("training.json"), &summary)?;
    info!(
        "trained on {} samples: k = {}, training RMS {:?} N",
        n, summary.k, summary.training_rms_n
    );
    Ok(summary)
}

pub fn load_estimator(cfg: &PipelineConfig, model_dir: &Path) -> Result<NailEstimator> {
    let appearance = AppearanceModel::load(model_dir.join("appearance.json"))?;
    let eigennail = EigenNailModel::load(model_dir.join("eigennail.json"))?;
    Ok(NailEstimator::new(appearance, eigennail, cfg.registration))
}

fn phase_at(events: &PhaseEvents, sample: usize) -> Phase {
    if sample < events.contact {
        Phase::PreContact
    } else if sample < events.lift {
        Phase::Grasp
    } else if sample < events.hold_start {
        Phase::Lift
    } else if sample < events.hold_end {
        Phase::Hold
    } else {
        Phase::Replace
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub frame: usize,
    pub finger: FingerId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub session: String,
    pub frames: usize,
    pub processed: usize,
    pub skipped: usize,
    pub extrapolated: usize,
    pub camera_detections: usize,
}

fn session_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".into())
}

/// Runs the estimator over every nail frame of a session directory and
/// writes `estimate/<session>/forces.csv` plus a skip log. Camera frames,
/// when present, are segmented into `crops/` with `detections.csv`.
pub fn cmd_estimate(cfg: &PipelineConfig, model_dir: &Path, session_dir: &Path) -> Result<EstimateSummary> {
    let estimator = load_estimator(cfg, model_dir)?;
    let manifest = read_session_manifest(session_dir)?;
    let name = session_name(session_dir);
    let out = cfg.estimate_dir().join(&name);
    create_dir(&out)?;

    let frame_rate = manifest.frame_rate_hz;
    let mut records = Vec::new();
    let mut skips = Vec::new();
    let mut extrapolated = 0;
    for frame in 0..manifest.frame_count {
        let t = frame as f64 / frame_rate;
        let sample = ((t / manifest.dt).round() as usize).min(manifest.samples.saturating_sub(1));
        let phase = phase_at(&manifest.events, sample);
        for finger in FingerId::ALL {
            let result = read_image(frame_path(session_dir, finger, frame)).and_then(|img| estimator.estimate(&img));
            match result {
                Ok(est) => {
                    extrapolated += usize::from(est.prediction.extrapolated);
                    records.push(ForceRecord::new(t, finger, est.force, phase, "estimate"));
                }
                Err(e) => {
                    warn!("frame {frame} {finger}: skipped ({e})");
                    skips.push(SkipRecord {
                        frame,
                        finger,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    write_force_csv(out.join("forces.csv"), &records)?;
    let path = out.join("skipped.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["frame", "finger", "reason"])?;
    for s in &skips {
        w.write_record([s.frame.to_string(), s.finger.to_string(), s.reason.clone()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let camera_detections = segment_camera_frames(cfg, session_dir, &out, &name)?;
    let total = manifest.frame_count * FingerId::ALL.len();
    let summary = EstimateSummary {
        session: name,
        frames: total,
        processed: records.len(),
        skipped: skips.len(),
        extrapolated,
        camera_detections,
    };
    write_json(&out.join("summary.json"), &summary)?;
    if total > 0 && (records.len() as f64) < cfg.analysis.min_processed_fraction * total as f64 {
        return Err(Error::domain(format!(
            "only {} of {} frames processed",
            records.len(),
            total
        )));
    }
    info!(
        "{}: {} of {} frames estimated, {} extrapolated",
        summary.session, summary.processed, total, extrapolated
    );
    Ok(summary)
}

pub fn camera_frame_path(dir: &Path, side: CameraSide, frame: usize) -> PathBuf {
    let side = match side {
        CameraSide::FingerSide => "finger_side",
        CameraSide::ThumbSide => "thumb_side",
    };
    dir.join("camera").join(format!("{side}_{frame}.ppm"))
}

fn segment_camera_frames(cfg: &PipelineConfig, session_dir: &Path, out: &Path, trial: &str) -> Result<usize> {
    if !session_dir.join("camera").is_dir() {
        return Ok(0);
    }
    let crops = out.join("crops");
    create_dir(&crops)?;
    let mut log = Vec::new();
    for frame in 0.. {
        let paths = [CameraSide::FingerSide, CameraSide::ThumbSide].map(|s| (s, camera_frame_path(session_dir, s, frame)));
        if !paths.iter().any(|(_, p)| p.exists()) {
            break;
        }
        for (side, path) in paths {
            let img = match read_image(&path) {
                Ok(img) => img,
                Err(e) => {
                    warn!("{}: skipped ({e})", path.display());
                    continue;
                }
            };
            match segment_frame(&img, side, &cfg.segmentation) {
                Ok(dets) => {
                    for d in dets {
                        write_image(&d.crop.to_gray(), crops.join(crop_file_name(trial, d.finger, frame)))?;
                        log.push(DetectionRecord {
                            frame,
                            finger: d.finger,
                            centroid_row: d.blob.centroid.0,
                            centroid_col: d.blob.centroid.1,
                            area: d.blob.area,
                        });
                    }
                }
                Err(e) => warn!("{}: skipped ({e})", path.display()),
            }
        }
    }
    write_detection_log(out.join("detections.csv"), &log)?;
    Ok(log.len())
}

/// Simulates one session of `cfg.session.scenario` keyed by `cfg.seed` into
/// `sessions/<scenario>_<seed>/`.
pub fn cmd_simulate_session(cfg: &PipelineConfig) -> Result<(PathBuf, SessionManifest)> {
    simulate_into(cfg, cfg.session.scenario, cfg.seed, &cfg.sessions_dir(), cfg.session.nail_frames, cfg.session.camera_frames)
}

fn simulate_into(
    cfg: &PipelineConfig,
    scenario: Scenario,
    seed: u64,
    parent: &Path,
    nail_frames: bool,
    camera_frames: usize,
) -> Result<(PathBuf, SessionManifest)> {
    let spec = &cfg.session;
    let session = simulate_session_with(scenario, &scenario.default_profile(), &spec.protocol, seed, spec.dt)?;
    let dir = parent.join(format!("{scenario}_{seed}"));
    let renderer = FrameRenderer::new(NailForwardModel::standard(
        cfg.oracle.height,
        cfg.oracle.width,
        cfg.oracle.noise_sigma,
        cfg.seed,
    ));
    let manifest = write_session(&dir, &session, nail_frames.then_some((&renderer, cfg.oracle.bit_depth)))?;
    if camera_frames > 0 {
        create_dir(&dir.join("camera"))?;
        let cam = CameraFrameRenderer::default();
        for k in 0..camera_frames {
            write_image(&cam.finger_frame(seed, k as u64).image, camera_frame_path(&dir, CameraSide::FingerSide, k))?;
            write_image(&cam.thumb_frame(seed, k as u64).image, camera_frame_path(&dir, CameraSide::ThumbSide, k))?;
        }
    }
    info!("session {} ({} samples, {} frames)", dir.display(), manifest.samples, manifest.frame_count);
    Ok((dir, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoCameraSummary {
    pub name: String,
    pub initial_error_px: f64,
    pub final_error_px: f64,
    /// Time after which the error stays below 1 px.
    pub settled_s: Option<f64>,
    pub captures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoSummary {
    pub cameras: Vec<ServoCameraSummary>,
    pub loss: Option<crate::servo::LossEvent>,
}

pub fn servo_scenario(cfg: &PipelineConfig) -> Result<TrackingScenario> {
    let mut s = match &cfg.servo.scenario_file {
        Some(p) => TrackingScenario::load(p)?,
        None => TrackingScenario::preset(&cfg.servo.preset)?,
    };
    if let Some(c) = cfg.servo.config {
        s.config = c;
    }
    Ok(s)
}

/// Runs the tracking scenario and writes `servo/scenario.json`,
/// `servo/trace.csv` and `servo/summary.json`.
pub fn cmd_servo(cfg: &PipelineConfig) -> Result<ServoSummary> {
    let scenario = servo_scenario(cfg)?;
    let trace = run_tracking(&scenario)?;
    let dir = cfg.servo_dir();
    create_dir(&dir)?;
    scenario.save(dir.join("scenario.json"))?;
    trace.write_csv(dir.join("trace.csv"))?;
    let cameras = trace
        .cameras
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let series = trace.error_series(i);
            ServoCameraSummary {
                name: name.clone(),
                initial_error_px: series.first().map_or(f64::NAN, |s| s.1),
                final_error_px: series.last().map_or(f64::NAN, |s| s.1),
                settled_s: trace.settling_time(i, 1.0),
                captures: trace.capture_times(i).len(),
            }
        })
        .collect();
    let summary = ServoSummary {
        cameras,
        loss: trace.loss.clone(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    if let Some(l) = &summary.loss {
        warn!("tracking lost at t = {} s on camera {}: {}", l.time_s, l.camera, l.reason);
    }
    Ok(summary)
}

/// A forces CSV, or a directory holding `forces.csv`.
fn trial_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("forces.csv")
    } else {
        p.to_path_buf()
    }
}

/// Loads the trials of each condition, detects their phases and writes the
/// report into `report/`.
pub fn cmd_analyze(cfg: &PipelineConfig, conditions: &[(String, Vec<PathBuf>)]) -> Result<Report> {
    let mut trials = Vec::new();
    for (condition, paths) in conditions {
        for p in paths {
            let path = trial_path(p);
            let wrap = |e: Error| Error::Trial {
                trial: path.display().to_string(),
                source: Box::new(e),
            };
            let mut t = GraspTrial::from_csv(&path, condition.clone()).map_err(wrap)?;
            t.id = format!("{condition}/{}", t.id);
            t.boundaries = Some(detect_phases_with(&t, &cfg.analysis.phases).map_err(wrap)?);
            trials.push(t);
        }
    }
    let report = trial_report(&trials)?;
    write_report(&report, &cfg.report_dir())?;
    info!("report: {} trials in {} conditions", report.trials.len(), report.conditions.len());
    Ok(report)
}

/// Simulates `trials_per_condition` oracle sessions for both conditions
/// (seeds `seed .. seed + n`) and reports on them.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<Report> {
    let parent = cfg.report_dir().join("sessions");
    let mut groups: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for scenario in [Scenario::Constrained, Scenario::Unconstrained] {
        for k in 0..cfg.session.trials_per_condition as u64 {
            let (dir, _) = simulate_into(cfg, scenario, cfg.seed + k, &parent, false, 0)?;
            groups.entry(scenario.to_string()).or_default().push(dir);
        }
    }
    let conditions: Vec<(String, Vec<PathBuf>)> = groups.into_iter().collect();
    cmd_analyze(cfg, &conditions)
}
