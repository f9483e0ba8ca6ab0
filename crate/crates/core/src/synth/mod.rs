//! Ground-truth oracle: forward nail model, calibration grid, grasp
//! sessions, camera frames, and their on-disk layout.

mod camera;
mod grid;
mod nail;
mod session;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use camera::{CameraFrame, CameraFrameRenderer};
pub use grid::{make_grid, CalibrationGrid};
pub use nail::{
    render_nail, NailForwardModel, NailGeometry, BACKGROUND, FORCE_LIMITS, NAIL_LEVEL, PEAK_EXCURSION,
    TEMPLATE_HEIGHT, TEMPLATE_WIDTH,
};
pub use session::{
    simulate_session, simulate_session_with, FrameRenderer, GraspSession, PhaseEvents, Scenario,
    ScenarioProfile, SessionConfig, SessionFrame, GRAVITY,
};

pub use crate::force::ForceVector;
use crate::error::{Error, Result};
use crate::force::FingerId;
use crate::imaging::{write_image_with_depth, BitDepth};
use crate::records::{write_force_csv, ForceRecord};

pub const SESSION_FORMAT: &str = "nailforce-session/1";

/// `manifest.json` of a session directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub format: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub dt: f64,
    pub weight_n: f64,
    pub samples: usize,
    pub frame_rate_hz: f64,
    pub frame_count: usize,
    pub events: PhaseEvents,
    /// Frame file pattern relative to the session directory.
    pub frame_pattern: String,
    pub bit_depth: Option<BitDepth>,
    pub noise_sigma: Option<f64>,
}

pub fn session_records(session: &GraspSession, source: &str) -> Vec<ForceRecord> {
    let mut out = Vec::with_capacity(session.len() * 4);
    for i in 0..session.len() {
        for f in FingerId::ALL {
            out.push(ForceRecord::new(
                session.time(i),
                f,
                session.finger(f)[i],
                session.phases[i],
                source,
            ));
        }
    }
    out
}

pub fn frame_path(dir: &Path, finger: FingerId, frame: usize) -> PathBuf {
    dir.join("frames").join(format!("{finger}_{frame}.pgm"))
}

/// Writes `forces.csv`, `manifest.json` and, when a renderer is given,
/// `frames/<finger>_<frame>.pgm`.
pub fn write_session(
    dir: &Path,
    session: &GraspSession,
    frames: Option<(&FrameRenderer, BitDepth)>,
) -> Result<SessionManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_force_csv(dir.join("forces.csv"), &session_records(session, "oracle"))?;
    if let Some((renderer, depth)) = frames {
        let fdir = dir.join("frames");
        fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        for fr in renderer.frames(session) {
            write_image_with_depth(&fr.image, frame_path(dir, fr.finger, fr.frame), depth)?;
        }
    }
    let manifest = SessionManifest {
        format: SESSION_FORMAT.to_string(),
        scenario: session.scenario,
        seed: session.seed,
        dt: session.dt,
        weight_n: session.object_weight,
        samples: session.len(),
        frame_rate_hz: session.frame_rate_hz,
        frame_count: if frames.is_some() { session.frame_count() } else { 0 },
        events: session.events,
        frame_pattern: "frames/<finger>_<frame>.pgm".to_string(),
        bit_depth: frames.map(|(_, d)| d),
        noise_sigma: frames.map(|(r, _)| r.model.noise_sigma),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn read_session_manifest(dir: &Path) -> Result<SessionManifest> {
    let m: SessionManifest = read_json(&dir.join("manifest.json"))?;
    if m.format != SESSION_FORMAT {
        return Err(Error::format(dir.join("manifest.json"), format!("unknown format {:?}", m.format)));
    }
    Ok(m)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
