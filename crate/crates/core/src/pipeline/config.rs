use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::PhaseThresholds;
use crate::error::{Error, Result};
use crate::imaging::BitDepth;
use crate::registration::SearchConfig;
use crate::segmentation::SegmentationConfig;
use crate::servo::ServoConfig;
use crate::synth::{CalibrationGrid, Scenario, SessionConfig, TEMPLATE_HEIGHT, TEMPLATE_WIDTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpec {
    Sparse,
    Medium,
    Dense,
    Custom(CalibrationGrid),
}

impl GridSpec {
    pub fn grid(&self) -> CalibrationGrid {
        match self {
            GridSpec::Sparse => CalibrationGrid::sparse(),
            GridSpec::Medium => CalibrationGrid::medium(),
            GridSpec::Dense => CalibrationGrid::dense(),
            GridSpec::Custom(g) => g.clone(),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(GridSpec::Sparse),
            "medium" => Ok(GridSpec::Medium),
            "dense" => Ok(GridSpec::Dense),
            other => Err(Error::domain(format!("unknown grid {other:?} (sparse, medium, dense)"))),
        }
    }
}

/// Synthetic nail images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
    pub bit_depth: BitDepth,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            height: TEMPLATE_HEIGHT,
            width: TEMPLATE_WIDTH,
            noise_sigma: 0.0,
            bit_depth: BitDepth::Sixteen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub variance_fraction: f64,
    /// Calibration images used for the appearance model, evenly spaced.
    pub appearance_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variance_fraction: crate::pca::VARIANCE_FRACTION,
            appearance_samples: 63,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSpec {
    pub scenario: Scenario,
    /// Force sample period, seconds.
    pub dt: f64,
    pub protocol: SessionConfig,
    /// Render per-finger nail frames.
    pub nail_frames: bool,
    /// Whole camera frames per camera side; 0 skips them.
    pub camera_frames: usize,
    pub trials_per_condition: usize,
}

impl Default for SessionSpec {
    fn default() -> Self {
        SessionSpec {
            scenario: Scenario::Constrained,
            dt: 0.01,
            protocol: SessionConfig::default(),
            nail_frames: true,
            camera_frames: 0,
            trials_per_condition: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoSpec {
    /// `static`, `moving` or `two-camera`; ignored when `scenario_file` is set.
    pub preset: String,
    pub scenario_file: Option<PathBuf>,
    /// Replaces the scenario's controller settings when present.
    pub config: Option<ServoConfig>,
}

impl Default for ServoSpec {
    fn default() -> Self {
        ServoSpec {
            preset: "static".into(),
            scenario_file: None,
            config: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub phases: PhaseThresholds,
    /// Estimation fails when fewer frames than this are processed.
    pub min_processed_fraction: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            phases: PhaseThresholds::default(),
            min_processed_fraction: 0.95,
        }
    }
}

/// Everything a command needs besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridSpec,
    pub oracle: OracleConfig,
    pub train: TrainConfig,
    pub registration: SearchConfig,
    pub segmentation: SegmentationConfig,
    pub session: SessionSpec,
    pub servo: ServoSpec,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            output_dir: PathBuf::from("out"),
            grid: GridSpec::Sparse,
            oracle: OracleConfig::default(),
            train: TrainConfig::default(),
            registration: SearchConfig::default(),
            segmentation: SegmentationConfig::default(),
            session: SessionSpec::default(),
            servo: ServoSpec::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::synth::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::synth::write_json(path.as_ref(), self)
    }

    pub fn calibration_dir(&self) -> PathBuf {
        self.output_dir.join("calibration")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.output_dir.join("model")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.output_dir.join("sessions")
    }

    pub fn estimate_dir(&self) -> PathBuf {
        self.output_dir.join("estimate")
    }

    pub fn servo_dir(&self) -> PathBuf {
        self.output_dir.join("servo")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 3, "grid": "medium"}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.grid, GridSpec::Medium);
        assert_eq!(c.oracle, OracleConfig::default());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let c = PipelineConfig {
            grid: GridSpec::Custom(CalibrationGrid::sparse()),
            ..Default::default()
        };
        c.save(&p).unwrap();
        assert_eq!(PipelineConfig::load(&p).unwrap(), c);
    }
}
