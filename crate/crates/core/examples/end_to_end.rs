//! The whole file-based pipeline in a scratch directory: calibrate,
//! train, simulate a session, estimate its forces and compare them with
//! the ground truth.

use nailforce::analysis::{rms_error, GraspTrial};
use nailforce::force::FingerId;
use nailforce::pipeline::{self, PipelineConfig};
use nailforce::synth::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scratch = tempfile::tempdir()?;
    let mut cfg = PipelineConfig {
        output_dir: scratch.path().to_path_buf(),
        ..Default::default()
    };
    cfg.session.scenario = Scenario::Unconstrained;
    // A low frame rate keeps the run short.
    cfg.session.protocol.frame_rate_hz = 5.0;

    let cal = pipeline::cmd_calibrate(&cfg)?;
    println!("calibration: {} images of {}x{}", cal.samples, cal.height, cal.width);
    let trained = pipeline::cmd_train(&cfg, &cfg.calibration_dir())?;
    println!("training: {}", serde_json::to_string(&trained)?);

    let (session_dir, manifest) = pipeline::cmd_simulate_session(&cfg)?;
    println!("session {} with {} frames", session_dir.display(), manifest.frame_count);
    let summary = pipeline::cmd_estimate(&cfg, &cfg.model_dir(), &session_dir)?;
    println!("estimate: {}", serde_json::to_string(&summary)?);

    let name = session_dir.file_name().unwrap();
    let est = GraspTrial::from_csv(cfg.estimate_dir().join(name).join("forces.csv"), "estimate")?;
    let truth = GraspTrial::from_csv(session_dir.join("forces.csv"), "truth")?;
    // The ground truth is sampled faster than the camera; align by time.
    let stride = (est.dt / truth.dt).round() as usize;
    for f in FingerId::ALL {
        let reference: Vec<_> = truth.finger(f).iter().step_by(stride).take(est.len()).copied().collect();
        let err = rms_error(&est.finger(f)[..reference.len()], &reference)?;
        println!("{:>6}: RMS error {:.3e} N {:?}", f.as_str(), err.combined, err.axes);
    }
    Ok(())
}
