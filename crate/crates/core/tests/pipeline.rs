use nailforce::analysis::GraspTrial;
use nailforce::eigennail::{fit_regression, NailSpaceCoord};
use nailforce::force::{FingerId, ForceVector};
use nailforce::pipeline::{self, exit_code, GridSpec, PipelineConfig};
use nailforce::synth::{read_session_manifest, CalibrationGrid, Scenario};
use nailforce::Error;

fn config(dir: &std::path::Path) -> PipelineConfig {
    PipelineConfig {
        output_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn calibrate_train_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.session.protocol.frame_rate_hz = 2.0;
    cfg.session.camera_frames = 2;

    let cal = pipeline::cmd_calibrate(&cfg).unwrap();
    assert_eq!(cal.samples, 63);
    let set = pipeline::read_calibration(&cfg.calibration_dir()).unwrap();
    assert_eq!(set.images.len(), 63);

    let trained = pipeline::cmd_train(&cfg, &cfg.calibration_dir()).unwrap();
    assert_eq!(trained.k, 3);
    assert!(trained.training_rms_n.iter().all(|r| *r < 1e-3), "{:?}", trained.training_rms_n);

    let (session_dir, manifest) = pipeline::cmd_simulate_session(&cfg).unwrap();
    assert_eq!(read_session_manifest(&session_dir).unwrap(), manifest);
    let summary = pipeline::cmd_estimate(&cfg, &cfg.model_dir(), &session_dir).unwrap();
    assert_eq!(summary.frames, 4 * manifest.frame_count);
    assert_eq!(summary.processed, summary.frames);
    assert_eq!(summary.camera_detections, 2 * 4);

    let out = cfg.estimate_dir().join(session_dir.file_name().unwrap());
    let est = GraspTrial::from_csv(out.join("forces.csv"), "estimate").unwrap();
    let truth = GraspTrial::from_csv(session_dir.join("forces.csv"), "truth").unwrap();
    let stride = (est.dt / truth.dt).round() as usize;
    for f in FingerId::ALL {
        for (k, e) in est.finger(f).iter().enumerate() {
            let t = truth.finger(f)[k * stride];
            let d = *e - t;
            assert!(d.to_array().iter().all(|v| v.abs() < 5e-3), "{f:?} frame {k}: {e:?} vs {t:?}");
        }
    }
    assert!(out.join("crops").is_dir());
}

#[test]
fn underdetermined_regression_is_a_numeric_failure() {
    let coords: Vec<NailSpaceCoord> = (0..3).map(|i| NailSpaceCoord { w: vec![i as f64, 1.0, -(i as f64)] }).collect();
    let forces = vec![ForceVector::new(0.0, 0.0, 1.0); 3];
    let err = fit_regression(&coords, &forces).unwrap_err();
    assert!(matches!(err, Error::Underdetermined { samples: 3, unknowns: 4 }), "{err}");
    assert_eq!(exit_code(&err), 4);
}

#[test]
fn single_level_grid_trains_a_degenerate_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.grid = GridSpec::Custom(CalibrationGrid {
        fz_levels: vec![0.0, 18.0],
        fx_levels: vec![0.0],
        fy_levels: vec![0.0],
    });
    pipeline::cmd_calibrate(&cfg).unwrap();
    let summary = pipeline::cmd_train(&cfg, &cfg.calibration_dir()).unwrap();
    assert_eq!((summary.samples, summary.k), (2, 1));
}

#[test]
fn estimate_without_a_model_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.session.nail_frames = false;
    let (session_dir, _) = pipeline::cmd_simulate_session(&cfg).unwrap();
    let err = pipeline::cmd_estimate(&cfg, &dir.path().join("no-model"), &session_dir).unwrap_err();
    assert_eq!(exit_code(&err), 3);
}

#[test]
fn report_separates_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.session.trials_per_condition = 4;
    let report = pipeline::cmd_report(&cfg).unwrap();
    assert_eq!(report.trials.len(), 8);
    let cmp = &report.comparisons[0];
    let row = cmp.find("hold_mean", Some(FingerId::Index), "normal").unwrap();
    assert!(row.significant);
    let text = std::fs::read_to_string(cfg.report_dir().join("report.csv")).unwrap();
    assert!(text.starts_with("record,condition,versus,metric,finger,axis,value,std,u,p"));
    let svg = std::fs::read_to_string(cfg.report_dir().join("report.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn simulated_sessions_depend_only_on_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut cfg = config(d.path());
        cfg.session.scenario = Scenario::Unconstrained;
        cfg.session.nail_frames = false;
        pipeline::cmd_simulate_session(&cfg).unwrap();
    }
    let rel = "sessions/unconstrained_7/forces.csv";
    assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
}
