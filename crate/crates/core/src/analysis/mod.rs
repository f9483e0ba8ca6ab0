//! Grasp-trial statistics: phase detection, hold-phase metrics, the
//! Mann-Whitney test and condition reports.

mod mann_whitney;
mod metrics;
mod report;
mod trial;

pub use mann_whitney::{mann_whitney_u, UTest, UTestMode, EXACT_LIMIT};
pub use metrics::{
    balance_variance, equilibrium_gap, hold_mean, normalize_shares, rms_error, sample_variance,
    steadiness_variance, trial_stats, AxisPair, EquilibriumGap, RmsError, Shares, TrialStats,
};
pub use report::{
    render_svg, trial_report, write_report, Comparison, ConditionSummary, MeanStd, Report, TestRow, ALPHA,
    REFERENCE_RMS_N,
};
pub use trial::{detect_phases, detect_phases_with, GraspTrial, HoldWindow, PhaseBoundaries, PhaseThresholds};
