//! Image-based visual servoing: an eye-in-hand camera keeps a four-dot
//! plate centered while the plate sits still, then while it moves.

use nailforce::servo::{run_tracking, TrackingScenario};

fn main() -> nailforce::Result<()> {
    for name in ["static", "moving", "two-camera"] {
        let scenario = TrackingScenario::preset(name)?;
        let trace = run_tracking(&scenario)?;
        println!("== {name} ({} s)", scenario.duration_s);
        for (k, cam) in trace.cameras.iter().enumerate() {
            let series = trace.error_series(k);
            let initial = series.first().map(|p| p.1).unwrap_or(f64::NAN);
            println!(
                "  {cam}: error {:.1} px -> {:.3} px, below 1 px from {}",
                initial,
                trace.final_error(k).unwrap_or(f64::NAN),
                trace
                    .settling_time(k, 1.0)
                    .map(|t| format!("{t:.2} s"))
                    .unwrap_or_else(|| "never".into())
            );
            // Coarse error profile, one sample every half second.
            let step = (0.5 / scenario.config.control_dt).round() as usize;
            let profile: Vec<String> = series.iter().step_by(step.max(1)).map(|(_, e)| format!("{e:.1}")).collect();
            println!("    {}", profile.join(" "));
        }
        if let Some(loss) = &trace.loss {
            println!("  features lost: {loss:?}");
        }
    }
    Ok(())
}
