//! Simulate constrained and unconstrained grasps, detect the task phases,
//! and compare the two conditions with Mann-Whitney U tests.

use nailforce::analysis::{detect_phases, equilibrium_gap, normalize_shares, trial_report, GraspTrial};
use nailforce::force::FingerId;
use nailforce::synth::{simulate_session, Scenario};

fn main() -> nailforce::Result<()> {
    let mut trials = Vec::new();
    for scenario in [Scenario::Constrained, Scenario::Unconstrained] {
        for seed in 0..6 {
            let session = simulate_session(scenario, seed, 0.01)?;
            trials.push(GraspTrial::from_session(format!("{}-{seed}", scenario.as_str()), &session));
        }
    }

    let first = &trials[0];
    let b = detect_phases(first)?;
    let hold = b.hold();
    let shares = normalize_shares(first, hold)?;
    println!(
        "{}: grasp {:.2} s, lift {:.2} s, hold {:.2}-{:.2} s, replace {:.2} s",
        first.id,
        b.grasp as f64 * first.dt,
        b.lift as f64 * first.dt,
        b.hold_start as f64 * first.dt,
        b.hold_end as f64 * first.dt,
        b.replace as f64 * first.dt
    );
    println!(
        "  normal shares I/M/R = {:.1}/{:.1}/{:.1} %, thumb vs fingers gap {:.2} %",
        shares.normal[0],
        shares.normal[1],
        shares.normal[2],
        equilibrium_gap(first, hold)?.normal_pct
    );

    let report = trial_report(&trials)?;
    for c in &report.conditions {
        println!(
            "{:>13}: hold normal T/I/M/R = {:.2}/{:.2}/{:.2}/{:.2} N, balance var {:.2}",
            c.condition,
            c.hold_normal_n[0].mean,
            c.hold_normal_n[1].mean,
            c.hold_normal_n[2].mean,
            c.hold_normal_n[3].mean,
            c.balance_normal.mean
        );
    }
    for cmp in &report.comparisons {
        println!("{} vs {} (alpha {}):", cmp.a, cmp.b, report.alpha);
        for row in &cmp.tests {
            let finger = row.finger.map(FingerId::as_str).unwrap_or("all");
            println!(
                "  {:<18} {:<7} {:<7} U = {:5.1}  p = {:.4}{}",
                row.metric,
                finger,
                row.axis,
                row.test.u,
                row.test.p,
                if row.significant { "  *" } else { "" }
            );
        }
    }
    Ok(())
}
