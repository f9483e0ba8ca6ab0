use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mann_whitney::{mann_whitney_u, UTest, UTestMode};
use super::metrics::{sample_variance, trial_stats, AxisPair, TrialStats};
use super::trial::GraspTrial;
use crate::error::{Error, Result};
use crate::force::FingerId;

pub const ALPHA: f64 = 0.05;

/// Published mean and spread of the per-finger RMS validation error, N,
/// kept for annotating reports.
pub const REFERENCE_RMS_N: [(FingerId, f64, f64); 4] = [
    (FingerId::Thumb, 0.82, 0.06),
    (FingerId::Index, 0.62, 0.04),
    (FingerId::Middle, 0.59, 0.03),
    (FingerId::Ring, 0.64, 0.04),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation across trials.
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        MeanStd {
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            std: sample_variance(xs).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub trials: usize,
    /// Indexed by [`FingerId::index`].
    pub hold_normal_n: [MeanStd; 4],
    pub hold_shear_n: [MeanStd; 4],
    /// Index, middle, ring.
    pub shares_pct: [MeanStd; 3],
    pub balance_normal: MeanStd,
    pub balance_shear: MeanStd,
    pub steadiness_normal: [MeanStd; 4],
    pub steadiness_shear: [MeanStd; 4],
    pub equilibrium_max_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub metric: String,
    pub finger: Option<FingerId>,
    pub axis: String,
    pub test: UTest,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub tests: Vec<TestRow>,
}

impl Comparison {
    pub fn find(&self, metric: &str, finger: Option<FingerId>, axis: &str) -> Option<&TestRow> {
        self.tests
            .iter()
            .find(|t| t.metric == metric && t.finger == finger && t.axis == axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub alpha: f64,
    pub trials: Vec<TrialStats>,
    pub conditions: Vec<ConditionSummary>,
    pub comparisons: Vec<Comparison>,
    pub reference_rms_n: Vec<(FingerId, f64, f64)>,
}

impl Report {
    pub fn condition(&self, name: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

fn summarize(condition: &str, stats: &[&TrialStats]) -> ConditionSummary {
    let col = |f: &dyn Fn(&TrialStats) -> f64| MeanStd::of(&stats.iter().map(|s| f(s)).collect::<Vec<_>>());
    let per4 = |f: &dyn Fn(&TrialStats, usize) -> f64| std::array::from_fn(|k| col(&|s| f(s, k)));
    ConditionSummary {
        condition: condition.to_string(),
        trials: stats.len(),
        hold_normal_n: per4(&|s, k| s.hold_means[k].normal),
        hold_shear_n: per4(&|s, k| s.hold_means[k].shear),
        shares_pct: std::array::from_fn(|k| col(&|s| s.shares.normal[k])),
        balance_normal: col(&|s| s.balance.normal),
        balance_shear: col(&|s| s.balance.shear),
        steadiness_normal: per4(&|s, k| s.steadiness[k].normal),
        steadiness_shear: per4(&|s, k| s.steadiness[k].shear),
        equilibrium_max_pct: stats
            .iter()
            .map(|s| s.equilibrium.normal_pct)
            .fold(0.0, f64::max),
    }
}

fn pick(a: &AxisPair, axis: &str) -> f64 {
    if axis == "normal" {
        a.normal
    } else {
        a.shear
    }
}

fn compare(a: &str, sa: &[&TrialStats], b: &str, sb: &[&TrialStats]) -> Result<Comparison> {
    let mut tests = Vec::new();
    let mut push = |metric: &str, finger: Option<FingerId>, axis: &str, xs: Vec<f64>, ys: Vec<f64>| -> Result<()> {
        let test = mann_whitney_u(&xs, &ys, UTestMode::Auto)?;
        tests.push(TestRow {
            metric: metric.to_string(),
            finger,
            axis: axis.to_string(),
            significant: test.p < ALPHA,
            test,
        });
        Ok(())
    };
    for axis in ["normal", "shear"] {
        for f in FingerId::ALL {
            let get = |s: &[&TrialStats]| s.iter().map(|t| pick(&t.hold_means[f.index()], axis)).collect();
            push("hold_mean", Some(f), axis, get(sa), get(sb))?;
        }
    }
    // Each finger's hold means minus that finger's mean over both
    // conditions, pooled over all four fingers.
    let mut pooled = (Vec::new(), Vec::new());
    for f in FingerId::ALL {
        let k = f.index();
        let all: Vec<f64> = sa.iter().chain(sb).map(|t| t.hold_means[k].normal).collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        pooled.0.extend(sa.iter().map(|t| t.hold_means[k].normal - m));
        pooled.1.extend(sb.iter().map(|t| t.hold_means[k].normal - m));
    }
    push("pooled_residual", None, "normal", pooled.0, pooled.1)?;
    for axis in ["normal", "shear"] {
        let get = |s: &[&TrialStats]| s.iter().map(|t| pick(&t.balance, axis)).collect();
        push("balance", None, axis, get(sa), get(sb))?;
        for f in FingerId::ALL {
            let get = |s: &[&TrialStats]| s.iter().map(|t| pick(&t.steadiness[f.index()], axis)).collect();
            push("steadiness", Some(f), axis, get(sa), get(sb))?;
        }
    }
    Ok(Comparison {
        a: a.to_string(),
        b: b.to_string(),
        tests,
    })
}

/// Per-trial statistics, per-condition aggregates and pairwise condition
/// tests. Trials are processed in id order; conditions in name order.
pub fn trial_report(trials: &[GraspTrial]) -> Result<Report> {
    let mut sorted: Vec<&GraspTrial> = trials.iter().collect();
    sorted.sort_by(|a, b| (&a.condition, &a.id).cmp(&(&b.condition, &b.id)));
    let mut stats = Vec::with_capacity(sorted.len());
    for t in sorted {
        stats.push(trial_stats(t).map_err(|e| Error::Trial {
            trial: t.id.clone(),
            source: Box::new(e),
        })?);
    }
    let mut groups: BTreeMap<&str, Vec<&TrialStats>> = BTreeMap::new();
    for s in &stats {
        groups.entry(s.condition.as_str()).or_default().push(s);
    }
    if let Some((c, g)) = groups.iter().find(|(_, g)| g.len() < 2) {
        return Err(Error::domain(format!("condition {c} has {} trial(s); at least 2 needed", g.len())));
    }
    let conditions: Vec<ConditionSummary> = groups.iter().map(|(c, g)| summarize(c, g)).collect();
    let names: Vec<&str> = groups.keys().copied().collect();
    let mut comparisons = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            comparisons.push(compare(names[i], &groups[names[i]], names[j], &groups[names[j]])?);
        }
    }
    Ok(Report {
        alpha: ALPHA,
        conditions,
        comparisons,
        reference_rms_n: REFERENCE_RMS_N.to_vec(),
        trials: stats,
    })
}

const CSV_HEADER: [&str; 10] = ["record", "condition", "versus", "metric", "finger", "axis", "value", "std", "u", "p"];

fn summary_rows(c: &ConditionSummary) -> Vec<[String; 10]> {
    let mut rows = Vec::new();
    let mut row = |metric: &str, finger: &str, axis: &str, v: MeanStd| {
        rows.push([
            "summary".into(),
            c.condition.clone(),
            String::new(),
            metric.into(),
            finger.into(),
            axis.into(),
            v.mean.to_string(),
            v.std.to_string(),
            String::new(),
            String::new(),
        ]);
    };
    for f in FingerId::ALL {
        let k = f.index();
        row("hold_mean", f.as_str(), "normal", c.hold_normal_n[k]);
        row("hold_mean", f.as_str(), "shear", c.hold_shear_n[k]);
        row("steadiness", f.as_str(), "normal", c.steadiness_normal[k]);
        row("steadiness", f.as_str(), "shear", c.steadiness_shear[k]);
    }
    for (k, f) in FingerId::FINGERS.iter().enumerate() {
        row("share_pct", f.as_str(), "normal", c.shares_pct[k]);
    }
    row("balance", "", "normal", c.balance_normal);
    row("balance", "", "shear", c.balance_shear);
    rows
}

/// Writes `report.json`, `report.csv` and `report.svg` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::synth::write_json(&dir.join("report.json"), report)?;

    let path = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(CSV_HEADER)?;
    for c in &report.conditions {
        for r in summary_rows(c) {
            w.write_record(&r)?;
        }
    }
    for cmp in &report.comparisons {
        for t in &cmp.tests {
            w.write_record([
                "test",
                &cmp.a,
                &cmp.b,
                &t.metric,
                t.finger.map_or("", FingerId::as_str),
                &t.axis,
                "",
                "",
                &t.test.u.to_string(),
                &t.test.p.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let svg = render_svg(report);
    let path = dir.join("report.svg");
    fs::write(&path, svg).map_err(|e| Error::io(&path, e))
}

const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

/// One panel of grouped bars with error bars.
fn bar_panel(
    out: &mut String,
    x0: f64,
    title: &str,
    unit: &str,
    groups: &[&str],
    series: &[(String, Vec<MeanStd>)],
) {
    let (w, h, top) = (420.0, 260.0, 40.0);
    let ymax = series
        .iter()
        .flat_map(|(_, v)| v.iter().map(|m| m.mean + m.std))
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.1;
    let y = |v: f64| top + h - h * v / ymax;
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{title}</text>"#,
        x0 + w / 2.0
    );
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333"/>"##,
        top + h,
        x0 + w,
        top + h
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">{:.2} {unit}</text>"#,
        x0,
        top - 4.0,
        ymax
    );
    let slot = w / groups.len() as f64;
    let bw = slot * 0.8 / series.len() as f64;
    for (g, name) in groups.iter().enumerate() {
        let gx = x0 + slot * g as f64 + slot * 0.1;
        for (s, (_, vals)) in series.iter().enumerate() {
            let m = vals[g];
            let bx = gx + bw * s as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                y(m.mean),
                bw * 0.9,
                (top + h - y(m.mean)).max(0.0),
                PALETTE[s % PALETTE.len()]
            );
            let cx = bx + bw * 0.45;
            let _ = writeln!(
                out,
                r##"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#000"/>"##,
                y(m.mean + m.std),
                y((m.mean - m.std).max(0.0))
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{name}</text>"#,
            gx + slot * 0.4,
            top + h + 16.0
        );
    }
    for (s, (label, _)) in series.iter().enumerate() {
        let ly = top + 14.0 * s as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="11">{label}</text>"#,
            x0 + w - 110.0,
            ly,
            PALETTE[s % PALETTE.len()],
            x0 + w - 95.0,
            ly + 9.0
        );
    }
}

/// Self-contained SVG with hold means, shares and steadiness per condition.
pub fn render_svg(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="1400" height="340" font-family="sans-serif">"#
    );
    let fingers4: Vec<&str> = FingerId::ALL.iter().map(|f| f.as_str()).collect();
    let fingers3: Vec<&str> = FingerId::FINGERS.iter().map(|f| f.as_str()).collect();
    let series = |f: &dyn Fn(&ConditionSummary) -> Vec<MeanStd>| -> Vec<(String, Vec<MeanStd>)> {
        report.conditions.iter().map(|c| (c.condition.clone(), f(c))).collect()
    };
    bar_panel(
        &mut out,
        30.0,
        "Hold normal force",
        "N",
        &fingers4,
        &series(&|c| c.hold_normal_n.to_vec()),
    );
    bar_panel(
        &mut out,
        490.0,
        "Normal force share",
        "%",
        &fingers3,
        &series(&|c| c.shares_pct.to_vec()),
    );
    bar_panel(
        &mut out,
        950.0,
        "Steadiness (normal)",
        "N^2",
        &fingers4,
        &series(&|c| c.steadiness_normal.to_vec()),
    );
    out.push_str("</svg>\n");
    out
}
