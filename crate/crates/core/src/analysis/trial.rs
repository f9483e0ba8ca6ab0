use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{FingerId, ForceVector};
use crate::records::{read_force_csv, ForceRecord};
use crate::synth::GraspSession;

/// Phase boundaries as sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    pub grasp: usize,
    pub lift: usize,
    pub hold_start: usize,
    /// One past the last hold sample.
    pub hold_end: usize,
    pub replace: usize,
}

impl PhaseBoundaries {
    pub fn validate(&self, len: usize) -> Result<()> {
        let b = [self.grasp, self.lift, self.hold_start, self.hold_end, self.replace];
        if b.windows(2).any(|w| w[0] >= w[1]) || self.replace >= len {
            return Err(Error::domain(format!("phase boundaries {b:?} invalid for {len} samples")));
        }
        Ok(())
    }

    pub fn hold(&self) -> HoldWindow {
        HoldWindow {
            start: self.hold_start,
            end: self.hold_end,
        }
    }
}

/// Half-open sample range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldWindow {
    pub start: usize,
    pub end: usize,
}

impl HoldWindow {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspTrial {
    pub id: String,
    /// Condition tag, e.g. `constrained`.
    pub condition: String,
    pub dt: f64,
    /// Indexed by [`FingerId::index`].
    pub forces: [Vec<ForceVector>; 4],
    pub reference: Option<[Vec<ForceVector>; 4]>,
    pub boundaries: Option<PhaseBoundaries>,
}

impl GraspTrial {
    pub fn new(id: impl Into<String>, condition: impl Into<String>, dt: f64, forces: [Vec<ForceVector>; 4]) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("sample period must be positive, got {dt}")));
        }
        let n = forces[0].len();
        if forces.iter().any(|f| f.len() != n) {
            return Err(Error::domain("finger series differ in length"));
        }
        Ok(GraspTrial {
            id: id.into(),
            condition: condition.into(),
            dt,
            forces,
            reference: None,
            boundaries: None,
        })
    }

    /// Trial over the ground-truth forces of a simulated session.
    pub fn from_session(id: impl Into<String>, session: &GraspSession) -> Self {
        GraspTrial {
            id: id.into(),
            condition: session.scenario.as_str().to_string(),
            dt: session.dt,
            forces: session.forces.clone(),
            reference: None,
            boundaries: None,
        }
    }

    /// Builds a trial from force records. Only timestamps present for all
    /// four fingers are kept; the sample period is the median spacing.
    pub fn from_records(id: impl Into<String>, condition: impl Into<String>, records: &[ForceRecord]) -> Result<Self> {
        let mut by_time: BTreeMap<i64, [Option<ForceVector>; 4]> = BTreeMap::new();
        for r in records {
            let key = (r.time_s * 1e6).round() as i64;
            by_time.entry(key).or_default()[r.finger.index()] = Some(r.force());
        }
        let mut times = Vec::new();
        let mut forces: [Vec<ForceVector>; 4] = Default::default();
        for (t, row) in by_time {
            if row.iter().all(Option::is_some) {
                times.push(t as f64 * 1e-6);
                for (k, f) in row.iter().enumerate() {
                    forces[k].push(f.unwrap_or_default());
                }
            }
        }
        if times.len() < 2 {
            return Err(Error::domain("fewer than two complete samples"));
        }
        let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        let dt = gaps[gaps.len() / 2];
        Self::new(id, condition, dt, forces)
    }

    pub fn from_csv(path: impl AsRef<Path>, condition: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let id = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_records(id, condition, &read_force_csv(path)?)
    }

    pub fn len(&self) -> usize {
        self.forces[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn finger(&self, f: FingerId) -> &[ForceVector] {
        &self.forces[f.index()]
    }

    /// Sum of the index, middle and ring forces at each sample.
    pub fn finger_total(&self) -> Vec<ForceVector> {
        (0..self.len())
            .map(|i| {
                FingerId::FINGERS
                    .iter()
                    .fold(ForceVector::ZERO, |acc, f| acc + self.finger(*f)[i])
            })
            .collect()
    }

    /// Stored boundaries, or freshly detected ones.
    pub fn phases(&self) -> Result<PhaseBoundaries> {
        match self.boundaries {
            Some(b) => Ok(b),
            None => detect_phases(self),
        }
    }
}

/// Thresholds used by [`detect_phases`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseThresholds {
    pub contact_n: f64,
    pub sustain_s: f64,
    pub lift_ratio: f64,
    /// Plateau sampled over `[grasp + start, grasp + end]` seconds.
    pub plateau_s: (f64, f64),
    pub hold_band: f64,
    pub min_hold_s: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        PhaseThresholds {
            contact_n: 0.5,
            sustain_s: 0.2,
            lift_ratio: 1.1,
            plateau_s: (0.5, 1.0),
            hold_band: 0.10,
            min_hold_s: 5.0,
        }
    }
}

pub fn detect_phases(trial: &GraspTrial) -> Result<PhaseBoundaries> {
    detect_phases_with(trial, &PhaseThresholds::default())
}

/// First index `>= from` starting a run of `sustain` samples satisfying `pred`.
fn first_sustained(xs: &[f64], from: usize, sustain: usize, pred: impl Fn(f64) -> bool) -> Option<usize> {
    let mut run = 0;
    for (i, x) in xs.iter().enumerate().skip(from) {
        if pred(*x) {
            run += 1;
            if run >= sustain {
                return Some(i + 1 - run);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Longest `[start, end)` within `lo..hi` of at least `min_len` samples whose
/// values all lie within `band` of the window mean, with a mean above `floor`.
fn longest_band_window(xs: &[f64], lo: usize, hi: usize, min_len: usize, band: f64, floor: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let spread_limit = (1.0 + band) / (1.0 - band);
    for start in lo..hi {
        if hi - start < min_len.max(1) || best.is_some_and(|(s, e)| e - s >= hi - start) {
            break;
        }
        let (mut sum, mut mn, mut mx) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        let mut found = None;
        for (end, &x) in xs.iter().enumerate().take(hi).skip(start) {
            sum += x;
            mn = mn.min(x);
            mx = mx.max(x);
            if mn <= 0.0 || mx > spread_limit * mn {
                break;
            }
            let len = end + 1 - start;
            let mean = sum / len as f64;
            if len >= min_len && mean > floor && mx <= (1.0 + band) * mean && mn >= (1.0 - band) * mean {
                found = Some(end + 1);
            }
        }
        if let Some(end) = found {
            if best.is_none_or(|(s, e)| end - start > e - s) {
                best = Some((start, end));
            }
        }
    }
    best
}

/// Grasp, lift, hold and replace boundaries from the thumb normal force and
/// the summed finger normal force.
pub fn detect_phases_with(trial: &GraspTrial, th: &PhaseThresholds) -> Result<PhaseBoundaries> {
    let n = trial.len();
    let secs = |s: f64| (s / trial.dt).round() as usize;
    if (n as f64) * trial.dt < 2.0 {
        return Err(Error::domain(format!("trial {} shorter than 2 s", trial.id)));
    }
    let sustain = secs(th.sustain_s).max(1);
    let thumb: Vec<f64> = trial.finger(FingerId::Thumb).iter().map(|f| f.fz).collect();
    let total: Vec<f64> = trial.finger_total().iter().map(|f| f.fz).collect();

    let grasp = first_sustained(&thumb, 0, sustain, |x| x > th.contact_n).ok_or(Error::NoGrasp)?;
    let (p0, p1) = (grasp + secs(th.plateau_s.0), (grasp + secs(th.plateau_s.1)).min(n));
    if p0 >= p1 {
        return Err(Error::domain("trial ends before the pre-lift plateau"));
    }
    let plateau = total[p0..p1].iter().sum::<f64>() / (p1 - p0) as f64;
    let lift = (p1..n)
        .find(|&i| total[i] > th.lift_ratio * plateau)
        .ok_or_else(|| Error::domain("no lift found"))?;
    let (hold_start, hold_end) =
        longest_band_window(&total, lift + 1, n, secs(th.min_hold_s), th.hold_band, th.contact_n)
            .ok_or_else(|| Error::domain("no hold window found"))?;
    let replace = first_sustained(&thumb, hold_end, sustain, |x| x < th.contact_n)
        .ok_or_else(|| Error::domain("no release found after the hold"))?;
    let b = PhaseBoundaries {
        grasp,
        lift,
        hold_start,
        hold_end,
        replace: replace.max(hold_end + 1),
    };
    b.validate(n)?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulate_session, Scenario};

    #[test]
    fn oracle_boundaries_are_recovered() {
        for seed in 0..4 {
            let s = simulate_session(Scenario::Constrained, seed, 0.01).unwrap();
            let trial = GraspTrial::from_session("t", &s);
            let b = detect_phases(&trial).unwrap();
            let e = s.events;
            let close = |a: usize, b: usize| (a as f64 - b as f64).abs() * s.dt <= 0.1;
            assert!(close(b.grasp, e.contact), "{b:?} {e:?}");
            assert!(close(b.lift, e.lift));
            assert!(close(b.hold_start, e.hold_start));
            assert!(close(b.hold_end, e.hold_end));
            assert!(close(b.replace, e.release));
        }
    }

    #[test]
    fn all_zero_is_no_grasp() {
        let z = vec![ForceVector::ZERO; 400];
        let t = GraspTrial::new("z", "c", 0.01, [z.clone(), z.clone(), z.clone(), z]).unwrap();
        assert!(matches!(detect_phases(&t), Err(Error::NoGrasp)));
    }

    #[test]
    fn records_round_trip() {
        let s = simulate_session(Scenario::Unconstrained, 1, 0.01).unwrap();
        let recs = crate::synth::session_records(&s, "oracle");
        let t = GraspTrial::from_records("u", "unconstrained", &recs).unwrap();
        assert_eq!(t.forces, s.forces);
        assert!((t.dt - 0.01).abs() < 1e-9);
    }

    #[test]
    fn sustained_run() {
        let xs = [0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(first_sustained(&xs, 0, 3, |x| x > 0.5), Some(3));
        assert_eq!(first_sustained(&xs, 0, 4, |x| x > 0.5), None);
    }
}
