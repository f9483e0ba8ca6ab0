use serde::{Deserialize, Serialize};

use super::trial::{GraspTrial, HoldWindow};
use crate::error::{Error, Result};
use crate::force::{FingerId, ForceVector};

/// Root-mean-square difference per axis and over all components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsError {
    pub axes: [f64; 3],
    pub combined: f64,
}

pub fn rms_error(est: &[ForceVector], reference: &[ForceVector]) -> Result<RmsError> {
    if est.len() != reference.len() {
        return Err(Error::domain(format!(
            "series lengths differ: {} vs {}",
            est.len(),
            reference.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::domain("empty series"));
    }
    let mut ss = [0.0; 3];
    for (e, r) in est.iter().zip(reference) {
        let d = (*e - *r).to_array();
        for a in 0..3 {
            ss[a] += d[a] * d[a];
        }
    }
    let n = est.len() as f64;
    Ok(RmsError {
        axes: ss.map(|s| (s / n).sqrt()),
        combined: (ss.iter().sum::<f64>() / (3.0 * n)).sqrt(),
    })
}

/// A quantity split into the normal component and the shear magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisPair {
    pub normal: f64,
    pub shear: f64,
}

impl AxisPair {
    fn of(f: ForceVector) -> Self {
        AxisPair {
            normal: f.fz,
            shear: f.shear_magnitude(),
        }
    }
}

fn check_window(trial: &GraspTrial, w: HoldWindow) -> Result<()> {
    if w.is_empty() || w.end > trial.len() {
        return Err(Error::domain(format!(
            "hold window {}..{} invalid for {} samples",
            w.start,
            w.end,
            trial.len()
        )));
    }
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Sample variance with the `n - 1` denominator; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean normal force and mean shear magnitude of one finger over the window.
pub fn hold_mean(trial: &GraspTrial, finger: FingerId, w: HoldWindow) -> Result<AxisPair> {
    check_window(trial, w)?;
    let s = &trial.finger(finger)[w.start..w.end];
    Ok(AxisPair {
        normal: mean(s.iter().map(|f| f.fz)),
        shear: mean(s.iter().map(|f| f.shear_magnitude())),
    })
}

/// Relative difference between the summed finger force and the thumb force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumGap {
    /// Percent of the mean thumb normal force.
    pub normal_pct: f64,
    /// Percent of the mean thumb shear magnitude; absent when the thumb
    /// carries no shear.
    pub shear_pct: Option<f64>,
}

pub fn equilibrium_gap(trial: &GraspTrial, w: HoldWindow) -> Result<EquilibriumGap> {
    check_window(trial, w)?;
    let total = &trial.finger_total()[w.start..w.end];
    let thumb = &trial.finger(FingerId::Thumb)[w.start..w.end];
    let t = mean(thumb.iter().map(|f| f.fz));
    if t.abs() < 1e-6 {
        return Err(Error::UndefinedGap(t));
    }
    let s = mean(total.iter().map(|f| f.fz));
    let ts = mean(thumb.iter().map(|f| f.shear_magnitude()));
    let ss = mean(total.iter().map(|f| f.shear_magnitude()));
    Ok(EquilibriumGap {
        normal_pct: 100.0 * (s - t).abs() / t.abs(),
        shear_pct: (ts >= 1e-6).then(|| 100.0 * (ss - ts).abs() / ts),
    })
}

/// Percent of the summed finger force carried by index, middle and ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shares {
    pub normal: [f64; 3],
    pub shear: Option<[f64; 3]>,
}

fn shares_of(means: [f64; 3]) -> Option<[f64; 3]> {
    let total: f64 = means.iter().sum();
    (total.abs() > 1e-6).then(|| means.map(|m| 100.0 * m / total))
}

pub fn normalize_shares(trial: &GraspTrial, w: HoldWindow) -> Result<Shares> {
    let means = finger_means(trial, w)?;
    let normal = shares_of(means.map(|m| m.normal))
        .ok_or_else(|| Error::domain("total finger normal force is near zero"))?;
    Ok(Shares {
        normal,
        shear: shares_of(means.map(|m| m.shear)),
    })
}

fn finger_means(trial: &GraspTrial, w: HoldWindow) -> Result<[AxisPair; 3]> {
    let mut out = [AxisPair::default(); 3];
    for (o, f) in out.iter_mut().zip(FingerId::FINGERS) {
        *o = hold_mean(trial, f, w)?;
    }
    Ok(out)
}

/// Variance across the three per-finger hold means.
pub fn balance_variance(trial: &GraspTrial, w: HoldWindow) -> Result<AxisPair> {
    let m = finger_means(trial, w)?;
    Ok(AxisPair {
        normal: sample_variance(&m.map(|p| p.normal)),
        shear: sample_variance(&m.map(|p| p.shear)),
    })
}

/// Variance over time of each finger's force during the hold, indexed by
/// [`FingerId::index`].
pub fn steadiness_variance(trial: &GraspTrial, w: HoldWindow) -> Result<[AxisPair; 4]> {
    check_window(trial, w)?;
    if w.len() < 2 {
        return Err(Error::domain("hold window needs at least two samples"));
    }
    let mut out = [AxisPair::default(); 4];
    for f in FingerId::ALL {
        let s = &trial.finger(f)[w.start..w.end];
        let pairs: Vec<AxisPair> = s.iter().map(|v| AxisPair::of(*v)).collect();
        out[f.index()] = AxisPair {
            normal: sample_variance(&pairs.iter().map(|p| p.normal).collect::<Vec<_>>()),
            shear: sample_variance(&pairs.iter().map(|p| p.shear).collect::<Vec<_>>()),
        };
    }
    Ok(out)
}

/// Per-trial hold statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub id: String,
    pub condition: String,
    pub hold: HoldWindow,
    pub hold_s: f64,
    /// Indexed by [`FingerId::index`].
    pub hold_means: [AxisPair; 4],
    pub shares: Shares,
    pub balance: AxisPair,
    pub steadiness: [AxisPair; 4],
    pub equilibrium: EquilibriumGap,
    /// Per-finger RMS against the reference series, when present.
    pub rms: Option<[RmsError; 4]>,
}

pub fn trial_stats(trial: &GraspTrial) -> Result<TrialStats> {
    let w = trial.phases()?.hold();
    let mut hold_means = [AxisPair::default(); 4];
    for f in FingerId::ALL {
        hold_means[f.index()] = hold_mean(trial, f, w)?;
    }
    let rms = match &trial.reference {
        None => None,
        Some(r) => {
            let mut out = [RmsError { axes: [0.0; 3], combined: 0.0 }; 4];
            for f in FingerId::ALL {
                out[f.index()] = rms_error(trial.finger(f), &r[f.index()])?;
            }
            Some(out)
        }
    };
    Ok(TrialStats {
        id: trial.id.clone(),
        condition: trial.condition.clone(),
        hold: w,
        hold_s: w.len() as f64 * trial.dt,
        hold_means,
        shares: normalize_shares(trial, w)?,
        balance: balance_variance(trial, w)?,
        steadiness: steadiness_variance(trial, w)?,
        equilibrium: equilibrium_gap(trial, w)?,
        rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_trial(thumb: f64, fingers: [f64; 3], n: usize) -> GraspTrial {
        let mk = |z: f64| vec![ForceVector::new(0.0, 0.0, z); n];
        GraspTrial::new("t", "c", 0.01, [mk(thumb), mk(fingers[0]), mk(fingers[1]), mk(fingers[2])]).unwrap()
    }

    const ALL: HoldWindow = HoldWindow { start: 0, end: 10 };

    #[test]
    fn rms_examples() {
        let r = vec![ForceVector::new(1.0, 2.0, 3.0); 5];
        assert_eq!(rms_error(&r, &r).unwrap().combined, 0.0);
        let e: Vec<_> = r.iter().map(|f| *f + ForceVector::new(0.0, 1.0, 0.0)).collect();
        assert_eq!(rms_error(&e, &r).unwrap().axes, [0.0, 1.0, 0.0]);
        assert!(rms_error(&e[..4], &r).is_err());
    }

    #[test]
    fn gap_examples() {
        let t = constant_trial(10.0, [3.0, 3.0, 4.0], 10);
        assert_eq!(equilibrium_gap(&t, ALL).unwrap().normal_pct, 0.0);
        let t = constant_trial(10.0, [3.0, 3.0, 3.5], 10);
        assert!((equilibrium_gap(&t, ALL).unwrap().normal_pct - 5.0).abs() < 1e-12);
        let t = constant_trial(0.0, [3.0, 3.0, 3.5], 10);
        assert!(matches!(equilibrium_gap(&t, ALL), Err(Error::UndefinedGap(_))));
    }

    #[test]
    fn share_examples() {
        let t = constant_trial(10.0, [4.5, 3.5, 2.0], 10);
        let s = normalize_shares(&t, ALL).unwrap().normal;
        for (a, b) in s.iter().zip([45.0, 35.0, 20.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = constant_trial(9.0, [3.0, 3.0, 3.0], 10);
        let s = normalize_shares(&t, ALL).unwrap().normal;
        assert!(s.iter().all(|v| (v - 100.0 / 3.0).abs() < 1e-12));
        let z = constant_trial(0.0, [0.0; 3], 10);
        assert!(normalize_shares(&z, ALL).is_err());
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_variance(&constant_trial(15.0, [5.0; 3], 10), ALL).unwrap().normal, 0.0);
        let b = balance_variance(&constant_trial(15.0, [6.0, 6.0, 3.0], 10), ALL).unwrap();
        assert!((b.normal - 3.0).abs() < 1e-12);
    }

    #[test]
    fn steadiness_examples() {
        let s = steadiness_variance(&constant_trial(1.0, [1.0; 3], 10), ALL).unwrap();
        assert!(s.iter().all(|p| p.normal == 0.0 && p.shear == 0.0));
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
    }
}
