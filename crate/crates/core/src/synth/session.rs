//! Simulated grasp sessions: reach, grasp, lift, a 10 s hold and replace.
//!
//! The thumb opposes the three fingers, so every thumb component is built as
//! the sum of the finger components. Finger shares of the grip and of the
//! object load follow a per-scenario profile with band-limited jitter that
//! is renormalized, which keeps the sum exact at every sample.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nail::{add_noise, noise_rng, NailForwardModel, BACKGROUND};
use crate::error::{Error, Result};
use crate::force::{FingerId, ForceVector, Phase};
use crate::imaging::Image;
use crate::registration::LandmarkShape;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Constrained,
    Unconstrained,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Constrained => "constrained",
            Scenario::Unconstrained => "unconstrained",
        }
    }

    pub fn default_profile(self) -> ScenarioProfile {
        match self {
            Scenario::Constrained => ScenarioProfile {
                shares: [0.45, 0.35, 0.20],
                share_jitter: 0.10,
                total_jitter: 0.025,
                jitter_tau: 0.05,
                trial_spread: 0.01,
            },
            Scenario::Unconstrained => ScenarioProfile {
                shares: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                share_jitter: 0.03,
                total_jitter: 0.008,
                jitter_tau: 0.05,
                trial_spread: 0.01,
            },
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constrained" => Ok(Scenario::Constrained),
            "unconstrained" => Ok(Scenario::Unconstrained),
            other => Err(Error::domain(format!("unknown scenario {other:?}"))),
        }
    }
}

/// How the grip and the load are split over index, middle and ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProfile {
    /// Mean fraction carried by index, middle and ring (sums to 1).
    pub shares: [f64; 3],
    /// Relative std of each finger's share over time.
    pub share_jitter: f64,
    /// Relative std of the overall grip over time during the hold.
    pub total_jitter: f64,
    /// Correlation time of the jitter processes, seconds.
    pub jitter_tau: f64,
    /// Relative std of the per-trial grip level and shares.
    pub trial_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub object_mass_kg: f64,
    pub hold_duration_s: f64,
    /// Thumb normal force during the hold, newtons.
    pub grip_n: f64,
    /// Thumb normal force while resting fingers on the object before lifting.
    pub preload_n: f64,
    /// Angle between the load direction and the nail y axis, degrees.
    pub load_angle_deg: f64,
    pub frame_rate_hz: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            object_mass_kg: 1.14,
            hold_duration_s: 10.0,
            grip_n: 10.0,
            preload_n: 3.0,
            load_angle_deg: 20.0,
            frame_rate_hz: 20.0,
        }
    }
}

/// Ground-truth phase boundaries as sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEvents {
    /// First sample of the grasp phase (fingers touch the object).
    pub contact: usize,
    /// First sample of the lift phase.
    pub lift: usize,
    pub hold_start: usize,
    /// First sample after the hold; the replace phase starts here.
    pub hold_end: usize,
    /// First sample after contact is released.
    pub release: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspSession {
    pub scenario: Scenario,
    pub seed: u64,
    pub dt: f64,
    /// Object weight, newtons.
    pub object_weight: f64,
    /// Per-finger force series indexed by [`FingerId::index`].
    pub forces: [Vec<ForceVector>; 4],
    pub phases: Vec<Phase>,
    pub events: PhaseEvents,
    pub frame_rate_hz: f64,
}

impl GraspSession {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn time(&self, sample: usize) -> f64 {
        sample as f64 * self.dt
    }

    pub fn finger(&self, finger: FingerId) -> &[ForceVector] {
        &self.forces[finger.index()]
    }

    pub fn frame_count(&self) -> usize {
        (self.duration() * self.frame_rate_hz).floor() as usize
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate_hz
    }

    /// Force sample shown in `frame`.
    pub fn frame_sample(&self, frame: usize) -> usize {
        ((self.frame_time(frame) / self.dt).round() as usize).min(self.len() - 1)
    }

    pub fn hold_duration(&self) -> f64 {
        (self.events.hold_end - self.events.hold_start) as f64 * self.dt
    }
}

pub fn simulate_session(scenario: Scenario, seed: u64, dt: f64) -> Result<GraspSession> {
    simulate_session_with(
        scenario,
        &scenario.default_profile(),
        &SessionConfig::default(),
        seed,
        dt,
    )
}

/// Unit-variance AR(1) process clipped at three standard deviations.
struct Jitter {
    a: f64,
    b: f64,
    state: f64,
}

impl Jitter {
    fn new(dt: f64, tau: f64, rng: &mut impl Rng) -> Self {
        let a = if tau > 0.0 { (-dt / tau).exp() } else { 0.0 };
        let state: f64 = StandardNormal.sample(rng);
        Jitter {
            a,
            b: (1.0 - a * a).sqrt(),
            state,
        }
    }

    fn next(&mut self, rng: &mut impl Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.a * self.state + self.b * z;
        self.state.clamp(-3.0, 3.0)
    }
}

fn ramp(t: f64, t0: f64, t1: f64, v0: f64, v1: f64) -> f64 {
    v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
}

pub fn simulate_session_with(
    scenario: Scenario,
    profile: &ScenarioProfile,
    cfg: &SessionConfig,
    seed: u64,
    dt: f64,
) -> Result<GraspSession> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(Error::domain(format!("sample period {dt} outside (0, 0.1]")));
    }
    let share_sum: f64 = profile.shares.iter().sum();
    if (share_sum - 1.0).abs() > 1e-9 || profile.shares.iter().any(|s| *s <= 0.0) {
        return Err(Error::domain("finger shares must be positive and sum to 1"));
    }

    let mut rng = noise_rng(seed, 0);
    let t_contact = 5.0 + rng.random_range(-0.3..0.3);
    let spread = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        1.0 + profile.trial_spread * z.clamp(-3.0, 3.0)
    };
    let grip = cfg.grip_n * spread(&mut rng);
    let mut base = [0.0; 3];
    for (b, s) in base.iter_mut().zip(profile.shares) {
        *b = s * spread(&mut rng);
    }
    let base_sum: f64 = base.iter().sum();
    for b in &mut base {
        *b /= base_sum;
    }
    let total_duration = rng.random_range(46.0..54.0);

    let weight = cfg.object_mass_kg * GRAVITY;
    let half_load = weight / 2.0;
    let angle = cfg.load_angle_deg.to_radians();
    let peak_grip = 1.3 * grip;
    let lowered_grip = 0.75 * grip;

    let n = (total_duration / dt).round() as usize;
    let contact = (t_contact / dt).ceil() as usize;
    let t_contact = contact as f64 * dt;
    let lift = ((t_contact + 3.0) / dt).round() as usize;
    let t_lift = lift as f64 * dt;
    let hold_start = ((t_lift + 2.0) / dt).round() as usize;
    let hold_end = hold_start + (cfg.hold_duration_s / dt).round() as usize;
    let t_hold = hold_start as f64 * dt;
    let t_replace = hold_end as f64 * dt;
    let t_place = t_replace + 2.0;
    let t_release = t_place + 0.6;
    let release = (t_release / dt).ceil() as usize;
    if release + 1 >= n {
        return Err(Error::domain("session too short for the grasp protocol"));
    }

    let grip_at = |i: usize, t: f64| -> f64 {
        if i < contact {
            0.0
        } else if t < t_contact + 0.3 {
            ramp(t, t_contact, t_contact + 0.3, 0.0, cfg.preload_n)
        } else if i < lift {
            cfg.preload_n
        } else if t < t_lift + 0.8 {
            ramp(t, t_lift, t_lift + 0.8, cfg.preload_n, peak_grip)
        } else if i < hold_start {
            if t < t_hold - 0.05 {
                peak_grip
            } else {
                ramp(t, t_hold - 0.05, t_hold, peak_grip, grip)
            }
        } else if i < hold_end {
            grip
        } else if t < t_replace + 0.05 {
            ramp(t, t_replace, t_replace + 0.05, grip, lowered_grip)
        } else if t < t_place {
            lowered_grip
        } else if i < release {
            ramp(t, t_place, t_release, lowered_grip, 0.0).max(0.0)
        } else {
            0.0
        }
    };
    let load_at = |i: usize, t: f64| -> f64 {
        if i < lift || i >= release {
            0.0
        } else if t < t_lift + 0.8 {
            ramp(t, t_lift, t_lift + 0.8, 0.0, half_load)
        } else if t < t_lift + 1.3 {
            let phase = 2.0 * std::f64::consts::PI * (t - t_lift - 0.8) / 0.5;
            half_load * (1.0 + 0.1 * phase.sin())
        } else if t < t_place {
            half_load
        } else if t < t_place + 0.5 {
            ramp(t, t_place, t_place + 0.5, half_load, 0.0)
        } else {
            0.0
        }
    };

    let mut total_jitter = Jitter::new(dt, profile.jitter_tau, &mut rng);
    let mut normal_jitter: Vec<Jitter> = (0..3)
        .map(|_| Jitter::new(dt, profile.jitter_tau, &mut rng))
        .collect();
    let mut shear_jitter: Vec<Jitter> = (0..3)
        .map(|_| Jitter::new(dt, profile.jitter_tau, &mut rng))
        .collect();

    let mut forces: [Vec<ForceVector>; 4] = Default::default();
    for f in &mut forces {
        f.reserve(n);
    }
    let mut phases = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let tj = total_jitter.next(&mut rng);
        let nj: Vec<f64> = normal_jitter.iter_mut().map(|j| j.next(&mut rng)).collect();
        let sj: Vec<f64> = shear_jitter.iter_mut().map(|j| j.next(&mut rng)).collect();

        let mut g = grip_at(i, t);
        if (hold_start..hold_end).contains(&i) {
            g *= 1.0 + profile.total_jitter * tj;
        }
        let load = load_at(i, t);
        let normal_shares = jittered_shares(&base, &nj, profile.share_jitter);
        let shear_shares = jittered_shares(&base, &sj, profile.share_jitter);

        let mut fingers = [ForceVector::ZERO; 3];
        for k in 0..3 {
            let l = load * shear_shares[k];
            fingers[k] = ForceVector::new(l * angle.sin(), l * angle.cos(), g * normal_shares[k]);
        }
        let thumb = ForceVector::new(
            fingers[0].fx + fingers[1].fx + fingers[2].fx,
            fingers[0].fy + fingers[1].fy + fingers[2].fy,
            fingers[0].fz + fingers[1].fz + fingers[2].fz,
        );
        forces[FingerId::Thumb.index()].push(thumb);
        for (k, finger) in FingerId::FINGERS.iter().enumerate() {
            forces[finger.index()].push(fingers[k]);
        }

        phases.push(if i < contact {
            Phase::PreContact
        } else if i < lift {
            Phase::Grasp
        } else if i < hold_start {
            Phase::Lift
        } else if i < hold_end {
            Phase::Hold
        } else {
            Phase::Replace
        });
    }

    Ok(GraspSession {
        scenario,
        seed,
        dt,
        object_weight: weight,
        forces,
        phases,
        events: PhaseEvents {
            contact,
            lift,
            hold_start,
            hold_end,
            release,
        },
        frame_rate_hz: cfg.frame_rate_hz,
    })
}

fn jittered_shares(base: &[f64; 3], jitter: &[f64], sigma: f64) -> [f64; 3] {
    let mut s = [0.0; 3];
    for k in 0..3 {
        s[k] = base[k] * (1.0 + sigma * jitter[k]);
    }
    let sum: f64 = s.iter().sum();
    for v in &mut s {
        *v /= sum;
    }
    s
}

/// Renders per-finger nail frames of a session: the forward model's nail
/// pasted at a drifting integer offset into a larger canvas.
#[derive(Debug, Clone)]
pub struct FrameRenderer {
    pub model: NailForwardModel,
    /// Border around the template, pixels.
    pub margin: usize,
}

/// One rendered frame with its ground truth.
#[derive(Debug, Clone)]
pub struct SessionFrame {
    pub frame: usize,
    pub time: f64,
    pub finger: FingerId,
    pub image: Image,
    pub force: ForceVector,
    pub landmarks: LandmarkShape,
}

impl FrameRenderer {
    pub fn new(model: NailForwardModel) -> Self {
        FrameRenderer { model, margin: 16 }
    }

    pub fn canvas_dims(&self) -> (usize, usize) {
        let (h, w) = self.model.dims();
        (h + 2 * self.margin, w + 2 * self.margin)
    }

    /// Integer drift of the nail inside the canvas at time `t`.
    pub fn drift(&self, finger: FingerId, t: f64) -> (i64, i64) {
        use std::f64::consts::TAU;
        let k = finger.index() as f64;
        let limit = self.margin as f64 / 4.0;
        let dr = (limit.min(3.0) * (TAU * t / 6.3 + 1.7 * k).sin()).round() as i64;
        let dc = (limit.min(2.0) * (TAU * t / 4.1 + 0.9 * k).sin()).round() as i64;
        (dr, dc)
    }

    pub fn render(&self, session: &GraspSession, finger: FingerId, frame: usize) -> SessionFrame {
        let sample = session.frame_sample(frame);
        let force = session.finger(finger)[sample];
        let time = session.frame_time(frame);
        let (dr, dc) = self.drift(finger, time);
        let (h, w) = self.model.dims();
        let (ch, cw) = self.canvas_dims();
        let top = self.margin as i64 + dr;
        let left = self.margin as i64 + dc;

        let nail = self.model.expected_intensities(force);
        let mut canvas = vec![BACKGROUND; ch * cw];
        for r in 0..h {
            for c in 0..w {
                let cr = (top + r as i64) as usize;
                let cc = (left + c as i64) as usize;
                canvas[cr * cw + cc] = nail[r * w + c];
            }
        }
        let stream = frame as u64 * 4 + finger.index() as u64;
        add_noise(
            &mut canvas,
            self.model.noise_sigma,
            self.model.seed ^ session.seed.rotate_left(17),
            stream,
        );
        let image = Image::gray_from_clamped(ch, cw, canvas).expect("canvas size");
        let landmarks = self
            .model
            .geometry()
            .landmarks()
            .translated(left as f64, top as f64);
        SessionFrame {
            frame,
            time,
            finger,
            image,
            force,
            landmarks,
        }
    }

    /// All frames of a session in (frame, finger) order.
    pub fn frames<'a>(&'a self, session: &'a GraspSession) -> impl Iterator<Item = SessionFrame> + 'a {
        (0..session.frame_count())
            .flat_map(move |k| FingerId::ALL.into_iter().map(move |f| self.render(session, f, k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_equilibrium_is_exact() {
        for scenario in [Scenario::Constrained, Scenario::Unconstrained] {
            let s = simulate_session(scenario, 3, 0.01).unwrap();
            for i in s.events.hold_start..s.events.hold_end {
                let th = s.finger(FingerId::Thumb)[i];
                let [a, b, c] = [FingerId::Index, FingerId::Middle, FingerId::Ring].map(|f| s.finger(f)[i]);
                assert_eq!(th.fz, a.fz + b.fz + c.fz);
                assert_eq!(th.fx, a.fx + b.fx + c.fx);
                assert_eq!(th.fy, a.fy + b.fy + c.fy);
            }
        }
    }

    #[test]
    fn hold_lasts_ten_seconds_and_session_length_is_protocol_like() {
        for seed in 0..10 {
            for dt in [0.01, 0.02, 0.05] {
                let s = simulate_session(Scenario::Constrained, seed, dt).unwrap();
                assert!((s.hold_duration() - 10.0).abs() <= dt);
                assert!((45.0..=55.0).contains(&s.duration()), "{}", s.duration());
                assert!(s.phases[s.events.hold_start] == Phase::Hold);
                assert!(s.phases[s.events.hold_end] == Phase::Replace);
            }
        }
    }

    #[test]
    fn normals_non_negative_and_deterministic() {
        let a = simulate_session(Scenario::Unconstrained, 11, 0.01).unwrap();
        let b = simulate_session(Scenario::Unconstrained, 11, 0.01).unwrap();
        assert_eq!(a, b);
        assert!(a.forces.iter().flatten().all(|f| f.fz >= 0.0 && f.is_finite()));
        let c = simulate_session(Scenario::Unconstrained, 12, 0.01).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_inputs() {
        assert!(simulate_session(Scenario::Constrained, 0, 0.0).is_err());
        assert!(simulate_session(Scenario::Constrained, 0, 0.2).is_err());
        assert!("sideways".parse::<Scenario>().is_err());
        assert_eq!("constrained".parse::<Scenario>().unwrap(), Scenario::Constrained);
    }

    #[test]
    fn hold_forces_stay_inside_calibration_range() {
        let s = simulate_session(Scenario::Constrained, 5, 0.01).unwrap();
        for f in s.forces.iter().flatten() {
            assert!(f.fz <= 18.0 && f.fx.abs() <= 3.0 && f.fy.abs() <= 6.0, "{f:?}");
        }
    }

    #[test]
    fn frames_paste_the_nail_at_integer_offsets() {
        let model = NailForwardModel::standard(64, 32, 0.0, 0);
        let s = simulate_session(Scenario::Constrained, 1, 0.01).unwrap();
        let r = FrameRenderer::new(model.clone());
        let k = s.frame_count() / 3;
        let fr = r.render(&s, FingerId::Middle, k);
        let (left, top) = fr.landmarks.points()[16];
        let (cx, cy) = model.geometry().center();
        let (ox, oy) = ((left - cx) as i64, (top - cy) as i64);
        let nail = model.render(fr.force, 0);
        for row in 0..64 {
            for col in 0..32 {
                let v = fr.image.get((oy + row as i64) as usize, (ox + col as i64) as usize, 0);
                assert_eq!(v, nail.get(row, col, 0));
            }
        }
    }
}
