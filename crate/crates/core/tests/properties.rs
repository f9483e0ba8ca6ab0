use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use nailforce::analysis::{
    balance_variance, equilibrium_gap, mann_whitney_u, normalize_shares, rms_error, sample_variance, GraspTrial,
    HoldWindow, UTestMode,
};
use nailforce::eigennail::{decode_f32, encode_f32};
use nailforce::force::ForceVector;
use nailforce::imaging::{decode_pnm, encode_pnm, hsv_to_rgb, rgb_to_hsv, BitDepth, Image, Rgb};
use nailforce::pca;
use nailforce::registration::{piecewise_warp, Triangulation};
use nailforce::servo::{control_law, interaction_matrix, rodrigues, FeatureError, FeatureSet};
use nailforce::synth::NailForwardModel;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn trial_from(levels: &[[f64; 4]]) -> GraspTrial {
    let forces = std::array::from_fn(|f| {
        levels
            .iter()
            .map(|l| ForceVector::new(0.1 * l[f], -0.05 * l[f], l[f]))
            .collect()
    });
    GraspTrial::new("p", "c", 0.01, forces).unwrap()
}

fn levels() -> impl Strategy<Value = Vec<[f64; 4]>> {
    prop::collection::vec(prop::array::uniform4(0.1f64..20.0), 2..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shares_sum_to_one_hundred(l in levels()) {
        let t = trial_from(&l);
        let s = normalize_shares(&t, HoldWindow { start: 0, end: t.len() }).unwrap();
        prop_assert!((s.normal.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        prop_assert!(s.normal.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn variance_ignores_shifts_and_scales_quadratically(
        xs in prop::collection::vec(-50.0f64..50.0, 2..60),
        shift in -100.0f64..100.0,
        scale in 0.01f64..10.0,
    ) {
        let v = sample_variance(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
        prop_assert!(v >= 0.0);
        prop_assert!((sample_variance(&shifted) - v).abs() <= 1e-9 * (1.0 + v + shift * shift));
        prop_assert!((sample_variance(&scaled) - scale * scale * v).abs() <= 1e-9 * (1.0 + scale * scale * v));
    }

    #[test]
    fn equilibrium_gap_is_scale_invariant(l in levels(), c in 0.1f64..10.0) {
        let t = trial_from(&l);
        let scaled: Vec<[f64; 4]> = l.iter().map(|r| r.map(|v| v * c)).collect();
        let ts = trial_from(&scaled);
        let w = HoldWindow { start: 0, end: t.len() };
        let (a, b) = (equilibrium_gap(&t, w).unwrap(), equilibrium_gap(&ts, w).unwrap());
        prop_assert!((a.normal_pct - b.normal_pct).abs() <= 1e-9 * (1.0 + a.normal_pct.abs()));
    }

    #[test]
    fn balance_of_equal_fingers_is_zero(xs in prop::collection::vec(0.5f64..10.0, 2..30)) {
        let l: Vec<[f64; 4]> = xs.iter().map(|x| [2.0 * x, *x, *x, *x]).collect();
        let t = trial_from(&l);
        let b = balance_variance(&t, HoldWindow { start: 0, end: t.len() }).unwrap();
        prop_assert!(b.normal.abs() < 1e-20 && b.shear.abs() < 1e-20);
    }

    #[test]
    fn rms_is_zero_on_identity_and_bounded_by_axes(
        a in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..30),
        d in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let est: Vec<_> = a.iter().map(|v| ForceVector::from_array(*v)).collect();
        prop_assert_eq!(rms_error(&est, &est).unwrap().combined, 0.0);
        let shifted: Vec<_> = est.iter().map(|f| *f + ForceVector::from_array(d)).collect();
        let r = rms_error(&shifted, &est).unwrap();
        let lo = r.axes.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.axes.iter().cloned().fold(0.0, f64::max);
        prop_assert!(r.combined >= lo - 1e-12 && r.combined <= hi + 1e-12);
    }

    #[test]
    fn exact_p_is_a_count_over_all_partitions(
        xs in prop::collection::vec(0u8..12, 1..8),
        ys in prop::collection::vec(0u8..12, 1..8),
    ) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
        let t = mann_whitney_u(&xs, &ys, UTestMode::Exact).unwrap();
        let total = binomial((xs.len() + ys.len()) as u64, xs.len() as u64);
        prop_assert!(t.p > 0.0 && t.p <= 1.0);
        let count = t.p * total;
        prop_assert!((count - count.round()).abs() < 1e-6, "p * C = {}", count);
        let swapped = mann_whitney_u(&ys, &xs, UTestMode::Exact).unwrap();
        prop_assert_eq!(swapped.p.to_bits(), t.p.to_bits());
        prop_assert!((t.u1 + swapped.u1 - (xs.len() * ys.len()) as f64).abs() < 1e-9);
    }

    #[test]
    fn normal_approximation_p_is_a_probability(
        xs in prop::collection::vec(-3.0f64..3.0, 1..40),
        ys in prop::collection::vec(-3.0f64..3.0, 1..40),
    ) {
        let t = mann_whitney_u(&xs, &ys, UTestMode::NormalApprox).unwrap();
        prop_assert!((0.0..=1.0).contains(&t.p));
        prop_assert!(t.u <= (xs.len() * ys.len()) as f64 / 2.0 + 1e-9);
    }

    #[test]
    fn pca_round_trips_its_training_span(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 4..12),
    ) {
        // Lift 3-D samples into 8-D so the data span is at most 3 dimensions.
        let lift = |v: &[f64]| vec![v[0], v[1], v[2], v[0] + v[1], v[1] - v[2], 2.0 * v[0], 0.0, v[2]];
        let samples: Vec<Vec<f64>> = rows.iter().map(|r| lift(r)).collect();
        let p = pca::fit(&samples, 1.0).unwrap();
        prop_assert!(p.retained() <= 3);
        let mut mean = vec![0.0; 8];
        for s in &samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / samples.len() as f64;
            }
        }
        prop_assert!(p.project(&mean).iter().all(|w| w.abs() < 1e-9));
        for s in &samples {
            let back = p.reconstruct(&p.project(s));
            prop_assert!(back.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-8));
        }
        let eig = p.retained_eigenvalues();
        prop_assert!(eig.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rodrigues_gives_rotations(w in prop::array::uniform3(-3.0f64..3.0), t in 0.0f64..2.0) {
        let r = rodrigues(&Vector3::from(w), t);
        prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        let axis = Vector3::from(w);
        prop_assert!((r * axis - axis).norm() < 1e-9 * (1.0 + axis.norm()));
    }

    #[test]
    fn control_law_vanishes_at_goal_and_is_linear(
        pts in prop::array::uniform4((-0.3f64..0.3, -0.3f64..0.3)),
        depths in prop::array::uniform4(0.2f64..2.0),
        e in prop::array::uniform8(-0.05f64..0.05),
        lambda in 0.1f64..5.0,
    ) {
        let f = FeatureSet { points: pts, depths };
        let l = interaction_matrix(&f).unwrap();
        let Ok(zero) = control_law(&l, &FeatureError::zeros(), lambda) else { return Ok(()) };
        prop_assert!(zero.norm() == 0.0);
        let e = FeatureError::from(e);
        let v1 = control_law(&l, &e, lambda).unwrap();
        let v2 = control_law(&l, &(2.0 * e), lambda).unwrap();
        prop_assert!((v2 - 2.0 * v1).norm() <= 1e-9 * (1.0 + v1.norm()));
    }

    #[test]
    fn hsv_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let p = Rgb { r, g, b };
        let hsv = rgb_to_hsv(p).unwrap();
        prop_assert!((0.0..1.0).contains(&hsv.h) && (0.0..=1.0).contains(&hsv.s) && (0.0..=1.0).contains(&hsv.v));
        let q = hsv_to_rgb(hsv);
        prop_assert!((q.r - r).abs() < 1e-12 && (q.g - g).abs() < 1e-12 && (q.b - b).abs() < 1e-12);
    }

    #[test]
    fn pnm_quantization_error_is_half_a_level(
        values in prop::collection::vec(0.0f64..=1.0, 12),
        sixteen in any::<bool>(),
    ) {
        let img = Image::new(3, 4, 1, values).unwrap();
        let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
        let max = if sixteen { 65535.0 } else { 255.0 };
        let back = decode_pnm(&encode_pnm(&img, depth)).unwrap();
        prop_assert_eq!(back.dims(), img.dims());
        for (a, b) in back.pixels().iter().zip(img.pixels()) {
            prop_assert!((a - b).abs() <= 0.5 / max + 1e-12);
        }
    }

    #[test]
    fn f32_payload_round_trips(values in prop::collection::vec(-1e3f64..1e3, 0..50)) {
        let back = decode_f32(&encode_f32(&values), values.len()).unwrap();
        for (a, b) in back.iter().zip(&values) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }
}

#[test]
fn identity_warp_reproduces_the_template() {
    let nail = NailForwardModel::standard(64, 32, 0.0, 3);
    let lm = nail.geometry().landmarks();
    let tri = Triangulation::new(lm.clone(), 64, 32).unwrap();
    let img = nail.render(ForceVector::new(1.0, 2.0, 9.0), 0);
    let out = piecewise_warp(&img, &lm, &tri).unwrap();
    for s in tri.samples() {
        assert!((out.pixels()[s.index] - img.pixels()[s.index]).abs() < 1e-12);
    }
}
