//! Whole camera frames for the segmentation stage: skin-colored fingers on a
//! cool background, stacked top to bottom as index, middle and ring.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::nail::noise_rng;
use crate::force::FingerId;
use crate::imaging::{hsv_to_rgb, Hsv, Image, Rgb};

#[derive(Debug, Clone)]
pub struct CameraFrameRenderer {
    pub height: usize,
    pub width: usize,
    pub skin: Hsv,
    pub nail: Hsv,
    pub background: Hsv,
    /// Per-channel Gaussian noise.
    pub noise_sigma: f64,
    /// Finger ellipse semi-axes (rows, cols).
    pub finger_semi_axes: (f64, f64),
    /// Thumb ellipse semi-axes (rows, cols).
    pub thumb_semi_axes: (f64, f64),
}

impl Default for CameraFrameRenderer {
    fn default() -> Self {
        CameraFrameRenderer {
            height: 1024,
            width: 680,
            skin: Hsv { h: 0.06, s: 0.45, v: 0.75 },
            nail: Hsv { h: 0.05, s: 0.30, v: 0.88 },
            background: Hsv { h: 0.60, s: 0.20, v: 0.35 },
            noise_sigma: 0.02,
            finger_semi_axes: (95.0, 240.0),
            thumb_semi_axes: (130.0, 260.0),
        }
    }
}

/// A rendered frame and the true center (row, col) of each finger in it.
#[derive(Debug, Clone)]
pub struct CameraFrame {
    pub image: Image,
    pub centers: Vec<(FingerId, (f64, f64))>,
}

struct Ellipse {
    center: (f64, f64),
    semi: (f64, f64),
}

impl Ellipse {
    fn contains(&self, r: f64, c: f64) -> bool {
        let dr = (r - self.center.0) / self.semi.0;
        let dc = (c - self.center.1) / self.semi.1;
        dr * dr + dc * dc <= 1.0
    }

    /// Nail sits at the distal (left) end of the finger.
    fn in_nail(&self, r: f64, c: f64) -> bool {
        let nail = Ellipse {
            center: (self.center.0, self.center.1 - 0.62 * self.semi.1),
            semi: (0.55 * self.semi.0, 0.25 * self.semi.1),
        };
        nail.contains(r, c)
    }
}

impl CameraFrameRenderer {
    /// Finger-side frame `frame` of a recording keyed by `seed`.
    pub fn finger_frame(&self, seed: u64, frame: u64) -> CameraFrame {
        let mut rng = noise_rng(seed ^ 0x5eed_f1f0, frame * 2);
        let h = self.height as f64;
        let ellipses: Vec<(FingerId, Ellipse)> = FingerId::FINGERS
            .iter()
            .enumerate()
            .map(|(k, &id)| {
                let row = h * (0.2 + 0.3 * k as f64) + rng.random_range(-25.0..25.0);
                let col = self.width as f64 / 2.0 + rng.random_range(-30.0..30.0);
                (
                    id,
                    Ellipse {
                        center: (row, col),
                        semi: self.finger_semi_axes,
                    },
                )
            })
            .collect();
        self.paint(ellipses, seed, frame * 2)
    }

    pub fn thumb_frame(&self, seed: u64, frame: u64) -> CameraFrame {
        let mut rng = noise_rng(seed ^ 0x7407_b000, frame * 2 + 1);
        let row = self.height as f64 / 2.0 + rng.random_range(-40.0..40.0);
        let col = self.width as f64 / 2.0 + rng.random_range(-30.0..30.0);
        let e = Ellipse {
            center: (row, col),
            semi: self.thumb_semi_axes,
        };
        self.paint(vec![(FingerId::Thumb, e)], seed, frame * 2 + 1)
    }

    fn paint(&self, ellipses: Vec<(FingerId, Ellipse)>, seed: u64, stream: u64) -> CameraFrame {
        let skin = hsv_to_rgb(self.skin);
        let nail = hsv_to_rgb(self.nail);
        let bg = hsv_to_rgb(self.background);
        let mut rng = noise_rng(seed ^ 0xca3e_7a00, stream);
        let mut pixels = Vec::with_capacity(self.height * self.width * 3);
        for r in 0..self.height {
            for c in 0..self.width {
                let (rf, cf) = (r as f64, c as f64);
                let mut color: Rgb = bg;
                for (_, e) in &ellipses {
                    if e.contains(rf, cf) {
                        color = if e.in_nail(rf, cf) { nail } else { skin };
                        break;
                    }
                }
                for v in [color.r, color.g, color.b] {
                    let z: f64 = if self.noise_sigma > 0.0 {
                        StandardNormal.sample(&mut rng)
                    } else {
                        0.0
                    };
                    pixels.push((v + self.noise_sigma * z).clamp(0.0, 1.0));
                }
            }
        }
        CameraFrame {
            image: Image::new(self.height, self.width, 3, pixels).expect("sized buffer"),
            centers: ellipses.into_iter().map(|(id, e)| (id, e.center)).collect(),
        }
    }
}
