//! Ground-truth forward model mapping a fingertip force to a nail image.
//!
//! A rendered nail is `clamp01(mean + sum_a gain_a * f_a * B_a + noise)` with
//! three orthonormal response patterns `B_a`: a distal-weighted dome for the
//! normal force, a left/right lobe pair for shear-x and a proximal/distal
//! dipole for shear-y. The patterns live inside the nail, away from the nail
//! rim, so the rim stays a pose cue that force changes do not imitate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::force::ForceVector;
use crate::imaging::Image;
use crate::pca::{dot, orthonormalize};
use crate::registration::LandmarkShape;

/// Intensity of the skin surrounding the nail and of empty canvas.
pub const BACKGROUND: f64 = 0.12;
/// Nail intensity at zero force.
pub const NAIL_LEVEL: f64 = 0.33;
/// Peak intensity excursion per axis (x, y, z) at the calibration range limits.
pub const PEAK_EXCURSION: [f64; 3] = [0.13, 0.13, 0.32];
/// Largest force magnitude per axis (x, y, z) in the calibration range.
pub const FORCE_LIMITS: [f64; 3] = [3.0, 6.0, 18.0];

/// Default template size used throughout the pipeline.
pub const TEMPLATE_HEIGHT: usize = 64;
pub const TEMPLATE_WIDTH: usize = 32;

/// Normalized elliptical coordinates of the nail template.
#[derive(Debug, Clone, Copy)]
pub struct NailGeometry {
    pub height: usize,
    pub width: usize,
}

impl NailGeometry {
    pub fn new(height: usize, width: usize) -> Self {
        NailGeometry { height, width }
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// `(u, v)` in `(-1, 1)` across the template for the point `(x, y)`.
    pub fn normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.center();
        (
            (x - cx) / (self.width as f64 / 2.0),
            (y - cy) / (self.height as f64 / 2.0),
        )
    }

    pub fn to_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        let (cx, cy) = self.center();
        (
            cx + u * self.width as f64 / 2.0,
            cy + v * self.height as f64 / 2.0,
        )
    }

    /// Twelve rim points, four inner points and the center.
    pub fn landmarks(&self) -> LandmarkShape {
        let mut pts = Vec::with_capacity(17);
        for i in 0..12 {
            let a = i as f64 * std::f64::consts::PI / 6.0;
            pts.push(self.to_pixel(0.96 * a.cos(), 0.96 * a.sin()));
        }
        for i in 0..4 {
            let a = std::f64::consts::FRAC_PI_4 + i as f64 * std::f64::consts::FRAC_PI_2;
            pts.push(self.to_pixel(0.5 * a.cos(), 0.5 * a.sin()));
        }
        pts.push(self.center());
        LandmarkShape::new(pts)
    }
}

fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NailForwardModel {
    pub mean_image: Image,
    /// Response patterns for shear-x, shear-y and normal force (unit norm).
    pub basis: [Vec<f64>; 3],
    /// Intensity per newton per axis (x, y, z).
    pub gain: [f64; 3],
    pub noise_sigma: f64,
    pub seed: u64,
}

impl NailForwardModel {
    pub fn new(
        mean_image: Image,
        basis: [Vec<f64>; 3],
        gain: [f64; 3],
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if mean_image.channels() != 1 {
            return Err(Error::domain("forward model mean image must be grayscale"));
        }
        let n = mean_image.height() * mean_image.width();
        for (i, a) in basis.iter().enumerate() {
            if a.len() != n {
                return Err(Error::domain(format!("basis image {i} has wrong size")));
            }
            for (j, b) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(a, b) - want).abs() > 1e-9 {
                    return Err(Error::domain("basis images must be orthonormal"));
                }
            }
        }
        if !(noise_sigma >= 0.0) || gain.iter().any(|g| !g.is_finite()) {
            return Err(Error::domain("noise sigma and gains must be finite and non-negative"));
        }
        Ok(NailForwardModel {
            mean_image,
            basis,
            gain,
            noise_sigma,
            seed,
        })
    }

    /// The standard synthetic nail at the given template size.
    pub fn standard(height: usize, width: usize, noise_sigma: f64, seed: u64) -> Self {
        let geom = NailGeometry::new(height, width);
        let rho_at = |r: usize, c: usize| {
            let (u, v) = geom.normalized(c as f64, r as f64);
            (u, v, (u * u + v * v).sqrt())
        };
        let mean_image = Image::gray_from_fn(height, width, |r, c| {
            let (_, _, rho) = rho_at(r, c);
            BACKGROUND + (NAIL_LEVEL - BACKGROUND) * (1.0 - smoothstep(0.72, 1.0, rho))
        });
        let mut bz = Vec::with_capacity(height * width);
        let mut bx = Vec::with_capacity(height * width);
        let mut by = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let (u, v, rho) = rho_at(r, c);
                let mask = 1.0 - smoothstep(0.6, 0.75, rho);
                let distal = (-((v + 0.4) / 0.35).powi(2)).exp();
                bz.push(mask * (0.7 + 0.3 * distal));
                bx.push(mask * (3.0 * u).tanh());
                by.push(mask * (3.0 * v).tanh());
            }
        }
        let mut ordered = [bz, bx, by];
        orthonormalize(&mut ordered);
        let [bz, bx, by] = ordered;
        let basis = [bx, by, bz];
        let mut gain = [0.0; 3];
        for a in 0..3 {
            let peak = basis[a].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            gain[a] = PEAK_EXCURSION[a] / (FORCE_LIMITS[a] * peak);
        }
        NailForwardModel {
            mean_image,
            basis,
            gain,
            noise_sigma,
            seed,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mean_image.dims()
    }

    pub fn geometry(&self) -> NailGeometry {
        NailGeometry::new(self.mean_image.height(), self.mean_image.width())
    }

    pub fn with_noise(&self, noise_sigma: f64, seed: u64) -> Self {
        NailForwardModel {
            noise_sigma,
            seed,
            ..self.clone()
        }
    }

    /// Noise-free, unclamped intensities for `f`.
    pub fn expected_intensities(&self, f: ForceVector) -> Vec<f64> {
        let fa = f.to_array();
        let mut out = self.mean_image.pixels().to_vec();
        for ((g, v), basis) in self.gain.iter().zip(fa).zip(&self.basis) {
            let s = g * v;
            if s != 0.0 {
                for (o, b) in out.iter_mut().zip(basis) {
                    *o += s * b;
                }
            }
        }
        out
    }

    /// Whether any noise-free intensity for `f` would be clamped.
    pub fn clamps(&self, f: ForceVector) -> bool {
        self.expected_intensities(f)
            .iter()
            .any(|v| !(0.0..=1.0).contains(v))
    }

    /// Renders the nail for `f`; noise is drawn from a stream keyed by
    /// `(seed, sample_index)`.
    pub fn render(&self, f: ForceVector, sample_index: u64) -> Image {
        let mut values = self.expected_intensities(f);
        add_noise(&mut values, self.noise_sigma, self.seed, sample_index);
        let (h, w) = self.dims();
        Image::gray_from_clamped(h, w, values).expect("buffer sized from model")
    }
}

pub fn render_nail(model: &NailForwardModel, f: ForceVector, sample_index: u64) -> Image {
    model.render(f, sample_index)
}

pub(crate) fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn add_noise(values: &mut [f64], sigma: f64, seed: u64, stream: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = noise_rng(seed, stream);
    for v in values.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> NailForwardModel {
        NailForwardModel::standard(TEMPLATE_HEIGHT, TEMPLATE_WIDTH, 0.0, 1)
    }

    #[test]
    fn basis_is_orthonormal() {
        let m = model();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&m.basis[a], &m.basis[b]) - want).abs() < 1e-12);
            }
        }
        assert!(NailForwardModel::new(
            m.mean_image.clone(),
            m.basis.clone(),
            m.gain,
            0.0,
            0
        )
        .is_ok());
    }

    #[test]
    fn zero_force_renders_the_mean() {
        let m = model();
        assert_eq!(m.render(ForceVector::ZERO, 0), m.mean_image);
    }

    #[test]
    fn pixel_matches_scalar_formula() {
        let m = model();
        let f = ForceVector::new(1.0, 2.0, 3.0);
        let img = m.render(f, 0);
        let (r, c) = (20usize, 12usize);
        let i = r * TEMPLATE_WIDTH + c;
        let want = m.mean_image.get(r, c, 0)
            + m.gain[0] * 1.0 * m.basis[0][i]
            + m.gain[1] * 2.0 * m.basis[1][i]
            + m.gain[2] * 3.0 * m.basis[2][i];
        assert_eq!(img.get(r, c, 0), want.clamp(0.0, 1.0));
        assert!(want > 0.0 && want < 1.0);
    }

    #[test]
    fn superposition_without_clamping() {
        let m = model();
        let f1 = ForceVector::new(1.5, -2.0, 4.0);
        let f2 = ForceVector::new(-0.5, 3.0, 6.0);
        let mean = m.mean_image.pixels();
        let r1 = m.render(f1, 0);
        let r2 = m.render(f2, 0);
        let r12 = m.render(f1 + f2, 0);
        for (i, m) in mean.iter().enumerate() {
            let lhs = r12.pixels()[i] - m;
            let rhs = (r1.pixels()[i] - m) + (r2.pixels()[i] - m);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_corners_never_clamp() {
        let m = model();
        for fz in [0.0, 18.0] {
            for fx in [-3.0, 3.0] {
                for fy in [-6.0, 6.0] {
                    assert!(!m.clamps(ForceVector::new(fx, fy, fz)), "{fx} {fy} {fz}");
                }
            }
        }
    }

    #[test]
    fn noise_is_keyed_by_sample_index() {
        let m = model().with_noise(0.01, 7);
        let f = ForceVector::new(0.0, 0.0, 9.0);
        assert_eq!(m.render(f, 3), m.render(f, 3));
        assert_ne!(m.render(f, 3), m.render(f, 4));
    }

    #[test]
    fn landmarks_lie_inside_template() {
        let lm = NailGeometry::new(64, 32).landmarks();
        assert_eq!(lm.len(), 17);
        for &(x, y) in lm.points() {
            assert!((0.0..32.0).contains(&x) && (0.0..64.0).contains(&y));
        }
    }
}
