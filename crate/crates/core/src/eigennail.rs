//! Eigen-image force model: PCA over registered nail images ("eigennails"),
//! projection into nail space, and a per-axis linear least-squares map from
//! nail-space coordinates to force.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::ForceVector;
use crate::imaging::Image;
use crate::pca::{self, dot};

/// Projection coefficients `w` onto the retained eigen-images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NailSpaceCoord {
    pub w: Vec<f64>,
}

impl NailSpaceCoord {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Result of [`pca_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub height: usize,
    pub width: usize,
    pub mean: Vec<f64>,
    /// `k` orthonormal eigen-images, flattened row-major.
    pub eigen_images: Vec<Vec<f64>>,
    /// Full variance spectrum, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl EigenBasis {
    pub fn k(&self) -> usize {
        self.eigen_images.len()
    }
}

fn gray_values(img: &Image) -> Vec<f64> {
    if img.channels() == 1 {
        img.pixels().to_vec()
    } else {
        img.to_gray().into_pixels()
    }
}

/// PCA over gray images (RGB input is reduced to luma), keeping the
/// smallest `k` that covers 99% of the variance.
pub fn pca_fit(images: &[Image]) -> Result<EigenBasis> {
    pca_fit_with(images, pca::VARIANCE_FRACTION)
}

pub fn pca_fit_with(images: &[Image], fraction: f64) -> Result<EigenBasis> {
    let Some(first) = images.first() else {
        return Err(Error::domain("no images given"));
    };
    let (height, width) = first.dims();
    if let Some((i, img)) = images.iter().enumerate().find(|(_, im)| im.dims() != (height, width)) {
        return Err(Error::domain(format!(
            "image {i} is {}x{}, expected {height}x{width}",
            img.height(),
            img.width()
        )));
    }
    let samples: Vec<Vec<f64>> = images.iter().map(gray_values).collect();
    let p = pca::fit(&samples, fraction)?;
    Ok(EigenBasis {
        height,
        width,
        mean: p.mean,
        eigen_images: p.components,
        eigenvalues: p.eigenvalues,
    })
}

/// `w_i = <img - mean, v_i>`.
pub fn project_values(mean: &[f64], eigen_images: &[Vec<f64>], values: &[f64]) -> NailSpaceCoord {
    let centered: Vec<f64> = values.iter().zip(mean).map(|(a, b)| a - b).collect();
    NailSpaceCoord {
        w: eigen_images.iter().map(|v| dot(v, &centered)).collect(),
    }
}

/// Per-axis affine map `f = C w + offsets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    /// Rows for fx, fy, fz; each of length `k`.
    pub coeffs: [Vec<f64>; 3],
    pub offsets: [f64; 3],
}

impl Regression {
    pub fn apply(&self, w: &NailSpaceCoord) -> ForceVector {
        let mut f = [0.0; 3];
        for (a, fa) in f.iter_mut().enumerate() {
            *fa = dot(&self.coeffs[a], &w.w) + self.offsets[a];
        }
        ForceVector::from_array(f)
    }
}

/// Ordinary least squares with intercept, one fit per force axis, solved by
/// SVD of the `[1 | w]` design matrix. Directions with singular values
/// below `1e-12` of the largest carry no weight.
pub fn fit_regression(coords: &[NailSpaceCoord], forces: &[ForceVector]) -> Result<Regression> {
    if coords.len() != forces.len() {
        return Err(Error::domain(format!(
            "{} coordinates but {} forces",
            coords.len(),
            forces.len()
        )));
    }
    let n = coords.len();
    let k = coords.first().map_or(0, NailSpaceCoord::len);
    if let Some((i, c)) = coords.iter().enumerate().find(|(_, c)| c.len() != k) {
        return Err(Error::domain(format!("coordinate {i} has length {}, expected {k}", c.len())));
    }
    if n <= k || n == 0 {
        return Err(Error::Underdetermined {
            samples: n,
            unknowns: k + 1,
        });
    }
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { coords[i].w[j - 1] });
    let svd = x.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut coeffs: [Vec<f64>; 3] = Default::default();
    let mut offsets = [0.0; 3];
    for a in 0..3 {
        let y = DVector::from_iterator(n, forces.iter().map(|f| f.to_array()[a]));
        let beta = svd
            .solve(&y, 1e-12 * smax)
            .map_err(|e| Error::domain(format!("least squares failed: {e}")))?;
        offsets[a] = beta[0];
        coeffs[a] = beta.iter().skip(1).copied().collect();
    }
    Ok(Regression { coeffs, offsets })
}

/// A force estimate with its nail-space coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub force: ForceVector,
    pub coords: NailSpaceCoord,
    /// Some axis lies more than 10% of its training span outside the
    /// training range.
    pub extrapolated: bool,
}

pub const EXTRAPOLATION_MARGIN: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenNailModel {
    pub height: usize,
    pub width: usize,
    pub mean_image: Vec<f64>,
    pub eigen_images: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub regression: Regression,
    /// Per-axis `(min, max)` of the training forces (fx, fy, fz).
    pub force_range: [(f64, f64); 3],
}

impl EigenNailModel {
    pub fn train(images: &[Image], forces: &[ForceVector]) -> Result<Self> {
        Self::train_with(images, forces, pca::VARIANCE_FRACTION)
    }

    pub fn train_with(images: &[Image], forces: &[ForceVector], fraction: f64) -> Result<Self> {
        if images.len() != forces.len() {
            return Err(Error::domain(format!(
                "{} images but {} forces",
                images.len(),
                forces.len()
            )));
        }
        let basis = pca_fit_with(images, fraction)?;
        let coords: Vec<NailSpaceCoord> = images
            .iter()
            .map(|img| project_values(&basis.mean, &basis.eigen_images, &gray_values(img)))
            .collect();
        let regression = fit_regression(&coords, forces)?;
        let mut force_range = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for f in forces {
            for (r, v) in force_range.iter_mut().zip(f.to_array()) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Ok(EigenNailModel {
            height: basis.height,
            width: basis.width,
            mean_image: basis.mean,
            eigen_images: basis.eigen_images,
            eigenvalues: basis.eigenvalues,
            regression,
            force_range,
        })
    }

    pub fn k(&self) -> usize {
        self.eigen_images.len()
    }

    fn check_dims(&self, img: &Image) -> Result<()> {
        if img.dims() != (self.height, self.width) {
            return Err(Error::domain(format!(
                "image is {}x{}, model expects {}x{}",
                img.height(),
                img.width(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    pub fn project(&self, img: &Image) -> Result<NailSpaceCoord> {
        self.check_dims(img)?;
        Ok(project_values(&self.mean_image, &self.eigen_images, &gray_values(img)))
    }

    pub fn predict(&self, img: &Image) -> Result<Prediction> {
        let coords = self.project(img)?;
        let force = self.regression.apply(&coords);
        Ok(Prediction {
            extrapolated: self.is_extrapolated(force),
            force,
            coords,
        })
    }

    pub fn is_extrapolated(&self, f: ForceVector) -> bool {
        f.to_array().iter().zip(&self.force_range).any(|(v, &(lo, hi))| {
            let margin = EXTRAPOLATION_MARGIN * (hi - lo);
            *v < lo - margin || *v > hi + margin
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::synth::write_json(path.as_ref(), &EigenNailDocument::from(self))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let doc: EigenNailDocument = crate::synth::read_json(path)?;
        doc.into_model().map_err(|reason| Error::format(path, reason))
    }
}

pub const EIGENNAIL_FORMAT: &str = "nailforce-eigennail/1";

/// On-disk schema. Images are base64 strings of little-endian `f32`
/// values in row-major order; everything else is plain JSON numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenNailDocument {
    pub format: String,
    pub height: usize,
    pub width: usize,
    pub k: usize,
    pub mean_image: String,
    pub eigen_images: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub coeffs: [Vec<f64>; 3],
    pub offsets: [f64; 3],
    pub force_range: [(f64, f64); 3],
}

pub fn encode_f32(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn decode_f32(text: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let bytes = B64.decode(text).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() != expected * 4 {
        return Err(format!("image has {} bytes, expected {}", bytes.len(), expected * 4));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

impl From<&EigenNailModel> for EigenNailDocument {
    fn from(m: &EigenNailModel) -> Self {
        EigenNailDocument {
            format: EIGENNAIL_FORMAT.to_string(),
            height: m.height,
            width: m.width,
            k: m.k(),
            mean_image: encode_f32(&m.mean_image),
            eigen_images: m.eigen_images.iter().map(|v| encode_f32(v)).collect(),
            eigenvalues: m.eigenvalues.clone(),
            coeffs: m.regression.coeffs.clone(),
            offsets: m.regression.offsets,
            force_range: m.force_range,
        }
    }
}

impl EigenNailDocument {
    pub fn into_model(self) -> std::result::Result<EigenNailModel, String> {
        if self.format != EIGENNAIL_FORMAT {
            return Err(format!("unknown format {:?}", self.format));
        }
        let n = self.height * self.width;
        if self.eigen_images.len() != self.k || self.coeffs.iter().any(|c| c.len() != self.k) {
            return Err(format!("inconsistent component count k = {}", self.k));
        }
        Ok(EigenNailModel {
            height: self.height,
            width: self.width,
            mean_image: decode_f32(&self.mean_image, n)?,
            eigen_images: self
                .eigen_images
                .iter()
                .map(|s| decode_f32(s, n))
                .collect::<std::result::Result<_, _>>()?,
            eigenvalues: self.eigenvalues,
            regression: Regression {
                coeffs: self.coeffs,
                offsets: self.offsets,
            },
            force_range: self.force_range,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_grid, CalibrationGrid, NailForwardModel};

    fn gray(values: Vec<f64>, h: usize, w: usize) -> Image {
        Image::gray_from_clamped(h, w, values).unwrap()
    }

    #[test]
    fn identical_images_give_k_zero() {
        let img = gray(vec![0.2, 0.4, 0.6, 0.8], 2, 2);
        let b = pca_fit(&[img.clone(), img.clone(), img.clone()]).unwrap();
        assert_eq!(b.k(), 0);
        assert!(b.mean.iter().zip(img.pixels()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn rank_three_family() {
        let model = NailForwardModel::standard(64, 32, 0.0, 0);
        let imgs: Vec<Image> = make_grid(&CalibrationGrid::sparse())
            .unwrap()
            .iter()
            .map(|f| model.render(*f, 0))
            .collect();
        let b = pca_fit(&imgs).unwrap();
        assert_eq!(b.eigenvalues.iter().filter(|v| **v > 1e-12).count(), 3);
        assert_eq!(b.k(), 3);
    }

    #[test]
    fn dimension_mismatch() {
        let a = gray(vec![0.0; 4], 2, 2);
        let b = gray(vec![0.0; 6], 2, 3);
        assert!(matches!(pca_fit(&[a, b]), Err(Error::Domain(_))));
    }

    fn toy_model() -> EigenNailModel {
        // mean 0.5 everywhere, v1 and v2 two disjoint unit patterns
        let mut v1 = vec![0.0; 8];
        v1[0] = 0.6;
        v1[1] = 0.8;
        let mut v2 = vec![0.0; 8];
        v2[5] = 1.0;
        let mut v3 = vec![0.0; 8];
        v3[7] = 1.0;
        EigenNailModel {
            height: 2,
            width: 4,
            mean_image: vec![0.5; 8],
            eigen_images: vec![v1, v2, v3],
            eigenvalues: vec![3.0, 2.0, 1.0],
            regression: Regression {
                coeffs: [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                offsets: [0.0; 3],
            },
            force_range: [(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)],
        }
    }

    fn compose(m: &EigenNailModel, w: &[f64]) -> Image {
        let mut v = m.mean_image.clone();
        for (e, wi) in m.eigen_images.iter().zip(w) {
            for (o, x) in v.iter_mut().zip(e) {
                *o += wi * x;
            }
        }
        gray(v, m.height, m.width)
    }

    #[test]
    fn projection_examples() {
        let m = toy_model();
        assert_eq!(m.project(&compose(&m, &[0.0; 3])).unwrap().w, vec![0.0; 3]);
        let w = m.project(&compose(&m, &[0.2, 0.0, 0.0])).unwrap().w;
        assert!((w[0] - 0.2).abs() < 1e-9 && w[1].abs() < 1e-9 && w[2].abs() < 1e-9);
        let p = m.predict(&compose(&m, &[0.1, 0.2, 0.3])).unwrap();
        assert!((p.force.fx - 0.1).abs() < 1e-12);
        assert!((p.force.fy - 0.2).abs() < 1e-12);
        assert!((p.force.fz - 0.3).abs() < 1e-12);
        assert!(!p.extrapolated);
        let far = m.predict(&compose(&m, &[0.0, 0.0, 0.45])).unwrap();
        assert!(!far.extrapolated);
        assert!(m.is_extrapolated(ForceVector::new(0.0, 0.0, 1.11)));
        assert!(!m.is_extrapolated(ForceVector::new(0.0, 0.0, 1.09)));
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let m = toy_model();
        let img = gray((0..8).map(|i| 0.1 * i as f64).collect(), 2, 4);
        let w = m.project(&img).unwrap().w;
        let mut r: Vec<f64> = img.pixels().iter().zip(&m.mean_image).map(|(a, b)| a - b).collect();
        for (e, wi) in m.eigen_images.iter().zip(&w) {
            for (o, x) in r.iter_mut().zip(e) {
                *o -= wi * x;
            }
        }
        for e in &m.eigen_images {
            assert!(dot(&r, e).abs() <= 1e-9);
        }
    }

    #[test]
    fn intercept_only_fit() {
        let coords = vec![NailSpaceCoord { w: vec![0.0, 0.0] }; 4];
        let forces = vec![
            ForceVector::new(1.0, 2.0, 3.0),
            ForceVector::new(3.0, 2.0, 5.0),
            ForceVector::new(1.0, 0.0, 3.0),
            ForceVector::new(3.0, 0.0, 5.0),
        ];
        let r = fit_regression(&coords, &forces).unwrap();
        for (o, e) in r.offsets.iter().zip([2.0, 1.0, 4.0]) {
            assert!((o - e).abs() < 1e-12);
        }
        assert!(r.coeffs.iter().flatten().all(|c| *c == 0.0));
    }

    #[test]
    fn underdetermined_is_an_error() {
        let coords = vec![NailSpaceCoord { w: vec![1.0, 2.0] }, NailSpaceCoord { w: vec![0.0, 1.0] }];
        let forces = vec![ForceVector::ZERO; 2];
        assert!(matches!(
            fit_regression(&coords, &forces),
            Err(Error::Underdetermined { samples: 2, unknowns: 3 })
        ));
    }

    #[test]
    fn zero_direction_padding_does_not_change_the_fit() {
        let coords: Vec<NailSpaceCoord> = (0..6)
            .map(|i| NailSpaceCoord {
                w: vec![i as f64, (i as f64 * 0.7).sin()],
            })
            .collect();
        let forces: Vec<ForceVector> = (0..6)
            .map(|i| ForceVector::new(i as f64 * 0.5, 1.0 - i as f64, (i * i) as f64 * 0.1))
            .collect();
        let base = fit_regression(&coords, &forces).unwrap();
        let padded: Vec<NailSpaceCoord> = coords
            .iter()
            .map(|c| NailSpaceCoord {
                w: c.w.iter().copied().chain([0.0]).collect(),
            })
            .collect();
        let wide = fit_regression(&padded, &forces).unwrap();
        for (c, p) in coords.iter().zip(&padded) {
            let a = base.apply(c).to_array();
            let b = wide.apply(p).to_array();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn f32_codec_round_trip() {
        let v = vec![0.25, -1.5, 3.0e-3, 0.1];
        let back = decode_f32(&encode_f32(&v), 4).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(*b, *a as f32 as f64);
        }
        assert!(decode_f32(&encode_f32(&v), 5).is_err());
    }
}
