//! Texture model, combined shape/texture appearance model and their
//! persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::shape::{fit_shape_model, LandmarkShape, ShapeModel};
use super::triangulation::Triangulation;
use super::warp::warp_texture;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::pca::{self, Pca};

/// PCA over shape-normalized textures (covered template pixels in sample
/// order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureModel {
    pub pca: Pca,
}

impl TextureModel {
    pub fn mean(&self) -> &[f64] {
        &self.pca.mean
    }

    pub fn retained(&self) -> usize {
        self.pca.retained()
    }

    pub fn variances(&self) -> &[f64] {
        self.pca.retained_eigenvalues()
    }

    pub fn total_variance(&self) -> f64 {
        self.pca.eigenvalues.iter().sum()
    }

    pub fn params(&self, texture: &[f64]) -> Vec<f64> {
        self.pca.project(texture)
    }
}

pub fn fit_texture_model(textures: &[Vec<f64>]) -> Result<TextureModel> {
    Ok(TextureModel {
        pca: pca::fit(textures, pca::VARIANCE_FRACTION)?,
    })
}

/// Combined parameter model `b = Phi_c c` over `b = [w * b_s; b_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedModel {
    /// Weight applied to shape parameters before concatenation.
    pub weight: f64,
    /// Length of the shape block of `b`.
    pub shape_dim: usize,
    pub texture_dim: usize,
    /// Orthonormal columns of `Phi_c`, each of length `shape_dim + texture_dim`.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl CombinedModel {
    pub fn concat(&self, shape_params: &[f64], texture_params: &[f64]) -> Vec<f64> {
        shape_params
            .iter()
            .map(|v| self.weight * v)
            .chain(texture_params.iter().copied())
            .collect()
    }

    /// `c = Phi_c^T b`.
    pub fn params(&self, b: &[f64]) -> Vec<f64> {
        self.components.iter().map(|v| pca::dot(v, b)).collect()
    }

    /// `b = Phi_c c`.
    pub fn reconstruct(&self, c: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.shape_dim + self.texture_dim];
        for (v, &ci) in self.components.iter().zip(c) {
            for (o, vi) in b.iter_mut().zip(v) {
                *o += ci * vi;
            }
        }
        b
    }

    /// Splits `b` into unweighted shape parameters and texture parameters.
    pub fn split(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (s, t) = b.split_at(self.shape_dim);
        let w = if self.weight != 0.0 { self.weight } else { 1.0 };
        (s.iter().map(|v| v / w).collect(), t.to_vec())
    }
}

/// PCA over per-sample `[weight * shape_params; texture_params]`, keeping
/// components up to `fraction` of the variance (1.0 keeps every non-null
/// direction). Parameters of both models are centered by construction, so
/// the combined model has no offset.
pub fn combine_appearance(
    shape_params: &[Vec<f64>],
    texture_params: &[Vec<f64>],
    weight: f64,
    fraction: f64,
) -> Result<CombinedModel> {
    if shape_params.len() != texture_params.len() {
        return Err(Error::domain(format!(
            "{} shape parameter vectors but {} texture parameter vectors",
            shape_params.len(),
            texture_params.len()
        )));
    }
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::domain(format!("shape weight must be positive, got {weight}")));
    }
    let shape_dim = shape_params.first().map_or(0, Vec::len);
    let texture_dim = texture_params.first().map_or(0, Vec::len);
    let mut model = CombinedModel {
        weight,
        shape_dim,
        texture_dim,
        components: Vec::new(),
        variances: Vec::new(),
    };
    if shape_dim + texture_dim == 0 {
        if shape_params.len() < 2 {
            return Err(Error::domain("need at least 2 samples"));
        }
        return Ok(model);
    }
    let b: Vec<Vec<f64>> = shape_params
        .iter()
        .zip(texture_params)
        .map(|(s, t)| model.concat(s, t))
        .collect();
    let p = pca::fit(&b, fraction)?;
    model.variances = p.retained_eigenvalues().to_vec();
    model.components = p.components;
    Ok(model)
}

/// Shape, texture and combined models with the triangulation they share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppearanceModel {
    pub shape: ShapeModel,
    pub texture: TextureModel,
    pub combined: CombinedModel,
    pub triangulation: Triangulation,
}

pub const APPEARANCE_FORMAT: &str = "nailforce-appearance/1";

#[derive(Serialize, Deserialize)]
struct AppearanceDocument {
    format: String,
    model: AppearanceModel,
}

impl AppearanceModel {
    /// Trains on `images` annotated with `shapes`; `template` defines the
    /// shape-normalized frame (`height` x `width`).
    pub fn train(
        images: &[Image],
        shapes: &[LandmarkShape],
        template: LandmarkShape,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        if images.len() != shapes.len() {
            return Err(Error::domain(format!(
                "{} images but {} shapes",
                images.len(),
                shapes.len()
            )));
        }
        let triangulation = Triangulation::new(template, height, width)?;
        let shape = fit_shape_model(shapes)?;
        let textures = images
            .iter()
            .zip(shapes)
            .map(|(img, s)| warp_texture(img, s, &triangulation))
            .collect::<Result<Vec<_>>>()?;
        let texture = fit_texture_model(&textures)?;
        let weight = shape_weight(&shape, &texture);
        let sp: Vec<Vec<f64>> = shapes.iter().map(|s| shape.params(s)).collect();
        let tp: Vec<Vec<f64>> = textures.iter().map(|t| texture.params(t)).collect();
        let combined = combine_appearance(&sp, &tp, weight, pca::VARIANCE_FRACTION)?;
        Ok(AppearanceModel {
            shape,
            texture,
            combined,
            triangulation,
        })
    }

    pub fn template(&self) -> &LandmarkShape {
        &self.triangulation.template
    }

    /// Shape components in template pixel units.
    pub fn shape_modes(&self) -> Vec<Vec<f64>> {
        self.shape.components_in_frame(self.template())
    }

    /// Landmarks and texture generated by combined parameters `c`, in the
    /// template frame.
    pub fn synthesize(&self, c: &[f64]) -> (LandmarkShape, Vec<f64>) {
        let (bs, bt) = self.combined.split(&self.combined.reconstruct(c));
        let mut pts = self.template().to_flat();
        for (mode, &p) in self.shape_modes().iter().zip(&bs) {
            for (o, m) in pts.iter_mut().zip(mode) {
                *o += p * m;
            }
        }
        (LandmarkShape::from_flat(&pts), self.texture.pca.reconstruct(&bt))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = AppearanceDocument {
            format: APPEARANCE_FORMAT.to_string(),
            model: self.clone(),
        };
        crate::synth::write_json(path.as_ref(), &doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let doc: AppearanceDocument = crate::synth::read_json(path)?;
        if doc.format != APPEARANCE_FORMAT {
            return Err(Error::format(path, format!("unknown format {:?}", doc.format)));
        }
        let mut model = doc.model;
        model.triangulation = model.triangulation.restore();
        Ok(model)
    }
}

/// `sqrt(total texture variance / total shape variance)`, or 1 when the
/// shapes do not vary.
pub fn shape_weight(shape: &ShapeModel, texture: &TextureModel) -> f64 {
    let vs = shape.total_variance();
    let vt = texture.total_variance();
    if vs > 0.0 && vt > 0.0 {
        (vt / vs).sqrt()
    } else {
        1.0
    }
}

/// Writes `point,x,y` rows.
pub fn write_landmarks_csv(path: impl AsRef<Path>, shape: &LandmarkShape) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point", "x", "y"])?;
    for (i, (x, y)) in shape.points().iter().enumerate() {
        w.write_record([i.to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_landmarks_csv(path: impl AsRef<Path>) -> Result<LandmarkShape> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut pts = Vec::new();
    for (i, row) in r.deserialize::<(usize, f64, f64)>().enumerate() {
        let (idx, x, y) = row?;
        if idx != i {
            return Err(Error::format(path, format!("point index {idx} at row {i}")));
        }
        pts.push((x, y));
    }
    Ok(LandmarkShape::new(pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceVector;
    use crate::synth::NailForwardModel;

    fn training_set(perturb: bool) -> (Vec<Image>, Vec<LandmarkShape>, LandmarkShape) {
        let model = NailForwardModel::standard(64, 32, 0.0, 3);
        let lm = model.geometry().landmarks();
        let tri = Triangulation::new(lm.clone(), 64, 32).unwrap();
        let mut imgs = Vec::new();
        let mut shapes = Vec::new();
        for k in 0..8 {
            // corners of the calibration box
            let f = ForceVector::new(
                if k & 1 == 0 { -3.0 } else { 3.0 },
                if k & 2 == 0 { -6.0 } else { 6.0 },
                if k & 4 == 0 { 0.0 } else { 18.0 },
            );
            let tex = model.render(f, k);
            if perturb {
                let mut pts = lm.points().to_vec();
                pts[k as usize].0 += 0.4 * (k as f64 - 3.5);
                pts[16].1 += 0.2 * k as f64;
                let s = LandmarkShape::new(pts).translated(10.0, 12.0);
                imgs.push(super::super::warp::render_shape(&tex, &tri, &s, 96, 64, 0.12).unwrap());
                shapes.push(s);
            } else {
                imgs.push(tex);
                shapes.push(lm.clone());
            }
        }
        (imgs, shapes, lm)
    }

    #[test]
    fn identical_shapes_give_texture_only_parameters() {
        let (imgs, shapes, lm) = training_set(false);
        let m = AppearanceModel::train(&imgs, &shapes, lm, 64, 32).unwrap();
        assert_eq!(m.shape.retained(), 0);
        assert_eq!(m.combined.shape_dim, 0);
        assert_eq!(m.texture.retained(), 3);
        let (s, t) = m.synthesize(&vec![0.0; m.combined.components.len()]);
        assert!(s.mean_distance(m.template()) < 1e-12);
        assert_eq!(t, m.texture.mean());
    }

    #[test]
    fn combined_components_are_orthonormal_and_round_trip() {
        let (imgs, shapes, lm) = training_set(true);
        let m = AppearanceModel::train(&imgs, &shapes, lm, 64, 32).unwrap();
        assert!(m.shape.retained() > 0);
        let sp: Vec<Vec<f64>> = shapes.iter().map(|s| m.shape.params(s)).collect();
        let tp: Vec<Vec<f64>> = imgs
            .iter()
            .zip(&shapes)
            .map(|(i, s)| m.texture.params(&warp_texture(i, s, &m.triangulation).unwrap()))
            .collect();
        let full = combine_appearance(&sp, &tp, m.combined.weight, 1.0).unwrap();
        for (i, a) in full.components.iter().enumerate() {
            for (j, b) in full.components.iter().enumerate() {
                let d = pca::dot(a, b);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
        for (s, t) in sp.iter().zip(&tp) {
            let b = full.concat(s, t);
            let back = full.reconstruct(&full.params(&b));
            for (x, y) in b.iter().zip(&back) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mismatched_sample_counts() {
        let r = combine_appearance(&[vec![1.0], vec![2.0]], &[vec![1.0]], 1.0, 0.99);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let (imgs, shapes, lm) = training_set(false);
        let m = AppearanceModel::train(&imgs, &shapes, lm.clone(), 64, 32).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("app.json");
        m.save(&p).unwrap();
        let back = AppearanceModel::load(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.triangulation.samples(), m.triangulation.samples());
        let q = dir.path().join("lm.csv");
        write_landmarks_csv(&q, &lm).unwrap();
        assert_eq!(read_landmarks_csv(&q).unwrap(), lm);
    }
}
