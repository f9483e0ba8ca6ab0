use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::{self, Pca};

/// Ordered landmark points `(x, y)` in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkShape {
    points: Vec<(f64, f64)>,
}

impl LandmarkShape {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        LandmarkShape { points }
    }

    /// Builds from interleaved `x0, y0, x1, y1, ...`.
    pub fn from_flat(v: &[f64]) -> Self {
        LandmarkShape {
            points: v.chunks_exact(2).map(|p| (p[0], p[1])).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|(x, y)| x.is_finite() && y.is_finite())
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / n, sy / n)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        LandmarkShape {
            points: self.points.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
        }
    }

    /// Applies `p -> scale * R(angle) * (p - pivot) + pivot + (tx, ty)`.
    pub fn similarity(&self, scale: f64, angle: f64, tx: f64, ty: f64, pivot: (f64, f64)) -> Self {
        let (s, c) = angle.sin_cos();
        LandmarkShape {
            points: self
                .points
                .iter()
                .map(|&(x, y)| {
                    let (dx, dy) = (x - pivot.0, y - pivot.1);
                    (
                        scale * (c * dx - s * dy) + pivot.0 + tx,
                        scale * (s * dx + c * dy) + pivot.1 + ty,
                    )
                })
                .collect(),
        }
    }

    /// Mean Euclidean distance between corresponding points.
    pub fn mean_distance(&self, other: &LandmarkShape) -> f64 {
        assert_eq!(self.len(), other.len());
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1))
            .sum::<f64>()
            / self.len().max(1) as f64
    }
}

/// Least-squares similarity `(a, b, tx, ty)` with
/// `target ~ [[a, -b], [b, a]] * source + t`.
pub(crate) fn fit_similarity(source: &[(f64, f64)], target: &[(f64, f64)]) -> [f64; 4] {
    let n = source.len() as f64;
    let cs = source.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let ct = target.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (mut sxx, mut num_a, mut num_b) = (0.0, 0.0, 0.0);
    for (s, t) in source.iter().zip(target) {
        let (x, y) = (s.0 - cs.0, s.1 - cs.1);
        let (u, v) = (t.0 - ct.0, t.1 - ct.1);
        sxx += x * x + y * y;
        num_a += x * u + y * v;
        num_b += x * v - y * u;
    }
    let (a, b) = if sxx > 0.0 {
        (num_a / sxx, num_b / sxx)
    } else {
        (1.0, 0.0)
    };
    let tx = ct.0 - (a * cs.0 - b * cs.1);
    let ty = ct.1 - (b * cs.0 + a * cs.1);
    [a, b, tx, ty]
}

fn apply_similarity(p: &[(f64, f64)], t: [f64; 4]) -> Vec<(f64, f64)> {
    let [a, b, tx, ty] = t;
    p.iter()
        .map(|&(x, y)| (a * x - b * y + tx, b * x + a * y + ty))
        .collect()
}

/// Centered, unit Frobenius norm copy.
fn normalize(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = points.len() as f64;
    let (cx, cy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let centered: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x - cx, y - cy)).collect();
    let norm = centered.iter().map(|(x, y)| x * x + y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        return centered;
    }
    centered.iter().map(|&(x, y)| (x / norm, y / norm)).collect()
}

/// Rotates a centered shape so its first off-center point lies on +x.
fn canonical_orientation(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let Some(&(x, y)) = points.iter().find(|(x, y)| x.hypot(*y) > 1e-12) else {
        return points.to_vec();
    };
    let angle = -y.atan2(x);
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|&(px, py)| (c * px - s * py, s * px + c * py))
        .collect()
}

/// Rotation-only alignment of a normalized shape onto a normalized target.
fn rotate_onto(points: &[(f64, f64)], target: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut num_a, mut num_b) = (0.0, 0.0);
    for (s, t) in points.iter().zip(target) {
        num_a += s.0 * t.0 + s.1 * t.1;
        num_b += s.0 * t.1 - s.1 * t.0;
    }
    let angle = num_b.atan2(num_a);
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|&(x, y)| (c * x - s * y, s * x + c * y))
        .collect()
}

/// Generalized Procrustes alignment. Returns the canonical mean and the
/// aligned shapes, all centered with unit norm.
pub fn procrustes_align(shapes: &[LandmarkShape]) -> Result<(LandmarkShape, Vec<LandmarkShape>)> {
    check_shapes(shapes)?;
    let normalized: Vec<Vec<(f64, f64)>> = shapes.iter().map(|s| normalize(&s.points)).collect();
    let mut mean = canonical_orientation(&normalized[0]);
    for _ in 0..100 {
        let aligned: Vec<Vec<(f64, f64)>> = normalized.iter().map(|s| rotate_onto(s, &mean)).collect();
        let n = aligned.len() as f64;
        let mut next = vec![(0.0, 0.0); mean.len()];
        for s in &aligned {
            for (m, p) in next.iter_mut().zip(s) {
                m.0 += p.0 / n;
                m.1 += p.1 / n;
            }
        }
        let next = canonical_orientation(&normalize(&next));
        let change: f64 = next
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
            .sum::<f64>()
            .sqrt();
        mean = next;
        if change < 1e-14 {
            break;
        }
    }
    let aligned = normalized.iter().map(|s| rotate_onto(s, &mean)).collect::<Vec<_>>();
    Ok((
        LandmarkShape::new(mean),
        aligned.into_iter().map(LandmarkShape::new).collect(),
    ))
}

fn check_shapes(shapes: &[LandmarkShape]) -> Result<()> {
    let Some(first) = shapes.first() else {
        return Err(Error::domain("no shapes given"));
    };
    if first.len() < 2 {
        return Err(Error::domain("shapes need at least two points"));
    }
    for (i, s) in shapes.iter().enumerate() {
        if s.len() != first.len() {
            return Err(Error::domain(format!(
                "shape {i} has {} points, expected {}",
                s.len(),
                first.len()
            )));
        }
        if !s.is_finite() {
            return Err(Error::domain(format!("shape {i} has non-finite coordinates")));
        }
    }
    Ok(())
}

/// Point distribution model over Procrustes-aligned shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeModel {
    /// PCA in the normalized (centered, unit norm, canonical) frame.
    pub pca: Pca,
    /// The mean shape expressed in the pixel frame of the first training shape.
    pub reference: LandmarkShape,
}

impl ShapeModel {
    pub fn mean(&self) -> LandmarkShape {
        LandmarkShape::from_flat(&self.pca.mean)
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

    /// Shape parameters of an arbitrary shape (aligned onto the mean first).
    pub fn params(&self, shape: &LandmarkShape) -> Vec<f64> {
        let aligned = rotate_onto(&normalize(shape.points()), &self.mean().points);
        self.pca.project(&LandmarkShape::new(aligned).to_flat())
    }

    /// Components expressed in the reference pixel frame.
    pub fn reference_components(&self) -> Vec<Vec<f64>> {
        self.components_in_frame(&self.reference)
    }

    /// Components rotated and scaled into the pixel frame of `frame`, a
    /// shape similar to the mean.
    pub fn components_in_frame(&self, frame: &LandmarkShape) -> Vec<Vec<f64>> {
        let [a, b, _, _] = fit_similarity(self.mean().points(), frame.points());
        self.pca
            .components
            .iter()
            .map(|c| {
                c.chunks_exact(2)
                    .flat_map(|p| [a * p[0] - b * p[1], b * p[0] + a * p[1]])
                    .collect()
            })
            .collect()
    }
}

pub fn fit_shape_model(shapes: &[LandmarkShape]) -> Result<ShapeModel> {
    if shapes.len() < 2 {
        return Err(Error::domain(format!("need at least 2 shapes, got {}", shapes.len())));
    }
    let (mean, aligned) = procrustes_align(shapes)?;
    let samples: Vec<Vec<f64>> = aligned.iter().map(|s| s.to_flat()).collect();
    // the PCA mean is the plain average of the aligned shapes, so training
    // parameters are centered; it matches the canonical mean up to scale
    let pca = pca::fit(&samples, pca::VARIANCE_FRACTION)?;
    let t = fit_similarity(mean.points(), shapes[0].points());
    let reference = LandmarkShape::new(apply_similarity(mean.points(), t));
    Ok(ShapeModel { pca, reference })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> LandmarkShape {
        LandmarkShape::new(vec![(10.0, 0.0), (3.0, 4.0), (-5.0, 6.0), (-7.0, -2.0), (2.0, -8.0)])
    }

    #[test]
    fn identical_shapes_have_zero_variance() {
        let s = star().translated(40.0, 30.0);
        let m = fit_shape_model(&[s.clone(), s.clone(), s.clone()]).unwrap();
        assert_eq!(m.retained(), 0);
        assert!(m.total_variance() < 1e-20);
        assert!(m.reference.mean_distance(&s) < 1e-9);
    }

    #[test]
    fn two_distinct_shapes_have_rank_one() {
        let a = star();
        let mut pts = a.points().to_vec();
        pts[1].0 += 2.0;
        let m = fit_shape_model(&[a, LandmarkShape::new(pts)]).unwrap();
        let positive = m.pca.eigenvalues.iter().filter(|v| **v > 0.0).count();
        assert_eq!(positive, 1);
        assert_eq!(m.retained(), 1);
    }

    #[test]
    fn rotated_copies_align_exactly() {
        let a = star();
        let shapes: Vec<_> = (0..5)
            .map(|k| a.similarity(1.0 + 0.1 * k as f64, 0.3 * k as f64, k as f64, -2.0 * k as f64, (0.0, 0.0)))
            .collect();
        let m = fit_shape_model(&shapes).unwrap();
        assert!(m.pca.eigenvalues.iter().all(|v| v.abs() < 1e-9));
        assert_eq!(m.retained(), 0);
    }

    #[test]
    fn alignment_ignores_a_global_similarity() {
        let base = star();
        let set: Vec<_> = (0..4)
            .map(|k| {
                let mut p = base.points().to_vec();
                p[k].0 += 1.5;
                p[(k + 2) % 5].1 -= 0.7;
                LandmarkShape::new(p)
            })
            .collect();
        let moved: Vec<_> = set.iter().map(|s| s.similarity(2.3, 1.1, 5.0, -9.0, (1.0, 2.0))).collect();
        let (m1, a1) = procrustes_align(&set).unwrap();
        let (m2, a2) = procrustes_align(&moved).unwrap();
        assert!(m1.mean_distance(&m2) < 1e-9);
        for (x, y) in a1.iter().zip(&a2) {
            for (p, q) in x.points().iter().zip(y.points()) {
                assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inconsistent_point_counts() {
        let a = star();
        let b = LandmarkShape::new(a.points()[..4].to_vec());
        assert!(matches!(fit_shape_model(&[a, b]), Err(Error::Domain(_))));
    }

    #[test]
    fn similarity_fit_recovers_transform() {
        let a = star();
        let b = a.similarity(1.7, 0.4, 3.0, -1.0, (0.0, 0.0));
        let t = fit_similarity(a.points(), b.points());
        let back = apply_similarity(a.points(), t);
        assert!(LandmarkShape::new(back).mean_distance(&b) < 1e-12);
    }
}
