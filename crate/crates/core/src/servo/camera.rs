//! Pinhole camera, poses, the four-dot target and dot detection.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::segmentation::{connected_components, Mask};

/// Camera-to-world rigid transform. The camera looks along its +z axis,
/// with +x to the right and +y down in the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    /// Columns are the camera axes expressed in the world frame.
    pub orientation: Matrix3<f64>,
}

impl CameraPose {
    pub fn identity() -> Self {
        CameraPose {
            position: Vector3::zeros(),
            orientation: Matrix3::identity(),
        }
    }

    /// Camera at `position` looking at `target`, image rows following `down`.
    pub fn look_at(position: Vector3<f64>, target: Vector3<f64>, down: Vector3<f64>) -> Self {
        let z = (target - position).normalize();
        let x = down.cross(&z).normalize();
        let y = z.cross(&x);
        CameraPose {
            position,
            orientation: Matrix3::from_columns(&[x, y, z]),
        }
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.transpose() * (world - self.position)
    }

    /// `max |R^T R - I|` entry.
    pub fn orthonormality_error(&self) -> f64 {
        (self.orientation.transpose() * self.orientation - Matrix3::identity()).amax()
    }

    /// Position followed by the rotation matrix in row-major order.
    pub fn to_row(&self) -> [f64; 12] {
        let r = &self.orientation;
        let p = &self.position;
        [
            p.x, p.y, p.z, r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)],
            r[(2, 1)], r[(2, 2)],
        ]
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Intrinsics {
    /// 680 x 1024 sensor (width x height).
    fn default() -> Self {
        Intrinsics {
            focal_px: 800.0,
            cx: 340.0,
            cy: 512.0,
            width: 680,
            height: 1024,
        }
    }
}

impl Intrinsics {
    /// Normalized coordinates to `(row, col)` pixels.
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (self.cy + self.focal_px * y, self.cx + self.focal_px * x)
    }

    pub fn to_normalized(&self, row: f64, col: f64) -> (f64, f64) {
        ((col - self.cx) / self.focal_px, (row - self.cy) / self.focal_px)
    }
}

/// Four image points in normalized coordinates with their depths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub points: [(f64, f64); 4],
    pub depths: [f64; 4],
}

impl FeatureSet {
    pub fn to_vector(&self) -> [f64; 8] {
        let mut v = [0.0; 8];
        for (i, (x, y)) in self.points.iter().enumerate() {
            v[2 * i] = *x;
            v[2 * i + 1] = *y;
        }
        v
    }
}

/// Four dots on the corners of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotPlate {
    pub center: Vector3<f64>,
    /// Plate axes in the world frame; dots lie in the plane of the first two.
    pub orientation: Matrix3<f64>,
    pub width_m: f64,
    pub height_m: f64,
    pub dot_radius_m: f64,
}

impl Default for DotPlate {
    /// 12 x 8 cm plate half a meter in front of the world origin.
    fn default() -> Self {
        DotPlate {
            center: Vector3::new(0.0, 0.0, 0.5),
            orientation: Matrix3::identity(),
            width_m: 0.12,
            height_m: 0.08,
            dot_radius_m: 0.006,
        }
    }
}

impl DotPlate {
    pub fn dots(&self) -> [Vector3<f64>; 4] {
        let (a, b) = (self.width_m / 2.0, self.height_m / 2.0);
        let ex = self.orientation.column(0).into_owned();
        let ey = self.orientation.column(1).into_owned();
        [(-a, -b), (a, -b), (-a, b), (a, b)].map(|(u, v)| self.center + ex * u + ey * v)
    }

    pub fn translated(&self, offset: Vector3<f64>) -> Self {
        DotPlate {
            center: self.center + offset,
            ..*self
        }
    }
}

/// Ideal projection of the plate dots; a dot at or behind the camera plane
/// is a domain error.
pub fn project_plate(pose: &CameraPose, plate: &DotPlate) -> Result<FeatureSet> {
    let mut points = [(0.0, 0.0); 4];
    let mut depths = [0.0; 4];
    for (i, d) in plate.dots().iter().enumerate() {
        let c = pose.to_camera(d);
        if c.z <= 0.0 {
            return Err(Error::domain(format!("dot {i} is behind the camera")));
        }
        points[i] = (c.x / c.z, c.y / c.z);
        depths[i] = c.z;
    }
    Ok(FeatureSet { points, depths })
}

/// Renders dark anti-aliased disks on a light background.
pub fn render_dots(pose: &CameraPose, plate: &DotPlate, k: &Intrinsics) -> Result<Image> {
    const BACKGROUND: f64 = 0.9;
    const DOT: f64 = 0.1;
    const SUB: usize = 4;
    let mut px = vec![BACKGROUND; k.width * k.height];
    let f = project_plate(pose, plate)?;
    for (i, (x, y)) in f.points.iter().enumerate() {
        let (row, col) = k.to_pixel(*x, *y);
        let radius = k.focal_px * plate.dot_radius_m / f.depths[i];
        let r0 = (row - radius - 1.0).floor().max(0.0) as usize;
        let r1 = ((row + radius + 1.0).ceil().max(0.0) as usize).min(k.height);
        let c0 = (col - radius - 1.0).floor().max(0.0) as usize;
        let c1 = ((col + radius + 1.0).ceil().max(0.0) as usize).min(k.width);
        for r in r0..r1 {
            for c in c0..c1 {
                let mut inside = 0;
                for sr in 0..SUB {
                    for sc in 0..SUB {
                        let yy = r as f64 - 0.5 + (sr as f64 + 0.5) / SUB as f64;
                        let xx = c as f64 - 0.5 + (sc as f64 + 0.5) / SUB as f64;
                        if (yy - row).powi(2) + (xx - col).powi(2) <= radius * radius {
                            inside += 1;
                        }
                    }
                }
                let cover = inside as f64 / (SUB * SUB) as f64;
                let p = &mut px[r * k.width + c];
                *p = (*p - cover * (BACKGROUND - DOT)).max(DOT);
            }
        }
    }
    Image::gray_from_clamped(k.height, k.width, px)
}

/// Darkness-weighted centroids `(row, col)` of the dark components of a
/// gray frame, in lexicographic order. Components smaller than 3 pixels
/// are ignored; any other count than `expected` is a feature loss.
pub fn detect_dots(img: &Image, expected: usize) -> Result<Vec<(f64, f64)>> {
    let gray;
    let img = if img.channels() == 1 {
        img
    } else {
        gray = img.to_gray();
        &gray
    };
    let (h, w) = img.dims();
    let mut sorted = img.pixels().to_vec();
    let mid = sorted.len() / 2;
    let background = *sorted
        .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        .1;
    let darkest = img.pixels().iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = (background + darkest) / 2.0;
    let mut mask = Mask::new(h, w);
    for (m, p) in mask.data.iter_mut().zip(img.pixels()) {
        *m = *p < threshold && background - darkest > 0.1;
    }
    let blobs = connected_components(&mask, 3);
    if blobs.len() != expected {
        return Err(Error::FeatureLoss {
            expected,
            found: blobs.len(),
        });
    }
    let mut out: Vec<(f64, f64)> = blobs
        .iter()
        .map(|b| {
            let r0 = b.bbox.top.saturating_sub(2);
            let c0 = b.bbox.left.saturating_sub(2);
            let r1 = (b.bbox.bottom + 3).min(h);
            let c1 = (b.bbox.right + 3).min(w);
            let (mut sw, mut sr, mut sc) = (0.0, 0.0, 0.0);
            for r in r0..r1 {
                for c in c0..c1 {
                    let wgt = (background - img.get(r, c, 0)).max(0.0);
                    sw += wgt;
                    sr += wgt * r as f64;
                    sc += wgt * c as f64;
                }
            }
            (sr / sw, sc / sw)
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_disks_at_subpixel_positions() {
        let k = Intrinsics::default();
        let pose = CameraPose::identity();
        let plate = DotPlate::default().translated(Vector3::new(0.0013, -0.0021, 0.0));
        let img = render_dots(&pose, &plate, &k).unwrap();
        let found = detect_dots(&img, 4).unwrap();
        let f = project_plate(&pose, &plate).unwrap();
        let mut truth: Vec<(f64, f64)> = f.points.iter().map(|(x, y)| k.to_pixel(*x, *y)).collect();
        truth.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in found.iter().zip(&truth) {
            assert!((a.0 - b.0).hypot(a.1 - b.1) < 0.5, "{a:?} vs {b:?}");
        }
        assert_eq!(detect_dots(&img, 4).unwrap(), found);
    }

    #[test]
    fn missing_dot_is_a_feature_loss() {
        let k = Intrinsics::default();
        // push the plate sideways so one column of dots leaves the frame
        let plate = DotPlate::default().translated(Vector3::new(0.24, 0.0, 0.0));
        let img = render_dots(&CameraPose::identity(), &plate, &k).unwrap();
        assert!(matches!(detect_dots(&img, 4), Err(Error::FeatureLoss { expected: 4, .. })));
        let blank = Image::filled(100, 100, 1, 0.9);
        assert!(matches!(detect_dots(&blank, 4), Err(Error::FeatureLoss { found: 0, .. })));
    }

    #[test]
    fn look_at_identity() {
        let p = CameraPose::look_at(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 1.0, 0.0));
        assert!((p.orientation - Matrix3::identity()).amax() < 1e-15);
    }
}
