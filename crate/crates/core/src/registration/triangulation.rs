//! Delaunay triangulation of the template landmarks and the per-pixel
//! barycentric lookup used by the piecewise-linear warp.

use serde::{Deserialize, Serialize};

use super::LandmarkShape;
use crate::error::{Error, Result};

/// A template pixel covered by a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelSample {
    /// Flat index `row * width + col` into the template image.
    pub index: usize,
    pub triangle: usize,
    pub bary: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub template: LandmarkShape,
    /// Vertex index triples with positive signed area.
    pub triangles: Vec<[usize; 3]>,
    pub height: usize,
    pub width: usize,
    #[serde(skip)]
    samples: Vec<PixelSample>,
}

/// Twice the signed area; positive for counter-clockwise in `(x, y)`.
pub(crate) fn signed_area2(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn in_circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> bool {
    let (ax, ay) = (a.0 - p.0, a.1 - p.1);
    let (bx, by) = (b.0 - p.0, b.1 - p.1);
    let (cx, cy) = (c.0 - p.0, c.1 - p.1);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    let scale = (ax * ax + ay * ay + bx * bx + by * by + cx * cx + cy * cy).powi(2);
    // strict: co-circular points keep the triangle created first
    det > 1e-12 * scale
}

/// Bowyer-Watson over points inserted in lexicographic order.
pub fn delaunay(points: &[(f64, f64)]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::domain(format!("need at least 3 points, got {n}")));
    }
    let (mut minx, mut miny, mut maxx, mut maxy) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in points {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::domain("non-finite landmark"));
        }
        minx = minx.min(x);
        miny = miny.min(y);
        maxx = maxx.max(x);
        maxy = maxy.max(y);
    }
    let span = (maxx - minx).max(maxy - miny).max(1.0);
    let (mx, my) = ((minx + maxx) / 2.0, (miny + maxy) / 2.0);
    let mut pts = points.to_vec();
    pts.push((mx - 20.0 * span, my - 20.0 * span));
    pts.push((mx + 20.0 * span, my - 20.0 * span));
    pts.push((mx, my + 20.0 * span));

    let ccw = |t: [usize; 3], pts: &[(f64, f64)]| -> [usize; 3] {
        if signed_area2(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0 {
            [t[0], t[2], t[1]]
        } else {
            t
        }
    };
    let mut tris: Vec<[usize; 3]> = vec![ccw([n, n + 1, n + 2], &pts)];

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .partial_cmp(&pts[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in &order {
        let p = pts[i];
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
            .into_iter()
            .partition(|t| in_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], p));
        let bad = if bad.is_empty() {
            // p on a circumcircle boundary only; fall back to the containing triangle
            let mut keep = keep;
            let pos = keep
                .iter()
                .position(|t| contains(&pts, *t, p))
                .ok_or_else(|| Error::domain("point outside triangulation"))?;
            let t = keep.remove(pos);
            tris = keep;
            vec![t]
        } else {
            tris = keep;
            bad
        };
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for t in &bad {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let shared = bad.iter().filter(|u| has_edge(u, a, b)).count();
                if shared == 1 {
                    edges.push((a, b));
                }
            }
        }
        for (a, b) in edges {
            if signed_area2(pts[a], pts[b], p).abs() > 0.0 {
                tris.push(ccw([a, b, i], &pts));
            }
        }
    }
    let mut out: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .filter(|t| signed_area2(points[t[0]], points[t[1]], points[t[2]]) > 1e-12)
        .collect();
    // canonical order: rotate so the smallest index comes first, then sort
    for t in &mut out {
        let k = (0..3).min_by_key(|&k| t[k]).unwrap();
        t.rotate_left(k);
    }
    out.sort();
    Ok(out)
}

fn has_edge(t: &[usize; 3], a: usize, b: usize) -> bool {
    let e = [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])];
    e.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
}

fn contains(pts: &[(f64, f64)], t: [usize; 3], p: (f64, f64)) -> bool {
    barycentric(pts[t[0]], pts[t[1]], pts[t[2]], p).is_some_and(|l| l.iter().all(|v| *v >= -1e-12))
}

pub(crate) fn barycentric(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> Option<[f64; 3]> {
    let d = signed_area2(a, b, c);
    if d == 0.0 {
        return None;
    }
    let l1 = signed_area2(p, b, c) / d;
    let l2 = signed_area2(a, p, c) / d;
    Some([l1, l2, 1.0 - l1 - l2])
}

impl Triangulation {
    /// Delaunay triangulation of `template` for a `height` x `width` frame.
    pub fn new(template: LandmarkShape, height: usize, width: usize) -> Result<Self> {
        let triangles = delaunay(template.points())?;
        Self::with_triangles(template, triangles, height, width)
    }

    pub fn with_triangles(
        template: LandmarkShape,
        triangles: Vec<[usize; 3]>,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let pts = template.points();
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= pts.len()) {
                return Err(Error::domain(format!("triangle {i} references a missing landmark")));
            }
            let area = signed_area2(pts[t[0]], pts[t[1]], pts[t[2]]) / 2.0;
            if area <= 1e-9 {
                return Err(Error::DegenerateTriangle { triangle: i, area });
            }
        }
        let mut tri = Triangulation {
            template,
            triangles,
            height,
            width,
            samples: Vec::new(),
        };
        tri.build_samples();
        Ok(tri)
    }

    fn build_samples(&mut self) {
        let pts = self.template.points();
        let mut samples = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let p = (c as f64, r as f64);
                for (k, t) in self.triangles.iter().enumerate() {
                    let Some(l) = barycentric(pts[t[0]], pts[t[1]], pts[t[2]], p) else {
                        continue;
                    };
                    if l.iter().all(|v| *v >= -1e-9) {
                        samples.push(PixelSample {
                            index: r * self.width + c,
                            triangle: k,
                            bary: l,
                        });
                        break;
                    }
                }
            }
        }
        self.samples = samples;
    }

    /// Rebuilds the pixel lookup after deserialization.
    pub fn restore(mut self) -> Self {
        self.build_samples();
        self
    }

    pub fn samples(&self) -> &[PixelSample] {
        &self.samples
    }

    /// Template pixels covered by the triangulation, as flat indices.
    pub fn hull_indices(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.index).collect()
    }

    /// Checks every triangle of `shape` for a usable (non-degenerate) area.
    pub fn check_shape(&self, shape: &LandmarkShape) -> Result<()> {
        if shape.len() != self.template.len() {
            return Err(Error::domain(format!(
                "shape has {} points, template has {}",
                shape.len(),
                self.template.len()
            )));
        }
        let p = shape.points();
        for (i, t) in self.triangles.iter().enumerate() {
            let area = signed_area2(p[t[0]], p[t[1]], p[t[2]]) / 2.0;
            if area.abs() < 1e-9 || !area.is_finite() {
                return Err(Error::DegenerateTriangle { triangle: i, area });
            }
        }
        Ok(())
    }
}
