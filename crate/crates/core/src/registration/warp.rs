//! Piecewise-linear warping between a landmark shape in a source image and
//! the template frame of a [`Triangulation`].

use super::triangulation::{barycentric, Triangulation};
use super::LandmarkShape;
use crate::error::{Error, Result};
use crate::imaging::Image;

/// Source position of every covered template pixel, in sample order.
fn source_positions(src: &LandmarkShape, tri: &Triangulation) -> Result<Vec<(f64, f64)>> {
    tri.check_shape(src)?;
    let p = src.points();
    Ok(tri
        .samples()
        .iter()
        .map(|s| {
            let t = tri.triangles[s.triangle];
            let [l0, l1, l2] = s.bary;
            (
                l0 * p[t[0]].0 + l1 * p[t[1]].0 + l2 * p[t[2]].0,
                l0 * p[t[0]].1 + l1 * p[t[1]].1 + l2 * p[t[2]].1,
            )
        })
        .collect())
}

/// Shape-normalized texture: the source image sampled at every covered
/// template pixel, in [`Triangulation::samples`] order.
pub fn warp_texture(img: &Image, src: &LandmarkShape, tri: &Triangulation) -> Result<Vec<f64>> {
    let gray;
    let img = if img.channels() == 1 {
        img
    } else {
        gray = img.to_gray();
        &gray
    };
    Ok(source_positions(src, tri)?
        .into_iter()
        .map(|(x, y)| img.sample_bilinear(x, y, 0.0))
        .collect())
}

/// Warps the region outlined by `src` onto the template frame. Template
/// pixels outside every triangle are 0; RGB input is converted to luma.
pub fn piecewise_warp(img: &Image, src: &LandmarkShape, tri: &Triangulation) -> Result<Image> {
    let texture = warp_texture(img, src, tri)?;
    Ok(texture_to_image(&texture, tri))
}

/// Scatters a sample-ordered texture into a full template image.
pub fn texture_to_image(texture: &[f64], tri: &Triangulation) -> Image {
    let mut out = vec![0.0; tri.height * tri.width];
    for (s, v) in tri.samples().iter().zip(texture) {
        out[s.index] = *v;
    }
    Image::gray_from_clamped(tri.height, tri.width, out).expect("template size")
}

/// Gathers the covered pixels of a template image in sample order.
pub fn image_to_texture(img: &Image, tri: &Triangulation) -> Result<Vec<f64>> {
    if img.dims() != (tri.height, tri.width) || img.channels() != 1 {
        return Err(Error::domain(format!(
            "template image must be {}x{} gray, got {}x{}x{}",
            tri.height,
            tri.width,
            img.height(),
            img.width(),
            img.channels()
        )));
    }
    Ok(tri.samples().iter().map(|s| img.pixels()[s.index]).collect())
}

/// Inverse of [`piecewise_warp`]: draws a template-frame image into a
/// `height` x `width` canvas so that the template landmarks land on
/// `target`. Canvas pixels outside the target hull are sampled through the
/// least-squares similarity between the two shapes; the template is
/// extended by `fill` beyond its border.
pub fn render_shape(
    template: &Image,
    tri: &Triangulation,
    target: &LandmarkShape,
    height: usize,
    width: usize,
    fill: f64,
) -> Result<Image> {
    tri.check_shape(target)?;
    let tp = tri.template.points();
    let sp = target.points();
    let [a, b, tx, ty] = super::shape::fit_similarity(sp, tp);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let p = (c as f64, r as f64);
            let mut src = None;
            for t in &tri.triangles {
                let Some(l) = barycentric(sp[t[0]], sp[t[1]], sp[t[2]], p) else {
                    continue;
                };
                if l.iter().all(|v| *v >= -1e-9) {
                    src = Some((
                        l[0] * tp[t[0]].0 + l[1] * tp[t[1]].0 + l[2] * tp[t[2]].0,
                        l[0] * tp[t[0]].1 + l[1] * tp[t[1]].1 + l[2] * tp[t[2]].1,
                    ));
                    break;
                }
            }
            let (x, y) = src.unwrap_or((a * p.0 - b * p.1 + tx, b * p.0 + a * p.1 + ty));
            out.push(template.sample_bilinear(x, y, fill));
        }
    }
    Image::gray_from_clamped(height, width, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{NailForwardModel, NailGeometry};

    fn setup() -> (Triangulation, Image) {
        let geom = NailGeometry::new(64, 32);
        let tri = Triangulation::new(geom.landmarks(), 64, 32).unwrap();
        let img = Image::gray_from_fn(64, 32, |r, c| {
            0.5 + 0.3 * (r as f64 * 0.21).sin() * (c as f64 * 0.33).cos()
        });
        (tri, img)
    }

    #[test]
    fn identity_warp_reproduces_hull() {
        let (tri, img) = setup();
        let out = piecewise_warp(&img, &tri.template, &tri).unwrap();
        for s in tri.samples() {
            assert!((out.pixels()[s.index] - img.pixels()[s.index]).abs() <= 1e-9);
        }
    }

    #[test]
    fn outside_hull_is_zero() {
        let (tri, img) = setup();
        let out = piecewise_warp(&img, &tri.template, &tri).unwrap();
        // the template corners are outside the landmark hull
        assert_eq!(out.get(0, 0, 0), 0.0);
        assert_eq!(out.get(63, 31, 0), 0.0);
    }

    #[test]
    fn exact_for_affine_motion() {
        let (tri, _) = setup();
        // a linear ramp is reproduced exactly by bilinear sampling
        let src_img = Image::gray_from_fn(120, 120, |r, c| 0.002 * r as f64 + 0.003 * c as f64);
        let (a, b, c, d, e, f) = (1.1, 0.2, -0.15, 0.95, 30.0, 25.0);
        let moved = LandmarkShape::new(
            tri.template
                .points()
                .iter()
                .map(|&(x, y)| (a * x + b * y + e, c * x + d * y + f))
                .collect(),
        );
        let out = piecewise_warp(&src_img, &moved, &tri).unwrap();
        for s in tri.samples() {
            let (x, y) = ((s.index % 32) as f64, (s.index / 32) as f64);
            let (sx, sy) = (a * x + b * y + e, c * x + d * y + f);
            let expect = 0.002 * sy + 0.003 * sx;
            assert!((out.pixels()[s.index] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn collapsed_triangle_is_reported() {
        let (tri, img) = setup();
        let mut pts = tri.template.points().to_vec();
        let t = tri.triangles[0];
        pts[t[1]] = pts[t[0]];
        let err = piecewise_warp(&img, &LandmarkShape::new(pts), &tri).unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { .. }));
    }

    #[test]
    fn render_then_warp_round_trips() {
        let model = NailForwardModel::standard(64, 32, 0.0, 1);
        let tri = Triangulation::new(model.geometry().landmarks(), 64, 32).unwrap();
        let target = tri.template.translated(12.0, 9.0);
        let canvas = render_shape(&model.mean_image, &tri, &target, 96, 64, 0.12).unwrap();
        let back = piecewise_warp(&canvas, &target, &tri).unwrap();
        for s in tri.samples() {
            assert!((back.pixels()[s.index] - model.mean_image.pixels()[s.index]).abs() < 1e-9);
        }
    }
}
