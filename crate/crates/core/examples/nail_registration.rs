//! Fit an appearance model to a handful of nail images, then find a nail
//! that has been rotated, scaled and shifted inside a larger frame.

use nailforce::force::ForceVector;
use nailforce::imaging::Image;
use nailforce::registration::{aam_search, piecewise_warp, render_shape, AppearanceModel};
use nailforce::synth::NailForwardModel;

fn main() -> nailforce::Result<()> {
    let nail = NailForwardModel::standard(64, 32, 0.0, 5);
    let template = nail.geometry().landmarks();

    let corners: Vec<ForceVector> = (0..8u32)
        .map(|k| {
            ForceVector::new(
                if k & 1 == 0 { -3.0 } else { 3.0 },
                if k & 2 == 0 { -6.0 } else { 6.0 },
                if k & 4 == 0 { 0.0 } else { 18.0 },
            )
        })
        .collect();
    let images: Vec<Image> = corners.iter().enumerate().map(|(i, f)| nail.render(*f, i as u64)).collect();
    let model = AppearanceModel::train(&images, &vec![template.clone(); images.len()], template.clone(), 64, 32)?;
    let tri = &model.triangulation;
    println!(
        "{} landmarks, {} triangles, {} template pixels",
        template.len(),
        tri.triangles.len(),
        tri.samples().len()
    );

    // Place the nail in a 128x96 frame with a known similarity transform.
    let (h, w) = (128, 96);
    let (cx, cy) = template.centroid();
    let home = template.translated(w as f64 / 2.0 - cx, h as f64 / 2.0 - cy);
    let truth = home.similarity(1.06, 7f64.to_radians(), 6.0, -5.0, home.centroid());
    let texture = nail.render(ForceVector::new(1.0, -2.0, 8.0), 99);
    let frame = render_shape(&texture, tri, &truth, h, w, 0.0)?;

    let found = aam_search(&model, tri, &frame, &home)?;
    println!(
        "converged = {} after {} iterations, residual {:.2e}, mean landmark error {:.3} px",
        found.converged,
        found.iterations,
        found.residual,
        found.shape.mean_distance(&truth)
    );

    let registered = piecewise_warp(&frame, &found.shape, tri)?;
    let diff = tri
        .samples()
        .iter()
        .map(|s| (registered.pixels()[s.index] - texture.pixels()[s.index]).abs())
        .sum::<f64>()
        / tri.samples().len() as f64;
    println!("registered image vs original texture: mean |difference| {diff:.2e}");
    Ok(())
}
