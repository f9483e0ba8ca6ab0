//! Render a calibration grid with the synthetic nail, fit the eigen-image
//! force model and check it on forces it never saw.
//!
//! ```bash
//! cargo run --example eigennail_calibration -- 0.01
//! ```
//! The optional argument is the image noise sigma.

use nailforce::eigennail::EigenNailModel;
use nailforce::force::ForceVector;
use nailforce::imaging::Image;
use nailforce::synth::{make_grid, CalibrationGrid, NailForwardModel, FORCE_LIMITS};

fn main() -> nailforce::Result<()> {
    let sigma: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let nail = NailForwardModel::standard(64, 32, sigma, 1);
    let forces = make_grid(&CalibrationGrid::medium())?;
    let images: Vec<Image> = forces.iter().enumerate().map(|(i, f)| nail.render(*f, i as u64)).collect();

    let model = EigenNailModel::train(&images, &forces)?;
    println!("{} calibration images, {} eigen-nails retained", images.len(), model.k());

    let probes = [
        ForceVector::new(0.0, 0.0, 5.0),
        ForceVector::new(1.5, -2.0, 9.0),
        ForceVector::new(-2.5, 4.0, 14.0),
        ForceVector::new(FORCE_LIMITS[0], FORCE_LIMITS[1], FORCE_LIMITS[2]),
    ];
    println!("{:>26}  {:>26}", "applied (N)", "estimated (N)");
    for (i, f) in probes.iter().enumerate() {
        let p = model.predict(&nail.render(*f, 10_000 + i as u64))?;
        println!(
            "[{:6.2} {:6.2} {:6.2}]  [{:6.2} {:6.2} {:6.2}]{}",
            f.fx,
            f.fy,
            f.fz,
            p.force.fx,
            p.force.fy,
            p.force.fz,
            if p.extrapolated { "  (outside training range)" } else { "" }
        );
    }

    let path = std::env::temp_dir().join("eigennail_example.json");
    model.save(&path)?;
    let reloaded = EigenNailModel::load(&path)?;
    println!("saved to {} and reloaded, k = {}", path.display(), reloaded.k());
    Ok(())
}
