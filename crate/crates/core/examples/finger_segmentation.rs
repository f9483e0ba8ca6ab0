//! Segment synthetic camera frames: threshold skin in HSV, label the
//! finger blobs and cut a fixed-size crop around each nail.
//!
//! Pass a directory to also write the crops as PPM files.

use std::path::PathBuf;

use nailforce::imaging::write_image;
use nailforce::segmentation::{crop_file_name, segment_frame, CameraSide, SegmentationConfig};
use nailforce::synth::CameraFrameRenderer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: Option<PathBuf> = std::env::args().nth(1).map(PathBuf::from);
    let renderer = CameraFrameRenderer::default();
    let cfg = SegmentationConfig::default();

    for frame in 0..3u64 {
        for (side, shot) in [
            (CameraSide::FingerSide, renderer.finger_frame(11, frame)),
            (CameraSide::ThumbSide, renderer.thumb_frame(11, frame)),
        ] {
            let detections = segment_frame(&shot.image, side, &cfg)?;
            for d in &detections {
                let truth = shot.centers.iter().find(|(f, _)| *f == d.finger).map(|(_, c)| *c);
                let (r, c) = d.blob.centroid;
                print!(
                    "frame {frame} {:>6}: area {:6} centroid ({r:6.1}, {c:6.1})",
                    d.finger.as_str(),
                    d.blob.area
                );
                if let Some((tr, tc)) = truth {
                    print!("  true center ({tr:6.1}, {tc:6.1})");
                }
                println!("  crop {}x{}", d.crop.height(), d.crop.width());
                if let Some(dir) = &out {
                    std::fs::create_dir_all(dir)?;
                    let name = crop_file_name("example", d.finger, frame as usize);
                    write_image(&d.crop, dir.join(name))?;
                }
            }
        }
    }
    Ok(())
}
