//! Finger detection in camera frames: HSV skin thresholding, 4-connected
//! components, top-to-bottom labeling and fixed-size crops around each
//! detected finger.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::FingerId;
use crate::imaging::{centered_origin, crop, rgb_to_hsv_unchecked, Image};

/// Skin color band in HSV, hue in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkinBand {
    pub h_lo: f64,
    pub h_hi: f64,
    pub s_min: f64,
    pub v_min: f64,
}

impl Default for SkinBand {
    fn default() -> Self {
        SkinBand {
            h_lo: 0.02,
            h_hi: 0.12,
            s_min: 0.15,
            v_min: 0.2,
        }
    }
}

impl SkinBand {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.h_lo && self.h_lo < self.h_hi && self.h_hi < 1.0) {
            return Err(Error::domain(format!(
                "hue band [{}, {}] must satisfy 0 <= lo < hi < 1",
                self.h_lo, self.h_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize) -> Self {
        Mask {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

/// True where `h in [h_lo, h_hi]`, `s >= s_min` and `v >= v_min`.
pub fn threshold_skin(img: &Image, band: &SkinBand) -> Result<Mask> {
    band.validate()?;
    if img.channels() != 3 {
        return Err(Error::domain("skin thresholding needs an RGB image"));
    }
    let mut mask = Mask::new(img.height(), img.width());
    for r in 0..img.height() {
        for c in 0..img.width() {
            let p = rgb_to_hsv_unchecked(img.rgb(r, c));
            let hit = p.h >= band.h_lo && p.h <= band.h_hi && p.s >= band.s_min && p.v >= band.v_min;
            mask.set(r, c, hit);
        }
    }
    Ok(mask)
}

/// Bounding box, inclusive on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub area: usize,
    pub bbox: BoundingBox,
    /// `(row, col)`.
    pub centroid: (f64, f64),
}

/// 4-connected components with at least `min_area` pixels, sorted by
/// centroid row (then column).
pub fn connected_components(mask: &Mask, min_area: usize) -> Vec<Blob> {
    let (h, w) = (mask.height, mask.width);
    let mut seen = vec![false; h * w];
    let mut blobs = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut area, mut sr, mut sc) = (0usize, 0.0, 0.0);
        let mut bbox = BoundingBox {
            top: usize::MAX,
            left: usize::MAX,
            bottom: 0,
            right: 0,
        };
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            area += 1;
            sr += r as f64;
            sc += c as f64;
            bbox.top = bbox.top.min(r);
            bbox.bottom = bbox.bottom.max(r);
            bbox.left = bbox.left.min(c);
            bbox.right = bbox.right.max(c);
            let mut visit = |j: usize| {
                if mask.data[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        if area >= min_area {
            blobs.push(Blob {
                area,
                bbox,
                centroid: (sr / area as f64, sc / area as f64),
            });
        }
    }
    blobs.sort_by(|a, b| {
        a.centroid
            .partial_cmp(&b.centroid)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    blobs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraSide {
    /// Sees index, middle and ring, top to bottom.
    FingerSide,
    ThumbSide,
}

impl CameraSide {
    pub fn fingers(self) -> &'static [FingerId] {
        match self {
            CameraSide::FingerSide => &FingerId::FINGERS,
            CameraSide::ThumbSide => &[FingerId::Thumb],
        }
    }
}

/// Assigns finger identities to row-sorted blobs.
pub fn label_fingers(blobs: &[Blob], camera: CameraSide) -> Result<Vec<(FingerId, Blob)>> {
    let fingers = camera.fingers();
    if blobs.len() != fingers.len() {
        return Err(Error::DetectionCount {
            expected: fingers.len(),
            found: blobs.len(),
        });
    }
    let mut sorted = blobs.to_vec();
    sorted.sort_by(|a, b| {
        a.centroid
            .partial_cmp(&b.centroid)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(fingers.iter().copied().zip(sorted).collect())
}

/// Crop window size `(rows, cols)`.
pub const CROP_SIZE: (usize, usize) = (600, 300);

/// `CROP_SIZE` window centered on the blob centroid, zero beyond the frame.
pub fn crop_nail(img: &Image, blob: &Blob) -> Image {
    crop_nail_sized(img, blob, CROP_SIZE)
}

pub fn crop_nail_sized(img: &Image, blob: &Blob, size: (usize, usize)) -> Image {
    let (top, left) = centered_origin(blob.centroid.0, blob.centroid.1, size.0, size.1);
    crop(img, top, left, size.0, size.1, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub band: SkinBand,
    pub min_area: usize,
    pub crop_rows: usize,
    pub crop_cols: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            band: SkinBand::default(),
            min_area: 2000,
            crop_rows: CROP_SIZE.0,
            crop_cols: CROP_SIZE.1,
        }
    }
}

/// One labeled finger of a frame with its crop.
#[derive(Debug, Clone)]
pub struct Detection {
    pub finger: FingerId,
    pub blob: Blob,
    pub crop: Image,
}

/// Threshold, label and crop one frame.
pub fn segment_frame(img: &Image, camera: CameraSide, cfg: &SegmentationConfig) -> Result<Vec<Detection>> {
    let mask = threshold_skin(img, &cfg.band)?;
    let blobs = connected_components(&mask, cfg.min_area);
    let labeled = label_fingers(&blobs, camera)?;
    Ok(labeled
        .into_iter()
        .map(|(finger, blob)| Detection {
            finger,
            blob,
            crop: crop_nail_sized(img, &blob, (cfg.crop_rows, cfg.crop_cols)),
        })
        .collect())
}

/// Row of the detection log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: usize,
    pub finger: FingerId,
    pub centroid_row: f64,
    pub centroid_col: f64,
    pub area: usize,
}

pub fn write_detection_log(path: impl AsRef<Path>, records: &[DetectionRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `<trial>_<finger>_<frame>.pgm`
pub fn crop_file_name(trial: &str, finger: FingerId, frame: usize) -> String {
    format!("{trial}_{finger}_{frame}.pgm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{hsv_to_rgb, Hsv};

    fn rgb_image(h: usize, w: usize, f: impl Fn(usize, usize) -> (f64, f64, f64)) -> Image {
        let mut px = Vec::with_capacity(h * w * 3);
        for r in 0..h {
            for c in 0..w {
                let (a, b, d) = f(r, c);
                px.extend([a, b, d]);
            }
        }
        Image::new(h, w, 3, px).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let band = SkinBand::default();
        let red = rgb_image(1, 1, |_, _| (1.0, 0.0, 0.0));
        assert!(!threshold_skin(&red, &band).unwrap().get(0, 0));
        let skin = hsv_to_rgb(Hsv { h: 0.07, s: 0.5, v: 0.8 });
        let img = rgb_image(1, 1, |_, _| (skin.r, skin.g, skin.b));
        assert!(threshold_skin(&img, &band).unwrap().get(0, 0));
        let gray = rgb_image(1, 1, |_, _| (0.5, 0.5, 0.5));
        assert!(!threshold_skin(&gray, &band).unwrap().get(0, 0));
        let bad = SkinBand { h_lo: 0.2, h_hi: 0.1, ..band };
        assert!(threshold_skin(&img, &bad).is_err());
    }

    #[test]
    fn component_examples() {
        assert!(connected_components(&Mask::new(20, 20), 1).is_empty());
        let mut m = Mask::new(120, 30);
        for r in 0..10 {
            for c in 0..10 {
                m.set(r + 100, c, true);
                m.set(r, c + 15, true);
            }
        }
        let blobs = connected_components(&m, 50);
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[0].centroid, (4.5, 19.5));
        assert_eq!(blobs[1].centroid, (104.5, 4.5));
        assert_eq!(blobs[0].bbox, BoundingBox { top: 0, left: 15, bottom: 9, right: 24 });
        let mut speck = Mask::new(10, 10);
        speck.set(1, 1, true);
        speck.set(1, 2, true);
        speck.set(2, 2, true);
        assert!(connected_components(&speck, 2000).is_empty());
    }

    #[test]
    fn diagonal_pixels_are_not_connected() {
        let mut m = Mask::new(2, 2);
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(connected_components(&m, 1).len(), 2);
    }

    fn blob_at(row: f64) -> Blob {
        Blob {
            area: 2500,
            bbox: BoundingBox { top: 0, left: 0, bottom: 1000, right: 600 },
            centroid: (row, 300.0),
        }
    }

    #[test]
    fn labels_follow_row_order() {
        let blobs = [blob_at(500.0), blob_at(100.0), blob_at(300.0)];
        let l = label_fingers(&blobs, CameraSide::FingerSide).unwrap();
        assert_eq!(l[0], (FingerId::Index, blob_at(100.0)));
        assert_eq!(l[1], (FingerId::Middle, blob_at(300.0)));
        assert_eq!(l[2], (FingerId::Ring, blob_at(500.0)));
        let t = label_fingers(&[blob_at(40.0)], CameraSide::ThumbSide).unwrap();
        assert_eq!(t[0].0, FingerId::Thumb);
        let err = label_fingers(&blobs[..2], CameraSide::FingerSide).unwrap_err();
        assert!(matches!(err, Error::DetectionCount { expected: 3, found: 2 }));
    }

    #[test]
    fn crop_window_arithmetic() {
        let img = Image::filled(1024, 680, 1, 0.5);
        let mut b = blob_at(512.0);
        b.centroid.1 = 340.0;
        assert_eq!(centered_origin(512.0, 340.0, 600, 300), (212, 190));
        let c = crop_nail(&img, &b);
        assert_eq!(c.dims(), (600, 300));
        b.centroid = (10.0, 10.0);
        let c = crop_nail(&img, &b);
        assert_eq!(c.dims(), (600, 300));
        assert_eq!(c.get(0, 0, 0), 0.0);
        assert_eq!(c.get(599, 299, 0), 0.5);
    }
}
