use crate::eigennail::{EigenNailModel, Prediction};
use crate::error::{Error, Result};
use crate::force::ForceVector;
use crate::imaging::Image;
use crate::registration::{aam_search_with, piecewise_warp, AppearanceModel, LandmarkShape, SearchConfig, SearchResult};
use crate::segmentation::{connected_components, Mask};

/// Locates the nail in a frame, registers it onto the template and maps
/// the registered image to a force.
#[derive(Debug, Clone)]
pub struct NailEstimator {
    pub appearance: AppearanceModel,
    pub eigennail: EigenNailModel,
    pub search: SearchConfig,
    /// Smallest nail blob accepted when seeding the search, pixels.
    pub min_blob_area: usize,
}

#[derive(Debug, Clone)]
pub struct FrameEstimate {
    pub force: ForceVector,
    pub prediction: Prediction,
    pub search: SearchResult,
    pub seed: LandmarkShape,
}

impl NailEstimator {
    pub fn new(appearance: AppearanceModel, eigennail: EigenNailModel, search: SearchConfig) -> Self {
        NailEstimator {
            appearance,
            eigennail,
            search,
            min_blob_area: 200,
        }
    }

    /// Template landmarks centered on the largest bright blob. The threshold
    /// sits halfway between the frame median and the mean texture level.
    pub fn seed_shape(&self, img: &Image) -> Result<LandmarkShape> {
        let gray;
        let img = if img.channels() == 1 {
            img
        } else {
            gray = img.to_gray();
            &gray
        };
        let (h, w) = img.dims();
        let mut sorted = img.pixels().to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let tex = self.appearance.texture.mean();
        let level = tex.iter().sum::<f64>() / tex.len().max(1) as f64;
        let threshold = (median + level) / 2.0;
        let mut mask = Mask::new(h, w);
        for (m, p) in mask.data.iter_mut().zip(img.pixels()) {
            *m = *p > threshold;
        }
        let blob = connected_components(&mask, self.min_blob_area)
            .into_iter()
            .max_by_key(|b| b.area)
            .ok_or(Error::DetectionCount { expected: 1, found: 0 })?;
        let template = self.appearance.template();
        let (cx, cy) = template.centroid();
        Ok(template.translated(blob.centroid.1 - cx, blob.centroid.0 - cy))
    }

    pub fn estimate(&self, img: &Image) -> Result<FrameEstimate> {
        let seed = self.seed_shape(img)?;
        let tri = &self.appearance.triangulation;
        let search = aam_search_with(&self.appearance, tri, img, &seed, &self.search)?;
        if !search.converged {
            return Err(Error::domain(format!(
                "registration did not converge (residual {:.3e}, {:?})",
                search.residual, search.termination
            )));
        }
        let registered = piecewise_warp(img, &search.shape, tri)?;
        let prediction = self.eigennail.predict(&registered)?;
        Ok(FrameEstimate {
            force: prediction.force,
            prediction,
            search,
            seed,
        })
    }
}
