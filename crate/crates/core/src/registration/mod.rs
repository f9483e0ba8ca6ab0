//! Landmark shapes, shape/texture/appearance models, Delaunay
//! triangulation, piecewise-linear warping and appearance-model search.

mod appearance;
mod search;
mod shape;
mod triangulation;
mod warp;

pub use appearance::{
    combine_appearance, fit_texture_model, read_landmarks_csv, shape_weight, write_landmarks_csv,
    AppearanceModel, CombinedModel, TextureModel, APPEARANCE_FORMAT,
};
pub use search::{aam_search, aam_search_with, SearchConfig, SearchResult, Termination};
pub use shape::{fit_shape_model, procrustes_align, LandmarkShape, ShapeModel};
pub use triangulation::{delaunay, PixelSample, Triangulation};
pub use warp::{image_to_texture, piecewise_warp, render_shape, texture_to_image, warp_texture};
