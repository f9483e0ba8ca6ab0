//! Iterative appearance-model search.
//!
//! The unknowns are a similarity pose about the template centroid and the
//! shape-model parameters. Texture parameters are not searched: for any
//! trial shape the warped texture is projected onto the texture model and
//! only the part the model cannot explain counts as residual. The pose and
//! shape parameters are refined by damped Gauss-Newton with a
//! finite-difference Jacobian that is reused across iterations and refreshed
//! periodically or whenever a line search fails.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::appearance::AppearanceModel;
use super::shape::{fit_similarity, LandmarkShape};
use super::triangulation::Triangulation;
use super::warp::warp_texture;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::pca;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step improves the residual by less than this
    /// relative amount.
    pub tolerance: f64,
    /// Iterations between Jacobian refreshes.
    pub jacobian_refresh: usize,
    /// Central-difference step, pixels.
    pub fd_step: f64,
    /// Largest residual (mean squared intensity) reported as converged.
    pub max_residual: f64,
    /// Half-width in pixels of the translation grid scanned around the
    /// initial pose before the first Gauss-Newton step; 0 disables it.
    pub scan_radius: f64,
    pub scan_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iterations: 50,
            tolerance: 1e-4,
            jacobian_refresh: 5,
            fd_step: 0.5,
            max_residual: 1e-3,
            scan_radius: 12.0,
            scan_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Relative improvement fell below the tolerance.
    Tolerance,
    /// No step along a fresh Gauss-Newton direction lowered the residual.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub shape: LandmarkShape,
    /// Mean squared texture residual over the covered template pixels.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub shape_params: Vec<f64>,
    pub texture_params: Vec<f64>,
    /// Residual after each accepted iteration, starting with the initial one.
    pub history: Vec<f64>,
}

/// Parameter vector layout: `[tx, ty, sa, sb, p_1 .. p_m]` where the pose
/// maps a template-frame point `x` to `A (x - c0) + c0 + t` with
/// `A = [[1 + sa/R, -sb/R], [sb/R, 1 + sa/R]]`, `R` the RMS template radius,
/// so every parameter moves the landmarks by about one pixel per unit.
struct Params<'a> {
    template: &'a LandmarkShape,
    centroid: (f64, f64),
    radius: f64,
    modes: Vec<Vec<f64>>,
}

impl<'a> Params<'a> {
    fn new(model: &AppearanceModel, template: &'a LandmarkShape) -> Self {
        let centroid = template.centroid();
        let n = template.len() as f64;
        let radius = (template
            .points()
            .iter()
            .map(|p| (p.0 - centroid.0).powi(2) + (p.1 - centroid.1).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            .max(1.0);
        // unit RMS point displacement per parameter
        let modes = model
            .shape
            .components_in_frame(template)
            .into_iter()
            .map(|m| {
                let rms = (m.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
                if rms > 0.0 {
                    m.iter().map(|v| v / rms).collect()
                } else {
                    m
                }
            })
            .collect();
        Params {
            template,
            centroid,
            radius,
            modes,
        }
    }

    fn len(&self) -> usize {
        4 + self.modes.len()
    }

    fn shape(&self, theta: &[f64]) -> LandmarkShape {
        let mut pts = self.template.to_flat();
        for (mode, &p) in self.modes.iter().zip(&theta[4..]) {
            for (o, m) in pts.iter_mut().zip(mode) {
                *o += p * m;
            }
        }
        let a = 1.0 + theta[2] / self.radius;
        let b = theta[3] / self.radius;
        let (cx, cy) = self.centroid;
        LandmarkShape::new(
            pts.chunks_exact(2)
                .map(|p| {
                    let (x, y) = (p[0] - cx, p[1] - cy);
                    (a * x - b * y + cx + theta[0], b * x + a * y + cy + theta[1])
                })
                .collect(),
        )
    }

    /// Pose parameters placing the template as close as possible to `init`.
    fn encode_shape(&self, init: &LandmarkShape) -> Vec<f64> {
        let [a, b, tx, ty] = fit_similarity(self.template.points(), init.points());
        let (cx, cy) = self.centroid;
        // A c0 + t_raw = c0 + t
        let t0 = a * cx - b * cy + tx - cx;
        let t1 = b * cx + a * cy + ty - cy;
        let mut theta = vec![0.0; self.len()];
        theta[0] = t0;
        theta[1] = t1;
        theta[2] = (a - 1.0) * self.radius;
        theta[3] = b * self.radius;
        theta
    }

    /// Best-fitting mode parameters for `init` once the pose is fixed.
    fn fit_modes(&self, theta: &mut [f64], init: &LandmarkShape) {
        if self.modes.is_empty() {
            return;
        }
        let posed = self.shape(theta);
        let a = 1.0 + theta[2] / self.radius;
        let b = theta[3] / self.radius;
        let det = a * a + b * b;
        // residual mapped back into the template frame
        let diff: Vec<f64> = init
            .points()
            .iter()
            .zip(posed.points())
            .flat_map(|(p, q)| {
                let (dx, dy) = (p.0 - q.0, p.1 - q.1);
                [(a * dx + b * dy) / det, (-b * dx + a * dy) / det]
            })
            .collect();
        let n = self.template.len() as f64;
        for (k, mode) in self.modes.iter().enumerate() {
            theta[4 + k] = pca::dot(mode, &diff) / n;
        }
    }
}

struct Evaluator<'a> {
    model: &'a AppearanceModel,
    tri: &'a Triangulation,
    img: &'a Image,
    params: Params<'a>,
}

impl Evaluator<'_> {
    /// Residual vector and its mean square; `None` when the shape folds.
    fn eval(&self, theta: &[f64]) -> Option<(Vec<f64>, f64)> {
        let shape = self.params.shape(theta);
        let g = warp_texture(self.img, &shape, self.tri).ok()?;
        let mut r: Vec<f64> = g.iter().zip(self.model.texture.mean()).map(|(a, b)| a - b).collect();
        for v in &self.model.texture.pca.components {
            let w = pca::dot(v, &r);
            for (ri, vi) in r.iter_mut().zip(v) {
                *ri -= w * vi;
            }
        }
        let mse = pca::dot(&r, &r) / r.len().max(1) as f64;
        mse.is_finite().then_some((r, mse))
    }

    fn jacobian(&self, theta: &[f64], h: f64) -> Option<DMatrix<f64>> {
        let m = theta.len();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut t = theta.to_vec();
        for j in 0..m {
            t[j] = theta[j] + h;
            let (rp, _) = self.eval(&t)?;
            t[j] = theta[j] - h;
            let (rm, _) = self.eval(&t)?;
            t[j] = theta[j];
            cols.push(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
        }
        let n = cols.first().map_or(0, Vec::len);
        Some(DMatrix::from_fn(n, m, |i, j| cols[j][i]))
    }
}

fn numerical_rank(j: &DMatrix<f64>) -> usize {
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-8 * max).count()
}

fn gauss_newton_step(j: &DMatrix<f64>, r: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    let svd = j.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    let step = svd.solve(&rhs, 1e-10 * max).ok()?;
    Some(step.iter().copied().collect())
}

/// Searches `img` for the modeled object starting from `init`.
pub fn aam_search(
    model: &AppearanceModel,
    tri: &Triangulation,
    img: &Image,
    init: &LandmarkShape,
) -> Result<SearchResult> {
    aam_search_with(model, tri, img, init, &SearchConfig::default())
}

pub fn aam_search_with(
    model: &AppearanceModel,
    tri: &Triangulation,
    img: &Image,
    init: &LandmarkShape,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    if init.len() != tri.template.len() {
        return Err(Error::domain(format!(
            "initial shape has {} points, template has {}",
            init.len(),
            tri.template.len()
        )));
    }
    if tri.samples().len() != model.texture.mean().len() {
        return Err(Error::domain("triangulation does not match the texture model"));
    }
    let (h, w) = (img.height() as f64, img.width() as f64);
    if let Some(p) = init
        .points()
        .iter()
        .find(|p| !(p.0.is_finite() && p.1.is_finite() && p.0 >= 0.0 && p.1 >= 0.0 && p.0 <= w - 1.0 && p.1 <= h - 1.0))
    {
        return Err(Error::domain(format!(
            "initial landmark ({}, {}) outside the {}x{} image",
            p.0, p.1, img.height(), img.width()
        )));
    }

    let params = Params::new(model, &tri.template);
    let mut theta = params.encode_shape(init);
    params.fit_modes(&mut theta, init);
    let ev = Evaluator {
        model,
        tri,
        img,
        params,
    };
    let (mut r, mut f) = ev
        .eval(&theta)
        .ok_or_else(|| Error::domain("initial shape folds a triangle"))?;
    let mut history = vec![f];
    if cfg.scan_radius > 0.0 && cfg.scan_step > 0.0 {
        let steps = (cfg.scan_radius / cfg.scan_step).floor() as i64;
        let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for i in -steps..=steps {
            for j in -steps..=steps {
                let mut cand = theta.clone();
                cand[0] += j as f64 * cfg.scan_step;
                cand[1] += i as f64 * cfg.scan_step;
                if let Some((rc, fc)) = ev.eval(&cand) {
                    if fc < best.as_ref().map_or(f, |b| b.2) {
                        best = Some((cand, rc, fc));
                    }
                }
            }
        }
        if let Some((cand, rc, fc)) = best {
            theta = cand;
            r = rc;
            f = fc;
            history.push(f);
        }
    }
    let mut jac = ev.jacobian(&theta, cfg.fd_step);
    let mut age = 0usize;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        if f == 0.0 {
            termination = Termination::Tolerance;
            break;
        }
        if age >= cfg.jacobian_refresh {
            jac = ev.jacobian(&theta, cfg.fd_step);
            age = 0;
        }
        let accepted = jac.as_ref().and_then(|j| gauss_newton_step(j, &r)).and_then(|step| {
            let mut alpha = 1.0;
            while alpha >= 1.0 / 16.0 {
                let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + alpha * s).collect();
                if let Some((rc, fc)) = ev.eval(&cand) {
                    if fc < f {
                        return Some((cand, rc, fc));
                    }
                }
                alpha /= 2.0;
            }
            None
        });
        iterations += 1;
        match accepted {
            Some((cand, rc, fc)) => {
                let rel = (f - fc) / f;
                theta = cand;
                r = rc;
                f = fc;
                history.push(f);
                age += 1;
                if rel < cfg.tolerance {
                    termination = Termination::Tolerance;
                    break;
                }
            }
            None if age > 0 => {
                jac = ev.jacobian(&theta, cfg.fd_step);
                age = 0;
            }
            None => {
                termination = Termination::Stalled;
                break;
            }
        }
    }

    let full_rank = ev
        .jacobian(&theta, cfg.fd_step)
        .is_some_and(|j| numerical_rank(&j) == theta.len());
    let shape = ev.params.shape(&theta);
    let texture = warp_texture(img, &shape, tri)?;
    let converged = termination != Termination::MaxIterations && full_rank && f <= cfg.max_residual;
    Ok(SearchResult {
        texture_params: model.texture.params(&texture),
        shape_params: theta[4..].to_vec(),
        shape,
        residual: f,
        iterations,
        converged,
        termination,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceVector;
    use crate::registration::render_shape;
    use crate::synth::{NailForwardModel, BACKGROUND};

    fn model() -> (AppearanceModel, NailForwardModel) {
        let nail = NailForwardModel::standard(64, 32, 0.0, 5);
        let lm = nail.geometry().landmarks();
        let imgs: Vec<Image> = (0..8u64)
            .map(|k| {
                let f = ForceVector::new(
                    if k & 1 == 0 { -3.0 } else { 3.0 },
                    if k & 2 == 0 { -6.0 } else { 6.0 },
                    if k & 4 == 0 { 0.0 } else { 18.0 },
                );
                nail.render(f, k)
            })
            .collect();
        let shapes = vec![lm.clone(); imgs.len()];
        (AppearanceModel::train(&imgs, &shapes, lm, 64, 32).unwrap(), nail)
    }

    #[test]
    fn ground_truth_is_a_fixed_point() {
        let (m, nail) = model();
        let tri = &m.triangulation;
        let truth = tri.template.translated(20.0, 18.0);
        let tex = nail.render(ForceVector::new(1.0, -2.0, 9.0), 99);
        let img = render_shape(&tex, tri, &truth, 100, 72, BACKGROUND).unwrap();
        let res = aam_search(&m, tri, &img, &truth).unwrap();
        assert!(res.residual < 1e-6);
        assert!(res.shape.mean_distance(&truth) < 0.01);
        assert!(res.converged);
    }

    #[test]
    fn recovers_a_shifted_nail() {
        let (m, nail) = model();
        let tri = &m.triangulation;
        let truth = tri.template.translated(20.0, 18.0);
        let tex = nail.render(ForceVector::new(-1.0, 3.0, 12.0), 7);
        let img = render_shape(&tex, tri, &truth, 100, 72, BACKGROUND).unwrap();
        let res = aam_search(&m, tri, &img, &truth.translated(5.0, 5.0)).unwrap();
        assert!(res.shape.mean_distance(&truth) < 1.0, "error {}", res.shape.mean_distance(&truth));
        assert!(res.converged);
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn blank_image_does_not_converge() {
        let (m, _) = model();
        let tri = &m.triangulation;
        let img = Image::filled(400, 400, 1, 0.5);
        let init = tri.template.translated(200.0, 200.0);
        let res = aam_search(&m, tri, &img, &init).unwrap();
        assert!(!res.converged);
    }

    #[test]
    fn init_outside_image_is_rejected() {
        let (m, _) = model();
        let tri = &m.triangulation;
        let img = Image::filled(50, 50, 1, 0.5);
        let init = tri.template.translated(200.0, 0.0);
        assert!(matches!(aam_search(&m, tri, &img, &init), Err(Error::Domain(_))));
    }
}
