//! Principal component analysis over flat sample vectors.
//!
//! Shared by the eigen-image force model and the registration shape and
//! texture models. When there are fewer samples than dimensions the
//! decomposition goes through the `n x n` Gram (snapshot) matrix and the
//! components are recovered by back-projection; otherwise the `p x p`
//! covariance matrix is decomposed directly.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative variance fraction used to pick the retained component count.
pub const VARIANCE_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Retained orthonormal components, ordered by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Full sample-variance spectrum (n - 1 denominator), non-increasing.
    /// Values below the numerical rank tolerance are reported as exactly 0.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn retained(&self) -> usize {
        self.components.len()
    }

    pub fn retained_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.retained()]
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        self.components
            .iter()
            .map(|v| {
                v.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(vi, (xi, mi))| vi * (xi - mi))
                    .sum()
            })
            .collect()
    }

    pub fn reconstruct(&self, params: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (v, &w) in self.components.iter().zip(params) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += w * vi;
            }
        }
        out
    }
}

/// Smallest `k` whose leading eigenvalues cover `fraction` of the total;
/// a component tied with the last included one is included as well.
pub fn retained_count(eigenvalues: &[f64], fraction: f64) -> usize {
    let total: f64 = eigenvalues.iter().filter(|v| **v > 0.0).sum();
    if total <= 0.0 {
        return 0;
    }
    let mut cum = 0.0;
    let mut k = 0;
    for (i, &ev) in eigenvalues.iter().enumerate() {
        if ev <= 0.0 {
            break;
        }
        cum += ev;
        k = i + 1;
        if cum / total >= fraction - 1e-12 {
            break;
        }
    }
    while k < eigenvalues.len()
        && eigenvalues[k] > 0.0
        && (eigenvalues[k] - eigenvalues[k - 1]).abs() <= 1e-12 * eigenvalues[k - 1]
    {
        k += 1;
    }
    k
}

/// Fits a PCA retaining components by the cumulative-variance rule.
pub fn fit(samples: &[Vec<f64>], fraction: f64) -> Result<Pca> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::domain(format!("PCA needs at least 2 samples, got {n}")));
    }
    let p = samples[0].len();
    if p == 0 {
        return Err(Error::domain("PCA samples are empty vectors"));
    }
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != p) {
        return Err(Error::domain(format!(
            "sample {i} has dimension {}, expected {p}",
            s.len()
        )));
    }

    let mut mean = vec![0.0; p];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, p, |i, j| samples[i][j] - mean[j]);
    let raw_ss: f64 = samples.iter().flatten().map(|v| v * v).sum();
    let denom = (n - 1) as f64;

    let (mut eigenvalues, mut components) = if n < p {
        let gram = &centered * centered.transpose();
        let (mu, vecs) = sorted_eigen(gram);
        let tol = rank_tolerance(&mu, n.max(p), raw_ss);
        let k = retained_count(&clamp_small(&mu, tol), fraction);
        let comps = (0..k)
            .map(|j| {
                let u = vecs.column(j);
                let v = centered.transpose() * u;
                let scale = mu[j].sqrt();
                v.iter().map(|x| x / scale).collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>();
        (clamp_small(&mu, tol), comps)
    } else {
        let cov = centered.transpose() * &centered;
        let (mu, vecs) = sorted_eigen(cov);
        let tol = rank_tolerance(&mu, n.max(p), raw_ss);
        let k = retained_count(&clamp_small(&mu, tol), fraction);
        let comps = (0..k)
            .map(|j| vecs.column(j).iter().copied().collect::<Vec<f64>>())
            .collect::<Vec<_>>();
        (clamp_small(&mu, tol), comps)
    };
    for ev in &mut eigenvalues {
        *ev /= denom;
    }
    orthonormalize(&mut components);
    for c in &mut components {
        fix_sign(c);
    }
    Ok(Pca {
        mean,
        components,
        eigenvalues,
    })
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Eigenvalues at or below this are rounding noise: relative to the largest
/// one, and never below `(1e-10)^2` of the raw data energy, so a set of
/// samples that agree up to rounding has no variance at all.
fn rank_tolerance(values: &[f64], dim: usize, raw_energy: f64) -> f64 {
    let max = values.first().copied().unwrap_or(0.0).max(0.0);
    (max * dim as f64 * f64::EPSILON * 10.0).max(raw_energy * 1e-20)
}

fn clamp_small(values: &[f64], tol: f64) -> Vec<f64> {
    values
        .iter()
        .map(|&v| if v <= tol { 0.0 } else { v })
        .collect()
}

/// Modified Gram-Schmidt, in place.
pub(crate) fn orthonormalize(vectors: &mut [Vec<f64>]) {
    for i in 0..vectors.len() {
        for j in 0..i {
            let (head, tail) = vectors.split_at_mut(i);
            let d = dot(&tail[0], &head[j]);
            for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                *a -= d * b;
            }
        }
        let norm = dot(&vectors[i], &vectors[i]).sqrt();
        if norm > 0.0 {
            for a in &mut vectors[i] {
                *a /= norm;
            }
        }
    }
}

/// Makes the largest-magnitude entry positive so decompositions are reproducible.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
