//! Kernel two-sample distance between embedding sets and Dirichlet-energy
//! shrink diagnostics.
//!
//! The MMD estimator is the biased V-statistic with unrestricted sums
//! (diagonal kernel terms included), so it is nonnegative up to rounding.
//! Kernel rows are assembled in parallel but summed in index order, keeping
//! results independent of the schedule.

use crate::graph::{
    edge_subset_dirichlet_energy, FeatureMatrix, Graph, GraphError,
};
use crate::par;
use crate::spectral::SpectralDecomposition;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("kernel bandwidth must be positive, got {0}")]
    NonpositiveBandwidth(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("both samples must be non-empty")]
    EmptySample,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("initial subset Dirichlet energy is zero; shrink ratio undefined")]
    ZeroInitialSubsetEnergy,
    #[error("feature matrix has zero norm")]
    ZeroNorm,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Squared empirical MMD between two embedding samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdResult {
    pub mmd2: f64,
    pub p: usize,
    pub q: usize,
    pub bandwidth: f64,
}

/// Per-category normalized Dirichlet-energy shrink ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkReport {
    pub categories: BTreeMap<String, f64>,
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Total order on samples: length, then lexicographic on entry bits.
fn sample_key(a: &[Vec<f64>]) -> impl Ord + '_ {
    (
        a.len(),
        a.iter()
            .flat_map(|row| row.iter().map(|x| x.to_bits()))
            .collect::<Vec<u64>>(),
    )
}

/// RBF kernel `exp(-|x - y|^2 / (2 sigma^2))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64, MetricsError> {
    if sigma <= 0.0 {
        return Err(MetricsError::NonpositiveBandwidth(sigma));
    }
    if x.len() != y.len() {
        return Err(MetricsError::DimensionMismatch(x.len(), y.len()));
    }
    Ok((-sq_dist(x, y) / (2.0 * sigma * sigma)).exp())
}

/// Median heuristic: the lower median of all pairwise Euclidean distances
/// over the pooled sample, falling back to 1.0 when the median is zero.
pub fn median_bandwidth(samples: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            need: 2,
            got: samples.len(),
        });
    }
    let mut dists = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            dists.push(sq_dist(&samples[i], &samples[j]).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = dists[(dists.len() - 1) / 2];
    Ok(if median == 0.0 { 1.0 } else { median })
}

/// Biased V-statistic
/// `1/p^2 sum k(h_i, h_i') + 1/q^2 sum k(g_j, g_j') - 2/pq sum k(h_i, g_j)`.
pub fn mmd2(
    h: &[Vec<f64>],
    g: &[Vec<f64>],
    sigma: f64,
) -> Result<MmdResult, MetricsError> {
    if sigma <= 0.0 {
        return Err(MetricsError::NonpositiveBandwidth(sigma));
    }
    if h.is_empty() || g.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let dim = h[0].len();
    for x in h.iter().chain(g.iter()) {
        if x.len() != dim {
            return Err(MetricsError::DimensionMismatch(dim, x.len()));
        }
    }
    let denom = 2.0 * sigma * sigma;
    let row_sum = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        let rows = par::map_slice(a, |x| {
            b.iter()
                .map(|y| (-sq_dist(x, y) / denom).exp())
                .sum::<f64>()
        });
        rows.iter().sum()
    };
    let p = h.len() as f64;
    let q = g.len() as f64;
    let hh = row_sum(h, h);
    let gg = row_sum(g, g);
    // traverse the cross term in an argument-order-independent direction so
    // mmd2(h, g) and mmd2(g, h) are bitwise equal
    let hg = if sample_key(h) <= sample_key(g) {
        row_sum(h, g)
    } else {
        row_sum(g, h)
    };
    Ok(MmdResult {
        mmd2: hh / (p * p) + gg / (q * q) - 2.0 * hg / (p * q),
        p: h.len(),
        q: g.len(),
        bandwidth: sigma,
    })
}

/// `[E_S(F_T) / |F_T|^2] / [E_S(F_0) / |F_0|^2]` over the edge subset `S`.
/// Below 1 means the subset smoothed relative to the global scale, above 1
/// means it sharpened.
pub fn shrink_ratio(
    g: &Graph,
    f0: &FeatureMatrix,
    ft: &FeatureMatrix,
    subset: &[(usize, usize)],
) -> Result<f64, MetricsError> {
    let n0 = f0.norm();
    let nt = ft.norm();
    if n0 == 0.0 || nt == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    let e0 = edge_subset_dirichlet_energy(g, f0, subset)?;
    if e0 == 0.0 {
        return Err(MetricsError::ZeroInitialSubsetEnergy);
    }
    let et = edge_subset_dirichlet_energy(g, ft, subset)?;
    Ok((et / (nt * nt)) / (e0 / (n0 * n0)))
}

/// Energy share per Laplacian eigenvalue: `|phi_k^T F|^2 / |F|^2`.
/// Nonnegative and summing to 1 by orthonormality.
pub fn frequency_profile(
    spectrum: &SpectralDecomposition,
    f: &FeatureMatrix,
) -> Result<Vec<f64>, MetricsError> {
    if spectrum.n() != f.n() {
        return Err(MetricsError::DimensionMismatch(spectrum.n(), f.n()));
    }
    let norm_sq: f64 = f.values().iter().map(|x| x * x).sum();
    if norm_sq == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    let coeffs = spectrum.eigenvectors.t().dot(f.values());
    Ok(coeffs
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|x| x * x).sum::<f64>() / norm_sq)
        .collect())
}
