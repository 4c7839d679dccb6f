//! Normalized graph operators and a deterministic symmetric eigensolver.
//!
//! The eigensolver is a cyclic Jacobi iteration: rotations are applied in a
//! fixed pair order until every off-diagonal entry is below `1e-12` relative
//! to the input's Frobenius norm, so a given input always produces the same
//! decomposition. Quadratic convergence makes a handful of sweeps enough for
//! the dense matrices used here (`n <= 200`).

use crate::graph::Graph;
use ndarray::Array2;
use thiserror::Error;

/// Symmetry tolerance on inputs (max absolute deviation).
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Off-diagonal convergence tolerance, relative to the Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
}

/// Which operator a decomposition belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    /// `Delta = I - D^{-1/2} A D^{-1/2}`
    NormalizedLaplacian,
    /// `Ahat = D^{-1/2} A D^{-1/2}`
    NormalizedAdjacency,
    /// Any other symmetric matrix (e.g. a channel-mixing weight matrix).
    Generic,
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and an
/// orthonormal eigenvector matrix (columns).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub operator: OperatorTag,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// Column `k` of the eigenvector matrix.
    pub fn eigenvector(&self, k: usize) -> ndarray::ArrayView1<'_, f64> {
        self.eigenvectors.column(k)
    }
}

/// `Delta = I - D^{-1/2} A D^{-1/2}`; spectrum in `[0, 2]` for any graph,
/// with 0 attained exactly once on connected graphs.
pub fn normalized_laplacian(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    for &(i, j) in g.edges() {
        let w = -1.0 / ((g.degree(i) * g.degree(j)) as f64).sqrt();
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    m
}

/// `Ahat = D^{-1/2} A D^{-1/2} = I - Delta`, the self-loop-free propagation
/// operator used by the gradient-flow dynamics.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let mut m = Array2::zeros((n, n));
    for &(i, j) in g.edges() {
        let w = 1.0 / ((g.degree(i) * g.degree(j)) as f64).sqrt();
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    m
}

/// Self-loop-augmented propagation `D~^{-1/2} (A + I) D~^{-1/2}` with
/// `D~ = D + I`, the standard GCN convolution operator.
pub fn normalized_adjacency_self_loops(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[(i, i)] = 1.0 / (g.degree(i) as f64 + 1.0);
    }
    for &(i, j) in g.edges() {
        let w = 1.0 / (((g.degree(i) + 1) * (g.degree(j) + 1)) as f64).sqrt();
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    m
}

/// Eigendecomposition of the normalized Laplacian of `g`.
pub fn laplacian_spectrum(g: &Graph) -> Result<SpectralDecomposition, SpectralError> {
    let mut dec = symmetric_eigendecomposition(&normalized_laplacian(g))?;
    dec.operator = OperatorTag::NormalizedLaplacian;
    Ok(dec)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn symmetric_eigendecomposition(
    m: &Array2<f64>,
) -> Result<SpectralDecomposition, SpectralError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(SpectralError::NotSquare(rows, cols));
    }
    let n = rows;
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if dev > SYMMETRY_TOL {
        return Err(SpectralError::NotSymmetric(dev));
    }

    let mut a = m.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_TOL * fro.max(f64::MIN_POSITIVE);
    let max_sweeps = 100 * n * n;

    let mut converged = n <= 1 || max_off_diagonal(&a) <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= max_sweeps {
            return Err(SpectralError::NoConvergence(max_sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
        converged = max_off_diagonal(&a) <= tol;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        // sign convention: largest-magnitude entry positive
        let col = v.column(src);
        let mut lead = 0;
        for (r, x) in col.iter().enumerate() {
            if x.abs() > col[lead].abs() {
                lead = r;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            eigenvectors[(r, dst)] = sign * col[r];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        operator: OperatorTag::Generic,
    })
}

fn max_off_diagonal(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Apply the Jacobi rotation J(p, q, c, s) as `a <- J^T a J`, `v <- v J`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let apq = a[(p, q)];
    a[(p, p)] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    a[(q, q)] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            let akp = a[(k, p)];
            let akq = a[(k, q)];
            a[(k, p)] = c * akp - s * akq;
            a[(p, k)] = a[(k, p)];
            a[(k, q)] = s * akp + c * akq;
            a[(q, k)] = a[(k, q)];
        }
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
