//! Linear gradient-flow evolution of node features and frequency regimes.
//!
//! The evolution operator is the self-loop-free normalized adjacency
//! `Ahat = D^{-1/2} A D^{-1/2} = I - Delta`, whose spectrum pairs with the
//! normalized Laplacian's, so regime conditions stated in terms of Laplacian
//! eigenvalues apply verbatim.
//!
//! Two flow variants:
//!
//! - `Simplified`: `dF = Ahat F W`, the propagation-only system whose
//!   asymptotic regime is decided by the signs and sizes of `W`'s extreme
//!   eigenvalues against `lambda_max - 1`.
//! - `Full`: steepest descent `dF = -grad E(F)` on the energy
//!   `E(F) = sum_i <f_i, Omega f_i> - sum_ij Ahat_ij <f_i, W f_j> + phi0`,
//!   which expands to `-2 F Omega + 2 Ahat F W - F0 Wt^T` (the source term
//!   only when `phi0` is the quadratic coupling `trace(F^T F0 Wt)`).
//!
//! With `Omega = W = I` and `phi0 = 0` the energy reduces exactly to the
//! Dirichlet energy `trace(F^T Delta F)`.

use crate::graph::{FeatureMatrix, Graph, GraphError};
use crate::spectral::{
    normalized_adjacency, symmetric_eigendecomposition, SpectralDecomposition, SpectralError,
    SYMMETRY_TOL,
};
use ndarray::Array2;
use std::io::{self, Write};
use thiserror::Error;

/// Norm bound beyond which an un-renormalized simulation is declared diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Margin below which a regime prediction is reported as boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("simulation diverged at step {step} (norm {norm:.3e}); lower tau or renormalize")]
    Diverged { step: usize, norm: f64 },
    #[error("feature state collapsed to zero at step {step}")]
    ZeroState { step: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Symmetric channel-mixing weights with cached eigendata of `W`.
#[derive(Debug, Clone)]
pub struct WeightSpec {
    w: Array2<f64>,
    omega: Array2<f64>,
    w_tilde: Array2<f64>,
    mu: Vec<f64>,
    q: Array2<f64>,
}

impl WeightSpec {
    pub fn new(
        w: Array2<f64>,
        omega: Array2<f64>,
        w_tilde: Array2<f64>,
    ) -> Result<Self, DynamicsError> {
        let d = w.nrows();
        for (name, m) in [("W", &w), ("Omega", &omega), ("W_tilde", &w_tilde)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(DynamicsError::DimensionMismatch(format!(
                    "{name} must be {d}x{d}"
                )));
            }
        }
        for (name, m) in [("W", &w), ("Omega", &omega)] {
            let dev = max_asymmetry(m);
            if dev > SYMMETRY_TOL {
                return Err(DynamicsError::InvalidParameter(format!(
                    "{name} is not symmetric (deviation {dev:.3e})"
                )));
            }
        }
        let dec = symmetric_eigendecomposition(&w)?;
        Ok(Self {
            w,
            omega,
            w_tilde,
            mu: dec.eigenvalues,
            q: dec.eigenvectors,
        })
    }

    /// `W` given, `Omega = I`, `W_tilde = 0`.
    pub fn from_w(w: Array2<f64>) -> Result<Self, DynamicsError> {
        let d = w.nrows();
        Self::new(w, Array2::eye(d), Array2::zeros((d, d)))
    }

    /// Single-channel weight `W = (c)`.
    pub fn scalar(c: f64) -> Self {
        Self::from_w(Array2::from_elem((1, 1), c)).expect("1x1 symmetric")
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn omega(&self) -> &Array2<f64> {
        &self.omega
    }

    pub fn w_tilde(&self) -> &Array2<f64> {
        &self.w_tilde
    }

    /// Ascending eigenvalues of `W`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_min(&self) -> f64 {
        self.mu[0]
    }

    pub fn mu_max(&self) -> f64 {
        *self.mu.last().expect("non-empty")
    }

    /// Orthonormal eigenvectors of `W` (columns, matching [`Self::mu`]).
    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }
}

fn max_asymmetry(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

/// Factorization `W = Theta_+^T Theta_+ - Theta_-^T Theta_-` separating the
/// attractive and repulsive channel components.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    pub theta_plus: Array2<f64>,
    pub theta_minus: Array2<f64>,
}

impl EigenSplit {
    pub fn gram_plus(&self) -> Array2<f64> {
        self.theta_plus.t().dot(&self.theta_plus)
    }

    pub fn gram_minus(&self) -> Array2<f64> {
        self.theta_minus.t().dot(&self.theta_minus)
    }

    /// `Theta_+^T Theta_+ - Theta_-^T Theta_-`; reconstructs `W`.
    pub fn reconstruct(&self) -> Array2<f64> {
        &self.gram_plus() - &self.gram_minus()
    }
}

/// Split `W` by eigenvalue sign: `Theta_+ = sqrt(Lambda_+) Q^T` over positive
/// eigenvalues, `Theta_- = sqrt(Lambda_-) Q^T` over the absolute values of
/// negative ones. Rows for the complementary signs are zero.
pub fn eigen_split(w: &WeightSpec) -> EigenSplit {
    let d = w.dim();
    let mut theta_plus = Array2::zeros((d, d));
    let mut theta_minus = Array2::zeros((d, d));
    for (k, &mu) in w.mu().iter().enumerate() {
        if mu > 0.0 {
            let s = mu.sqrt();
            for c in 0..d {
                theta_plus[(k, c)] = s * w.q()[(c, k)];
            }
        } else if mu < 0.0 {
            let s = (-mu).sqrt();
            for c in 0..d {
                theta_minus[(k, c)] = s * w.q()[(c, k)];
            }
        }
    }
    EigenSplit {
        theta_plus,
        theta_minus,
    }
}

/// Source-coupling mode for the energy functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi0Mode {
    /// `phi0 = 0`.
    Zero,
    /// `phi0 = trace(F^T F(0) W_tilde)`.
    Quadratic,
}

/// Flow variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `dF = Ahat F W`
    Simplified,
    /// `dF = -grad E(F)` for the energy with the given source mode
    Full { phi0: Phi0Mode },
}

fn check_feature_dims(
    g: &Graph,
    f: &FeatureMatrix,
    f0: &FeatureMatrix,
    w: &WeightSpec,
) -> Result<(), DynamicsError> {
    if f.n() != g.n() || f0.n() != g.n() {
        return Err(DynamicsError::DimensionMismatch(format!(
            "features have {} / {} rows for a graph with {} nodes",
            f.n(),
            f0.n(),
            g.n()
        )));
    }
    if f.dim() != w.dim() || f0.dim() != w.dim() {
        return Err(DynamicsError::DimensionMismatch(format!(
            "feature width {} / {} does not match weight dim {}",
            f.dim(),
            f0.dim(),
            w.dim()
        )));
    }
    Ok(())
}

/// `E(F) = sum_i <f_i, Omega f_i> - sum_ij Ahat_ij <f_i, W f_j> + phi0`.
pub fn energy_functional(
    g: &Graph,
    f: &FeatureMatrix,
    f0: &FeatureMatrix,
    w: &WeightSpec,
    phi0_mode: Phi0Mode,
) -> Result<f64, DynamicsError> {
    check_feature_dims(g, f, f0, w)?;
    let ahat = normalized_adjacency(g);
    Ok(energy_with(&ahat, f.values(), f0.values(), w, phi0_mode))
}

fn energy_with(
    ahat: &Array2<f64>,
    f: &Array2<f64>,
    f0: &Array2<f64>,
    w: &WeightSpec,
    phi0_mode: Phi0Mode,
) -> f64 {
    // trace(F^T F Omega) - trace(F^T Ahat F W) [+ trace(F^T F0 Wt)]
    let ftf = f.t().dot(f);
    let self_term: f64 = ftf
        .iter()
        .zip(w.omega().iter())
        .map(|(a, b)| a * b)
        .sum();
    let af = ahat.dot(f);
    let ftaf = f.t().dot(&af);
    let pair_term: f64 = ftaf.iter().zip(w.w().iter()).map(|(a, b)| a * b).sum();
    let source = match phi0_mode {
        Phi0Mode::Zero => 0.0,
        Phi0Mode::Quadratic => {
            let ftf0 = f.t().dot(f0);
            // trace(M Wt) with M = F^T F0
            let d = ftf0.nrows();
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += ftf0[(a, b)] * w.w_tilde()[(b, a)];
                }
            }
            s
        }
    };
    self_term - pair_term + source
}

fn velocity(
    ahat: &Array2<f64>,
    f: &Array2<f64>,
    f0: &Array2<f64>,
    w: &WeightSpec,
    variant: Variant,
) -> Array2<f64> {
    match variant {
        Variant::Simplified => ahat.dot(f).dot(w.w()),
        Variant::Full { phi0 } => {
            let mut v = ahat.dot(f).dot(w.w()) * 2.0 - f.dot(w.omega()) * 2.0;
            if phi0 == Phi0Mode::Quadratic {
                v = v - f0.dot(&w.w_tilde().t());
            }
            v
        }
    }
}

/// One explicit-Euler step `F + tau * dF`.
pub fn gradient_flow_step(
    g: &Graph,
    f: &FeatureMatrix,
    f0: &FeatureMatrix,
    w: &WeightSpec,
    tau: f64,
    variant: Variant,
) -> Result<FeatureMatrix, DynamicsError> {
    check_feature_dims(g, f, f0, w)?;
    if tau <= 0.0 {
        return Err(DynamicsError::InvalidParameter("tau must be positive".into()));
    }
    let ahat = normalized_adjacency(g);
    let v = velocity(&ahat, f.values(), f0.values(), w, variant);
    let next = f.values() + &(v * tau);
    Ok(FeatureMatrix::new(next)?)
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub tau: f64,
    pub steps: usize,
    pub variant: Variant,
    /// Divide the state by its norm after every step. Def-2.1-style
    /// classification uses this: the Rayleigh trajectory is unchanged and the
    /// state cannot overflow.
    pub renormalize: bool,
}

impl SimulateOptions {
    /// Defaults used for empirical regime classification.
    pub fn classification() -> Self {
        Self {
            tau: 0.05,
            steps: 2000,
            variant: Variant::Simplified,
            renormalize: true,
        }
    }
}

/// Time series of a simulated flow. Snapshot `k` is the state after `k`
/// steps (including renormalization when enabled), at time `k * tau`.
#[derive(Debug, Clone)]
pub struct DynamicsTrace {
    pub tau: f64,
    pub variant: Variant,
    pub renormalized: bool,
    pub times: Vec<f64>,
    pub snapshots: Vec<FeatureMatrix>,
    pub dirichlet: Vec<f64>,
    pub rayleigh: Vec<f64>,
    /// Energy per snapshot, recorded for the full variant.
    pub energy: Option<Vec<f64>>,
    pub feature_norm: Vec<f64>,
}

impl DynamicsTrace {
    pub fn final_rayleigh(&self) -> f64 {
        *self.rayleigh.last().expect("non-empty trace")
    }

    pub fn final_features(&self) -> &FeatureMatrix {
        self.snapshots.last().expect("non-empty trace")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Evolve `f0` for `steps` explicit-Euler steps, recording Dirichlet energy,
/// Rayleigh quotient, norm, and (full variant) the energy functional.
pub fn simulate(
    g: &Graph,
    f0: &FeatureMatrix,
    w: &WeightSpec,
    opts: SimulateOptions,
) -> Result<DynamicsTrace, DynamicsError> {
    check_feature_dims(g, f0, f0, w)?;
    if opts.steps < 1 {
        return Err(DynamicsError::InvalidParameter(
            "steps must be at least 1".into(),
        ));
    }
    if opts.tau <= 0.0 {
        return Err(DynamicsError::InvalidParameter("tau must be positive".into()));
    }
    if f0.norm() == 0.0 {
        return Err(DynamicsError::ZeroState { step: 0 });
    }
    let ahat = normalized_adjacency(g);
    let lap = crate::spectral::normalized_laplacian(g);
    let record_energy = matches!(opts.variant, Variant::Full { .. });
    let f0_values = f0.values().clone();

    let mut trace = DynamicsTrace {
        tau: opts.tau,
        variant: opts.variant,
        renormalized: opts.renormalize,
        times: Vec::with_capacity(opts.steps + 1),
        snapshots: Vec::with_capacity(opts.steps + 1),
        dirichlet: Vec::with_capacity(opts.steps + 1),
        rayleigh: Vec::with_capacity(opts.steps + 1),
        energy: record_energy.then(|| Vec::with_capacity(opts.steps + 1)),
        feature_norm: Vec::with_capacity(opts.steps + 1),
    };

    let mut state = f0.values().clone();
    if opts.renormalize {
        let norm = frobenius(&state);
        state.mapv_inplace(|x| x / norm);
    }
    record(&mut trace, 0.0, &state, &lap, &ahat, &f0_values, w, opts.variant);

    for step in 1..=opts.steps {
        let v = velocity(&ahat, &state, &f0_values, w, opts.variant);
        state = state + v * opts.tau;
        let norm = frobenius(&state);
        if !norm.is_finite() || (!opts.renormalize && norm > DIVERGENCE_NORM) {
            return Err(DynamicsError::Diverged { step, norm });
        }
        if norm == 0.0 {
            return Err(DynamicsError::ZeroState { step });
        }
        if opts.renormalize {
            state.mapv_inplace(|x| x / norm);
        }
        record(
            &mut trace,
            step as f64 * opts.tau,
            &state,
            &lap,
            &ahat,
            &f0_values,
            w,
            opts.variant,
        );
    }
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn record(
    trace: &mut DynamicsTrace,
    t: f64,
    state: &Array2<f64>,
    lap: &Array2<f64>,
    ahat: &Array2<f64>,
    f0: &Array2<f64>,
    w: &WeightSpec,
    variant: Variant,
) {
    let dir = quadratic_form(lap, state);
    let norm_sq: f64 = state.iter().map(|x| x * x).sum();
    trace.times.push(t);
    trace.dirichlet.push(dir);
    trace.rayleigh.push(dir / norm_sq);
    trace.feature_norm.push(norm_sq.sqrt());
    if let (Some(es), Variant::Full { phi0 }) = (trace.energy.as_mut(), variant) {
        es.push(energy_with(ahat, state, f0, w, phi0));
    }
    trace
        .snapshots
        .push(FeatureMatrix::new(state.clone()).expect("finite state"));
}

/// `trace(F^T M F)`.
fn quadratic_form(m: &Array2<f64>, f: &Array2<f64>) -> f64 {
    let mf = m.dot(f);
    f.iter().zip(mf.iter()).map(|(a, b)| a * b).sum()
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral regime prediction for the simplified flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Lfd,
    Hfd,
    Boundary,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Lfd => "LFD",
            Regime::Hfd => "HFD",
            Regime::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegimePrediction {
    pub regime: Regime,
    /// `|mu_min| (lambda_max - 1) - mu_max`; positive means HFD.
    pub margin: f64,
}

/// Decide the regime of `dF = Ahat F W` from the spectra: HFD when
/// `|mu_min| (lambda_max - 1) > mu_max`, LFD when `<`, boundary within
/// [`BOUNDARY_TOL`].
pub fn predict_regime(g: &Graph, w: &WeightSpec) -> Result<RegimePrediction, DynamicsError> {
    let spectrum = crate::spectral::laplacian_spectrum(g)?;
    Ok(predict_regime_with(&spectrum, w))
}

/// [`predict_regime`] with a precomputed Laplacian spectrum.
pub fn predict_regime_with(spectrum: &SpectralDecomposition, w: &WeightSpec) -> RegimePrediction {
    let margin = w.mu_min().abs() * (spectrum.lambda_max() - 1.0) - w.mu_max();
    let regime = if margin > BOUNDARY_TOL {
        Regime::Hfd
    } else if margin < -BOUNDARY_TOL {
        Regime::Lfd
    } else {
        Regime::Boundary
    };
    RegimePrediction { regime, margin }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmpiricalRegime {
    Lfd,
    Hfd,
    Undecided,
}

impl std::fmt::Display for EmpiricalRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmpiricalRegime::Lfd => "LFD",
            EmpiricalRegime::Hfd => "HFD",
            EmpiricalRegime::Undecided => "undecided",
        })
    }
}

/// Classify a finished trace: LFD if the final Rayleigh quotient is within
/// `epsilon` of 0, HFD if within `epsilon` of `lambda_max`, else undecided.
pub fn classify_regime_empirical(
    trace: &DynamicsTrace,
    spectrum: &SpectralDecomposition,
    epsilon: f64,
) -> EmpiricalRegime {
    let r = trace.final_rayleigh();
    if r < epsilon {
        EmpiricalRegime::Lfd
    } else if spectrum.lambda_max() - r < epsilon {
        EmpiricalRegime::Hfd
    } else {
        EmpiricalRegime::Undecided
    }
}

/// Two `K_clique_n` cliques joined by a path of `path_len` nodes. Node order:
/// first clique `0..k`, then the path, then the second clique; the clique
/// node `k-1` attaches to the first path node `k`.
pub fn barbell_graph(clique_n: usize, path_len: usize) -> Result<Graph, DynamicsError> {
    if clique_n < 3 {
        return Err(DynamicsError::InvalidParameter(
            "clique size must be at least 3".into(),
        ));
    }
    if path_len < 1 {
        return Err(DynamicsError::InvalidParameter(
            "path length must be at least 1".into(),
        ));
    }
    let n = 2 * clique_n + path_len;
    let mut edges = Vec::new();
    for i in 0..clique_n {
        for j in (i + 1)..clique_n {
            edges.push((i, j));
        }
    }
    edges.push((clique_n - 1, clique_n));
    for i in clique_n..clique_n + path_len - 1 {
        edges.push((i, i + 1));
    }
    edges.push((clique_n + path_len - 1, clique_n + path_len));
    for i in clique_n + path_len..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    Ok(Graph::new(n, &edges)?)
}

/// Trace CSV with columns `t,dirichlet,rayleigh,energy,feature_norm`.
/// Floats carry 17 significant digits so reruns are byte-identical.
pub fn write_trace_csv<W: Write>(trace: &DynamicsTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "t,dirichlet,rayleigh,energy,feature_norm")?;
    for k in 0..trace.len() {
        let energy = trace
            .energy
            .as_ref()
            .map(|es| format!("{:.16e}", es[k]))
            .unwrap_or_default();
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{:.16e}",
            trace.times[k], trace.dirichlet[k], trace.rayleigh[k], energy, trace.feature_norm[k]
        )?;
    }
    Ok(())
}
