//! Numerical laboratory for spectral GNN dynamics on small graphs.
//!
//! The crate is organized around a dense-graph core and five subsystems:
//!
//! - [`graph`]: validated simple connected graphs, feature matrices, and
//!   Dirichlet-energy primitives.
//! - [`spectral`]: normalized operators and a deterministic Jacobi
//!   eigensolver for symmetric matrices.
//! - [`motif`]: exact subgraph-isomorphism search and node-level motif
//!   labeling.
//! - [`datagen`]: synthetic planted-motif graph datasets with controlled
//!   homophily/heterophily in four quadrants.
//! - [`dynamics`]: linear gradient-flow evolution, energy functionals, and
//!   low/high-frequency regime prediction and classification.
//! - [`models`]: three trainable graph classifier families with hand-rolled
//!   reverse-mode gradients and Adam.
//! - [`metrics`]: kernel MMD between embedding samples and normalized
//!   Dirichlet-energy shrink ratios.
//!
//! Batch workloads (dataset generation, training gradients, kernel matrices,
//! simulation sweeps) run data-parallel through [`par`] when the `parallel`
//! feature is enabled (the default) and fall back to sequential loops
//! otherwise. Results are bitwise identical either way: reductions always
//! happen in index order.

pub mod canonical;
pub mod datagen;
pub mod dynamics;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod motif;
pub mod par;
pub mod rng;
pub mod spectral;

pub use graph::{FeatureMatrix, Graph, GraphError};
pub use spectral::{SpectralDecomposition, SpectralError};
