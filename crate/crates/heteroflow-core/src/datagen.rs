//! Synthetic planted-motif graph datasets with controlled heterophily.
//!
//! Each dataset quadrant combines a backbone connectivity type with a motif
//! connectivity type (homophilic or heterophilic). Skeletons are random trees
//! densified with uniformly sampled extra edges; homophilic node labels come
//! from greedy modularity maximization, heterophilic labels are uniform.
//! Features are frozen per-class Gaussian embeddings plus small noise.
//!
//! Generation is deterministic and embarrassingly parallel: every backbone,
//! motif, and record draws from its own ChaCha stream derived from the root
//! seed, and records are assembled in index order.

use crate::graph::{FeatureMatrix, Graph, GraphError};
use crate::par;
use crate::rng::{mix, stream_rng};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

const STREAM_BACKBONE: u64 = 1 << 40;
const STREAM_MOTIF: u64 = 2 << 40;
const STREAM_RECORD: u64 = 3 << 40;
const EMBEDDING_SALT: u64 = 0x5eed_7ab1e;

#[derive(Debug, Error, PartialEq)]
pub enum DatagenError {
    #[error("tree needs at least 2 nodes, got {0}")]
    TreeTooSmall(usize),
    #[error("target edge count {target} outside [{min}, {max}]")]
    TargetOutOfRange {
        target: usize,
        min: usize,
        max: usize,
    },
    #[error("heterophilic labeling needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("split ratios must be positive and sum to 1")]
    InvalidRatios,
    #[error("a split would be empty")]
    EmptySplit,
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Backbone/motif connectivity combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    #[serde(rename = "hom-hom")]
    HomHom,
    #[serde(rename = "hom-het")]
    HomHet,
    #[serde(rename = "het-hom")]
    HetHom,
    #[serde(rename = "het-het")]
    HetHet,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::HomHom,
        Quadrant::HomHet,
        Quadrant::HetHom,
        Quadrant::HetHet,
    ];

    pub fn backbone_homophilic(self) -> bool {
        matches!(self, Quadrant::HomHom | Quadrant::HomHet)
    }

    pub fn motif_homophilic(self) -> bool {
        matches!(self, Quadrant::HomHom | Quadrant::HetHom)
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::HomHom => "hom-hom",
            Quadrant::HomHet => "hom-het",
            Quadrant::HetHom => "het-hom",
            Quadrant::HetHet => "het-het",
        }
    }

    pub fn parse(s: &str) -> Option<Quadrant> {
        Quadrant::ALL.into_iter().find(|q| q.name() == s)
    }

    fn index(self) -> u64 {
        Quadrant::ALL.iter().position(|&q| q == self).unwrap() as u64
    }
}

impl std::fmt::Display for Quadrant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How many edges a densified skeleton gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensifyMode {
    /// Edge count sampled uniformly in `[n-1, n(n-1)/4]` per graph (default).
    #[serde(rename = "sampled")]
    Sampled,
    /// Fixed at half of the maximum: `(n-1 + n(n-1)/4) / 2`.
    #[serde(rename = "fixed-half")]
    FixedHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub quadrant: Quadrant,
    pub backbone_count: usize,
    pub motif_variants: usize,
    pub backbone_n_range: (usize, usize),
    pub motif_n_range: (usize, usize),
    pub noise_sigma: f64,
    pub label_embedding_dim: usize,
    pub num_hetero_classes: usize,
    pub densify_mode: DensifyMode,
}

impl GenConfig {
    /// Desk-scale preset: 200 backbones x 5 motifs per quadrant.
    pub fn desk(quadrant: Quadrant, seed: u64) -> Self {
        Self {
            seed,
            quadrant,
            backbone_count: 200,
            motif_variants: 5,
            backbone_n_range: (20, 50),
            motif_n_range: (5, 7),
            noise_sigma: 0.05,
            label_embedding_dim: 8,
            num_hetero_classes: 3,
            densify_mode: DensifyMode::Sampled,
        }
    }

    /// Reference-scale preset: 1000 backbones x 5 motifs per quadrant.
    pub fn paper(quadrant: Quadrant, seed: u64) -> Self {
        Self {
            backbone_count: 1000,
            ..Self::desk(quadrant, seed)
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let err = |m: &str| Err(DatagenError::InvalidConfig(m.to_string()));
        if self.backbone_count < 1 || self.motif_variants < 1 {
            return err("counts must be at least 1");
        }
        if self.backbone_n_range.0 > self.backbone_n_range.1 || self.backbone_n_range.0 < 4 {
            return err("backbone node range empty or below 4");
        }
        if self.motif_n_range.0 > self.motif_n_range.1 || self.motif_n_range.0 < 4 {
            return err("motif node range empty or below 4");
        }
        if !(self.noise_sigma > 0.0) {
            return err("noise sigma must be positive");
        }
        if self.label_embedding_dim < 1 {
            return err("label embedding dim must be at least 1");
        }
        if self.num_hetero_classes < 2 {
            return err("need at least 2 heterophilic classes");
        }
        Ok(())
    }

    /// The class-embedding table key, shared by every record of a dataset.
    pub fn embedding_seed(&self) -> u64 {
        mix(self.seed, EMBEDDING_SALT)
    }
}

/// Where a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub quadrant: Quadrant,
    pub backbone_id: u32,
    pub motif_variant: u32,
    pub seed: u64,
}

/// One generated graph with features, labels, and motif bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGraphRecord {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub node_labels: Vec<usize>,
    pub motif_nodes: Vec<usize>,
    pub boundary_edges: Vec<(usize, usize)>,
    pub intra_motif_edges: Vec<(usize, usize)>,
    pub graph_label: u8,
    pub provenance: Provenance,
}

impl SyntheticGraphRecord {
    /// Check the record's structural invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.features.n() != self.graph.n() {
            return Err("features row count differs from node count".into());
        }
        if self.node_labels.len() != self.graph.n() {
            return Err("node label count differs from node count".into());
        }
        if (self.graph_label == 1) != !self.motif_nodes.is_empty() {
            return Err("graph_label must mirror motif presence".into());
        }
        let inside: Vec<bool> = {
            let mut v = vec![false; self.graph.n()];
            for &m in &self.motif_nodes {
                if m >= self.graph.n() {
                    return Err("motif node out of range".into());
                }
                v[m] = true;
            }
            v
        };
        for &(a, b) in &self.boundary_edges {
            if !self.graph.has_edge(a, b) || inside[a] == inside[b] {
                return Err("bad boundary edge".into());
            }
        }
        for &(a, b) in &self.intra_motif_edges {
            if !self.graph.has_edge(a, b) || !(inside[a] && inside[b]) {
                return Err("bad intra-motif edge".into());
            }
        }
        Ok(())
    }
}

/// Uniform random labeled tree on `n` nodes via a Prufer sequence.
pub fn random_tree(n: usize, rng: &mut ChaCha12Rng) -> Result<Graph, DatagenError> {
    if n < 2 {
        return Err(DatagenError::TreeTooSmall(n));
    }
    if n == 2 {
        return Ok(Graph::new(2, &[(0, 1)])?);
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(Reverse)
        .collect();
    for &s in &seq {
        let Reverse(leaf) = leaves.pop().expect("tree decode keeps a leaf");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(Reverse(s));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a, b));
    Ok(Graph::new(n, &edges)?)
}

/// Maximum densified edge count for `n` nodes: `n(n-1)/4`.
pub fn max_target_edges(n: usize) -> usize {
    n * (n - 1) / 4
}

/// Add uniformly sampled non-edges to a connected skeleton until it has
/// exactly `target_edges` edges. The input's edges are preserved.
pub fn densify(
    skeleton: &Graph,
    target_edges: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Graph, DatagenError> {
    let n = skeleton.n();
    let min = skeleton.edge_count();
    let max = max_target_edges(n);
    if target_edges < min || target_edges > max {
        return Err(DatagenError::TargetOutOfRange {
            target: target_edges,
            min,
            max,
        });
    }
    if target_edges == min {
        return Ok(skeleton.clone());
    }
    let mut non_edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !skeleton.has_edge(i, j) {
                non_edges.push((i, j));
            }
        }
    }
    let extra = target_edges - min;
    // partial Fisher-Yates: uniform without replacement
    for k in 0..extra {
        let pick = rng.gen_range(k..non_edges.len());
        non_edges.swap(k, pick);
    }
    let mut edges = skeleton.edges().to_vec();
    edges.extend_from_slice(&non_edges[..extra]);
    Ok(Graph::new(n, &edges)?)
}

/// Greedy modularity maximization (Clauset-Newman-Moore agglomeration):
/// start from singletons, repeatedly merge the community pair with the
/// largest positive modularity gain. Ties go to the lexicographically
/// smallest pair of community representatives (minimum member node).
pub fn assign_labels_homophilic(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let m = g.edge_count() as f64;
    let mut rep: Vec<usize> = (0..n).collect();
    let mut degree_sum: BTreeMap<usize, f64> =
        (0..n).map(|v| (v, g.degree(v) as f64)).collect();
    // edge counts between community representatives (a < b)
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j) in g.edges() {
        *between.entry((i.min(j), i.max(j))).or_insert(0.0) += 1.0;
    }

    loop {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&(a, b), &l_ab) in &between {
            let gain = l_ab / m - degree_sum[&a] * degree_sum[&b] / (2.0 * m * m);
            if best.map_or(true, |(_, g0)| gain > g0) {
                best = Some(((a, b), gain));
            }
        }
        let Some(((a, b), gain)) = best else { break };
        if gain <= 0.0 {
            break;
        }
        // merge b into a (a < b by map ordering)
        let db = degree_sum.remove(&b).expect("live community");
        *degree_sum.get_mut(&a).expect("live community") += db;
        for r in rep.iter_mut() {
            if *r == b {
                *r = a;
            }
        }
        let stale: Vec<(usize, usize)> = between
            .keys()
            .filter(|&&(x, y)| x == b || y == b)
            .copied()
            .collect();
        for key in stale {
            let w = between.remove(&key).expect("stale key");
            let other = if key.0 == b { key.1 } else { key.0 };
            if other == a {
                continue; // internal edges no longer contribute to gains
            }
            *between.entry((a.min(other), a.max(other))).or_insert(0.0) += w;
        }
        between.remove(&(a.min(b), a.max(b)));
    }

    // normalize community ids in order of first appearance
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let next = ids.len();
        let id = *ids.entry(rep[v]).or_insert(next);
        labels.push(id);
    }
    labels
}

/// Newman modularity of a labeling: `Q = sum_c [L_c/m - (D_c/2m)^2]`.
pub fn modularity(g: &Graph, labels: &[usize]) -> f64 {
    let m = g.edge_count() as f64;
    let mut intra: BTreeMap<usize, f64> = BTreeMap::new();
    let mut deg: BTreeMap<usize, f64> = BTreeMap::new();
    for v in 0..g.n() {
        *deg.entry(labels[v]).or_insert(0.0) += g.degree(v) as f64;
    }
    for &(i, j) in g.edges() {
        if labels[i] == labels[j] {
            *intra.entry(labels[i]).or_insert(0.0) += 1.0;
        }
    }
    deg.iter()
        .map(|(c, d)| intra.get(c).copied().unwrap_or(0.0) / m - (d / (2.0 * m)).powi(2))
        .sum()
}

/// I.i.d. uniform class per node.
pub fn assign_labels_heterophilic(
    g: &Graph,
    num_classes: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<usize>, DatagenError> {
    if num_classes < 2 {
        return Err(DatagenError::TooFewClasses(num_classes));
    }
    Ok((0..g.n()).map(|_| rng.gen_range(0..num_classes)).collect())
}

/// Fraction of edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph, labels: &[usize]) -> f64 {
    if g.edge_count() == 0 {
        return 0.0;
    }
    let same = g
        .edges()
        .iter()
        .filter(|&&(i, j)| labels[i] == labels[j])
        .count();
    same as f64 / g.edge_count() as f64
}

/// The frozen class embedding `e(c)`: `d` standard normals drawn from the
/// ChaCha stream `c` of the generator keyed by `embedding_seed`. Lazy and
/// order-independent, so any class id is reproducible in isolation.
pub fn class_embedding(embedding_seed: u64, class: usize, d: usize) -> Vec<f64> {
    let mut rng = stream_rng(embedding_seed, class as u64);
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// `f_i = e(label_i) + sigma * N(0, I)`.
pub fn features_from_labels(
    node_labels: &[usize],
    d: usize,
    sigma: f64,
    embedding_seed: u64,
    rng: &mut ChaCha12Rng,
) -> FeatureMatrix {
    let n = node_labels.len();
    let mut table: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut values = Array2::zeros((n, d));
    for (i, &label) in node_labels.iter().enumerate() {
        let emb = table
            .entry(label)
            .or_insert_with(|| class_embedding(embedding_seed, label, d));
        for k in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            values[(i, k)] = emb[k] + sigma * noise;
        }
    }
    FeatureMatrix::new(values).expect("finite by construction")
}

/// Join a motif record onto a backbone record with one uniformly random
/// bridge edge. Motif nodes are appended after the backbone's.
pub fn attach_motif(
    backbone: &SyntheticGraphRecord,
    motif: &SyntheticGraphRecord,
    rng: &mut ChaCha12Rng,
) -> Result<SyntheticGraphRecord, DatagenError> {
    let nb = backbone.graph.n();
    let nm = motif.graph.n();
    let bridge_backbone = rng.gen_range(0..nb);
    let bridge_motif = nb + rng.gen_range(0..nm);

    let mut edges = backbone.graph.edges().to_vec();
    let shifted: Vec<(usize, usize)> = motif
        .graph
        .edges()
        .iter()
        .map(|&(a, b)| (a + nb, b + nb))
        .collect();
    edges.extend_from_slice(&shifted);
    edges.push((bridge_backbone, bridge_motif));
    let graph = Graph::new(nb + nm, &edges)?;

    let mut data = Vec::with_capacity((nb + nm) * backbone.features.dim());
    for i in 0..nb {
        data.extend(backbone.features.row(i).iter());
    }
    for i in 0..nm {
        data.extend(motif.features.row(i).iter());
    }
    let features = FeatureMatrix::from_rows(nb + nm, backbone.features.dim(), data)?;

    let mut node_labels = backbone.node_labels.clone();
    node_labels.extend(motif.node_labels.iter().copied());

    let bridge = (
        bridge_backbone.min(bridge_motif),
        bridge_backbone.max(bridge_motif),
    );
    Ok(SyntheticGraphRecord {
        graph,
        features,
        node_labels,
        motif_nodes: (nb..nb + nm).collect(),
        boundary_edges: vec![bridge],
        intra_motif_edges: shifted,
        graph_label: 1,
        provenance: Provenance {
            quadrant: backbone.provenance.quadrant,
            backbone_id: backbone.provenance.backbone_id,
            motif_variant: motif.provenance.motif_variant,
            seed: backbone.provenance.seed,
        },
    })
}

/// Structural part of a generated graph, before features.
struct Skeleton {
    graph: Graph,
    labels: Vec<usize>,
}

fn gen_skeleton(
    cfg: &GenConfig,
    n_range: (usize, usize),
    homophilic: bool,
    rng: &mut ChaCha12Rng,
) -> Result<Skeleton, DatagenError> {
    let n = rng.gen_range(n_range.0..=n_range.1);
    let tree = random_tree(n, rng)?;
    let target = match cfg.densify_mode {
        DensifyMode::Sampled => rng.gen_range(n - 1..=max_target_edges(n)),
        DensifyMode::FixedHalf => (n - 1 + max_target_edges(n)) / 2,
    };
    let graph = densify(&tree, target, rng)?;
    let labels = if homophilic {
        assign_labels_homophilic(&graph)
    } else {
        assign_labels_heterophilic(&graph, cfg.num_hetero_classes, rng)?
    };
    Ok(Skeleton { graph, labels })
}

/// Generate one quadrant's records: `backbone_count x motif_variants`
/// motif-attached graphs (label 1), each followed by a motif-free copy of its
/// backbone with fresh feature noise (label 0).
pub fn generate_dataset(cfg: &GenConfig) -> Result<Vec<SyntheticGraphRecord>, DatagenError> {
    cfg.validate()?;
    let qseed = mix(cfg.seed, cfg.quadrant.index());
    let emb_seed = cfg.embedding_seed();

    let motifs: Vec<Skeleton> = {
        let results = par::map_indexed(cfg.motif_variants, |v| {
            let mut rng = stream_rng(qseed, STREAM_MOTIF + v as u64);
            gen_skeleton(cfg, cfg.motif_n_range, cfg.quadrant.motif_homophilic(), &mut rng)
        });
        results.into_iter().collect::<Result<_, _>>()?
    };
    let backbones: Vec<Skeleton> = {
        let results = par::map_indexed(cfg.backbone_count, |i| {
            let mut rng = stream_rng(qseed, STREAM_BACKBONE + i as u64);
            gen_skeleton(
                cfg,
                cfg.backbone_n_range,
                cfg.quadrant.backbone_homophilic(),
                &mut rng,
            )
        });
        results.into_iter().collect::<Result<_, _>>()?
    };

    let pairs = cfg.backbone_count * cfg.motif_variants;
    let results = par::map_indexed(pairs, |k| -> Result<_, DatagenError> {
        let i = k / cfg.motif_variants;
        let v = k % cfg.motif_variants;
        let backbone = &backbones[i];
        let motif = &motifs[v];

        let mut rng = stream_rng(qseed, STREAM_RECORD + 2 * k as u64);
        let provenance = Provenance {
            quadrant: cfg.quadrant,
            backbone_id: i as u32,
            motif_variant: v as u32,
            seed: cfg.seed,
        };
        let backbone_record = SyntheticGraphRecord {
            graph: backbone.graph.clone(),
            features: features_from_labels(
                &backbone.labels,
                cfg.label_embedding_dim,
                cfg.noise_sigma,
                emb_seed,
                &mut rng,
            ),
            node_labels: backbone.labels.clone(),
            motif_nodes: vec![],
            boundary_edges: vec![],
            intra_motif_edges: vec![],
            graph_label: 0,
            provenance,
        };
        let motif_record = SyntheticGraphRecord {
            graph: motif.graph.clone(),
            features: features_from_labels(
                &motif.labels,
                cfg.label_embedding_dim,
                cfg.noise_sigma,
                emb_seed,
                &mut rng,
            ),
            node_labels: motif.labels.clone(),
            motif_nodes: (0..motif.graph.n()).collect(),
            boundary_edges: vec![],
            intra_motif_edges: motif.graph.edges().to_vec(),
            graph_label: 1,
            provenance,
        };
        let positive = attach_motif(&backbone_record, &motif_record, &mut rng)?;

        let mut neg_rng = stream_rng(qseed, STREAM_RECORD + 2 * k as u64 + 1);
        let negative = SyntheticGraphRecord {
            features: features_from_labels(
                &backbone.labels,
                cfg.label_embedding_dim,
                cfg.noise_sigma,
                emb_seed,
                &mut neg_rng,
            ),
            ..backbone_record
        };
        Ok((positive, negative))
    });

    let mut records = Vec::with_capacity(2 * pairs);
    for r in results {
        let (pos, neg) = r?;
        records.push(pos);
        records.push(neg);
    }
    Ok(records)
}

/// Train/val/test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified shuffle-and-cut split. Within each label group the validation
/// and test sizes are floored, the remainder goes to train.
pub fn split_dataset(
    labels: &[u8],
    ratios: (f64, f64, f64),
    rng: &mut ChaCha12Rng,
) -> Result<SplitIndices, DatagenError> {
    let (rt, rv, rs) = ratios;
    if !(rt > 0.0 && rv > 0.0 && rs > 0.0) || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(DatagenError::InvalidRatios);
    }
    let mut groups: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut split = SplitIndices {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for group in groups.values() {
        let mut idx = group.clone();
        idx.shuffle(rng);
        let n = idx.len();
        let n_val = (rv * n as f64).floor() as usize;
        let n_test = (rs * n as f64).floor() as usize;
        split.val.extend(&idx[..n_val]);
        split.test.extend(&idx[n_val..n_val + n_test]);
        split.train.extend(&idx[n_val + n_test..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(DatagenError::EmptySplit);
    }
    Ok(split)
}

/// Synthetic regression target used to exercise the regression pipeline:
/// class-weighted node counts, scaled up when a motif is present.
pub fn synthetic_regression_target(record: &SyntheticGraphRecord) -> f64 {
    let weighted: f64 = record
        .node_labels
        .iter()
        .map(|&c| (c as f64 + 1.0) / 10.0)
        .sum();
    weighted * if record.graph_label == 1 { 1.5 } else { 1.0 }
}

// ---------------------------------------------------------------------------
// JSON-lines wire format

#[derive(Serialize, Deserialize)]
struct FeaturesWire {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    graph: serde_json::Value,
    features: FeaturesWire,
    node_labels: Vec<usize>,
    motif_nodes: Vec<usize>,
    boundary_edges: Vec<(usize, usize)>,
    intra_motif_edges: Vec<(usize, usize)>,
    graph_label: u8,
    provenance: Provenance,
}

impl SyntheticGraphRecord {
    pub fn to_json(&self) -> serde_json::Value {
        let wire = RecordWire {
            graph: self.graph.to_json(),
            features: FeaturesWire {
                n: self.features.n(),
                d: self.features.dim(),
                data: self.features.values().iter().copied().collect(),
            },
            node_labels: self.node_labels.clone(),
            motif_nodes: self.motif_nodes.clone(),
            boundary_edges: self.boundary_edges.clone(),
            intra_motif_edges: self.intra_motif_edges.clone(),
            graph_label: self.graph_label,
            provenance: self.provenance,
        };
        serde_json::to_value(wire).expect("record serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let wire: RecordWire =
            serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
        let graph = Graph::from_json(&wire.graph).map_err(|e| e.to_string())?;
        let features =
            FeatureMatrix::from_rows(wire.features.n, wire.features.d, wire.features.data)
                .map_err(|e| e.to_string())?;
        let record = SyntheticGraphRecord {
            graph,
            features,
            node_labels: wire.node_labels,
            motif_nodes: wire.motif_nodes,
            boundary_edges: wire.boundary_edges,
            intra_motif_edges: wire.intra_motif_edges,
            graph_label: wire.graph_label,
            provenance: wire.provenance,
        };
        record.validate()?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_properties() {
        for n in [2usize, 3, 5, 20, 50] {
            let mut rng = stream_rng(1, n as u64);
            let t = random_tree(n, &mut rng).unwrap();
            assert_eq!(t.edge_count(), n - 1);
            assert!(t.is_connected());
        }
        let mut rng = stream_rng(1, 0);
        assert_eq!(random_tree(1, &mut rng), Err(DatagenError::TreeTooSmall(1)));
    }

    #[test]
    fn densify_bounds_and_identity() {
        let mut rng = stream_rng(2, 0);
        let t = random_tree(8, &mut rng).unwrap();
        let same = densify(&t, 7, &mut rng).unwrap();
        assert_eq!(same, t);
        let max = max_target_edges(8); // 14
        let dense = densify(&t, max, &mut rng).unwrap();
        assert_eq!(dense.edge_count(), max);
        for &e in t.edges() {
            assert!(dense.has_edge(e.0, e.1));
        }
        assert!(matches!(
            densify(&t, max + 1, &mut rng),
            Err(DatagenError::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            densify(&t, 6, &mut rng),
            Err(DatagenError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn cnm_two_triangles_with_bridge() {
        let g = Graph::new(
            6,
            &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)],
        )
        .unwrap();
        let labels = assign_labels_homophilic(&g);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[4], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn cnm_k4_single_community() {
        let g = Graph::new(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let labels = assign_labels_homophilic(&g);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn heterophilic_labels_uniform_and_deterministic() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut rng = stream_rng(3, 0);
        let a = assign_labels_heterophilic(&g, 3, &mut rng).unwrap();
        let mut rng = stream_rng(3, 0);
        let b = assign_labels_heterophilic(&g, 3, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            assign_labels_heterophilic(&g, 1, &mut rng),
            Err(DatagenError::TooFewClasses(1))
        );
    }

    #[test]
    fn features_zero_sigma_identical_rows() {
        let labels = vec![0, 1, 0];
        let mut rng = stream_rng(4, 0);
        let f = features_from_labels(&labels, 5, 0.0, 99, &mut rng);
        assert_eq!(
            f.row(0).to_vec(),
            f.row(2).to_vec(),
            "same label, zero noise"
        );
        assert_ne!(f.row(0).to_vec(), f.row(1).to_vec());
        // different embedding seed moves the centroids
        let mut rng = stream_rng(4, 0);
        let g = features_from_labels(&labels, 5, 0.0, 100, &mut rng);
        assert_ne!(f.row(0).to_vec(), g.row(0).to_vec());
    }

    #[test]
    fn attach_motif_counts_and_annotations() {
        let cfg = GenConfig {
            backbone_count: 1,
            motif_variants: 1,
            ..GenConfig::desk(Quadrant::HomHom, 11)
        };
        let records = generate_dataset(&cfg).unwrap();
        assert_eq!(records.len(), 2);
        let pos = &records[0];
        let neg = &records[1];
        assert_eq!(pos.graph_label, 1);
        assert_eq!(neg.graph_label, 0);
        assert_eq!(
            pos.graph.n(),
            neg.graph.n() + pos.motif_nodes.len(),
            "combined node count"
        );
        assert_eq!(
            pos.graph.edge_count(),
            neg.graph.edge_count() + pos.intra_motif_edges.len() + 1
        );
        assert_eq!(pos.boundary_edges.len(), 1);
        pos.validate().unwrap();
        neg.validate().unwrap();
        // deleting motif nodes restores the backbone edge set
        let kept: Vec<(usize, usize)> = pos
            .graph
            .edges()
            .iter()
            .copied()
            .filter(|&(a, b)| a < neg.graph.n() && b < neg.graph.n())
            .collect();
        assert_eq!(kept, neg.graph.edges());
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let cfg = GenConfig {
            backbone_count: 4,
            motif_variants: 3,
            ..GenConfig::desk(Quadrant::HetHet, 5)
        };
        let a = generate_dataset(&cfg).unwrap();
        assert_eq!(a.len(), 24);
        assert_eq!(a.iter().filter(|r| r.graph_label == 1).count(), 12);
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        for r in &a {
            let lo = if r.graph_label == 1 { 25 } else { 20 };
            let hi = if r.graph_label == 1 { 57 } else { 50 };
            assert!(r.graph.n() >= lo && r.graph.n() <= hi, "n={}", r.graph.n());
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let mut rng = stream_rng(6, 0);
        let s = split_dataset(&labels, (0.8, 0.1, 0.1), &mut rng).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.val.len(), 10);
        assert_eq!(s.test.len(), 10);
        let mut rng = stream_rng(6, 0);
        let s2 = split_dataset(&labels, (0.8, 0.1, 0.1), &mut rng).unwrap();
        assert_eq!(s, s2);

        let ten: Vec<u8> = vec![0; 10];
        let mut rng = stream_rng(6, 1);
        let s = split_dataset(&ten, (0.8, 0.1, 0.1), &mut rng).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));

        let mut rng = stream_rng(6, 2);
        assert_eq!(
            split_dataset(&labels, (0.5, 0.2, 0.2), &mut rng),
            Err(DatagenError::InvalidRatios)
        );
        let tiny: Vec<u8> = vec![0; 3];
        let mut rng = stream_rng(6, 3);
        assert_eq!(
            split_dataset(&tiny, (0.8, 0.1, 0.1), &mut rng),
            Err(DatagenError::EmptySplit)
        );
    }

    #[test]
    fn record_json_round_trip() {
        let cfg = GenConfig {
            backbone_count: 1,
            motif_variants: 1,
            ..GenConfig::desk(Quadrant::HomHet, 42)
        };
        let records = generate_dataset(&cfg).unwrap();
        for r in &records {
            let v = r.to_json();
            let back = SyntheticGraphRecord::from_json(&v).unwrap();
            assert_eq!(*r, back);
        }
    }
}
