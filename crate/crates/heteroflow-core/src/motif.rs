//! Exact subgraph-isomorphism search and node-level motif labeling.
//!
//! Matching is non-induced: every pattern edge must map to a host edge, extra
//! host edges among the mapped nodes are allowed. The search is a VF2-style
//! backtracking over a statically computed pattern order (most-connected
//! pattern node next) with degree pruning, and is fully deterministic:
//! candidate host nodes are tried in descending-degree order, ties broken by
//! index.

use crate::graph::Graph;
use std::ops::ControlFlow;
use thiserror::Error;

/// Exact search is exponential; keep patterns small.
pub const MAX_MOTIF_NODES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum MotifError {
    #[error("motif needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("motif has {0} nodes, maximum is {MAX_MOTIF_NODES}")]
    TooLarge(usize),
    #[error("motif pattern must be connected")]
    NotConnected,
    #[error("motif node {index} out of range for host with n={n}")]
    NodeOutOfRange { index: usize, n: usize },
}

/// A small connected graph pattern.
#[derive(Debug, Clone)]
pub struct Motif {
    pattern: Graph,
}

impl Motif {
    pub fn new(pattern: Graph) -> Result<Self, MotifError> {
        if pattern.n() < 2 {
            return Err(MotifError::TooSmall(pattern.n()));
        }
        if pattern.n() > MAX_MOTIF_NODES {
            return Err(MotifError::TooLarge(pattern.n()));
        }
        if !pattern.is_connected() {
            return Err(MotifError::NotConnected);
        }
        Ok(Self { pattern })
    }

    pub fn pattern(&self) -> &Graph {
        &self.pattern
    }

    /// Complete graph K_k.
    pub fn clique(k: usize) -> Result<Self, MotifError> {
        let mut edges = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                edges.push((i, j));
            }
        }
        Self::new(Graph::new(k, &edges).expect("clique is valid"))
    }

    /// Path P_k on k nodes (k-1 edges).
    pub fn path(k: usize) -> Result<Self, MotifError> {
        let edges: Vec<(usize, usize)> = (0..k.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::new(Graph::new(k, &edges).expect("path is valid"))
    }
}

/// Per-node binary labels: `y[i] = 1` iff node `i` lies in some embedded copy
/// of the motif.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabeling {
    pub y: Vec<u8>,
}

impl NodeLabeling {
    pub fn any(&self) -> bool {
        self.y.iter().any(|&v| v == 1)
    }
}

struct SearchPlan {
    /// Pattern nodes in expansion order.
    order: Vec<usize>,
    /// For order position k > 0: (pattern neighbors already matched, as order positions).
    matched_neighbors: Vec<Vec<usize>>,
}

fn plan_search(pattern: &Graph) -> SearchPlan {
    let pn = pattern.n();
    let mut order = Vec::with_capacity(pn);
    let mut placed = vec![false; pn];
    let start = (0..pn)
        .max_by_key(|&v| (pattern.degree(v), std::cmp::Reverse(v)))
        .expect("non-empty pattern");
    order.push(start);
    placed[start] = true;
    while order.len() < pn {
        let next = (0..pn)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| {
                let matched = pattern.neighbors(v).iter().filter(|&&u| placed[u]).count();
                (matched, pattern.degree(v), std::cmp::Reverse(v))
            })
            .expect("pattern node remains");
        order.push(next);
        placed[next] = true;
    }
    let pos_of: Vec<usize> = {
        let mut p = vec![0; pn];
        for (k, &v) in order.iter().enumerate() {
            p[v] = k;
        }
        p
    };
    let matched_neighbors = order
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            pattern
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&u| pos_of[u] < k)
                .map(|u| pos_of[u])
                .collect()
        })
        .collect();
    SearchPlan {
        order,
        matched_neighbors,
    }
}

/// Hosts ordered by descending degree, ties by ascending index.
fn degree_order(g: &Graph) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..g.n()).collect();
    nodes.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
    nodes
}

/// Enumerate embeddings, invoking `visit` with `map[pattern_node] = host_node`
/// for each one. `visit` can stop the search early.
pub fn for_each_embedding<F>(g: &Graph, m: &Motif, mut visit: F)
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let pattern = m.pattern();
    let pn = pattern.n();
    if pn > g.n() {
        return;
    }
    let plan = plan_search(pattern);
    let roots = degree_order(g);
    // image[k] = host node for the pattern node at order position k
    let mut image = vec![usize::MAX; pn];
    let mut used = vec![false; g.n()];
    let mut out_map = vec![usize::MAX; pn];

    fn extend<F>(
        g: &Graph,
        pattern: &Graph,
        plan: &SearchPlan,
        depth: usize,
        image: &mut [usize],
        used: &mut [bool],
        out_map: &mut [usize],
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        if depth == plan.order.len() {
            for (k, &p) in plan.order.iter().enumerate() {
                out_map[p] = image[k];
            }
            return visit(out_map);
        }
        let p = plan.order[depth];
        let need_degree = pattern.degree(p);
        let anchors = &plan.matched_neighbors[depth];
        debug_assert!(!anchors.is_empty(), "connected pattern");
        // candidates: host neighbors of the first matched anchor's image
        let anchor_host = image[anchors[0]];
        let mut candidates: Vec<usize> = g
            .neighbors(anchor_host)
            .iter()
            .copied()
            .filter(|&v| !used[v] && g.degree(v) >= need_degree)
            .collect();
        candidates.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
        'cand: for v in candidates {
            for &k in &anchors[1..] {
                if !g.has_edge(v, image[k]) {
                    continue 'cand;
                }
            }
            image[depth] = v;
            used[v] = true;
            let flow = extend(g, pattern, plan, depth + 1, image, used, out_map, visit);
            used[v] = false;
            image[depth] = usize::MAX;
            flow?;
        }
        ControlFlow::Continue(())
    }

    let root_degree = pattern.degree(plan.order[0]);
    for v in roots {
        if g.degree(v) < root_degree {
            continue;
        }
        image[0] = v;
        used[v] = true;
        let flow = extend(
            g,
            pattern,
            &plan,
            1,
            &mut image,
            &mut used,
            &mut out_map,
            &mut visit,
        );
        used[v] = false;
        if flow.is_break() {
            return;
        }
    }
}

/// All injective edge-preserving maps from the motif into the host, up to
/// `limit` if given. Automorphic images of the same node set are all reported.
pub fn find_embeddings(g: &Graph, m: &Motif, limit: Option<usize>) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if limit == Some(0) {
        return out;
    }
    for_each_embedding(g, m, |map| {
        out.push(map.to_vec());
        match limit {
            Some(l) if out.len() >= l => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    });
    out
}

/// `y[i] = 1` iff node `i` appears in at least one embedding image.
pub fn node_level_labels(g: &Graph, m: &Motif) -> NodeLabeling {
    let mut y = vec![0u8; g.n()];
    let mut remaining = g.n();
    for_each_embedding(g, m, |map| {
        for &v in map {
            if y[v] == 0 {
                y[v] = 1;
                remaining -= 1;
            }
        }
        if remaining == 0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    NodeLabeling { y }
}

/// Graph-level verdict via early-exit search.
pub fn graph_contains_motif(g: &Graph, m: &Motif) -> bool {
    let mut found = false;
    for_each_embedding(g, m, |_| {
        found = true;
        ControlFlow::Break(())
    });
    found
}

/// Split the host's edges by a node subset: boundary edges have exactly one
/// endpoint inside, intra edges have both. Output preserves canonical order.
pub fn boundary_and_intra_edges(
    g: &Graph,
    motif_nodes: &[usize],
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>), MotifError> {
    let mut inside = vec![false; g.n()];
    for &v in motif_nodes {
        if v >= g.n() {
            return Err(MotifError::NodeOutOfRange { index: v, n: g.n() });
        }
        inside[v] = true;
    }
    let mut boundary = Vec::new();
    let mut intra = Vec::new();
    for &(i, j) in g.edges() {
        match (inside[i], inside[j]) {
            (true, true) => intra.push((i, j)),
            (true, false) | (false, true) => boundary.push((i, j)),
            (false, false) => {}
        }
    }
    Ok((boundary, intra))
}
