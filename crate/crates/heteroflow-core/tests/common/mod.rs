//! Independent oracles shared by the integration tests. Everything here is
//! deliberately naive (exhaustive enumeration, Taylor series, triple loops)
//! and stays off the library's implementation paths.

#![allow(dead_code)]

use heteroflow_core::datagen::{densify, max_target_edges, random_tree};
use heteroflow_core::graph::Graph;
use heteroflow_core::rng::stream_rng;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Brute-force node-level motif labels: try every |V_M|-subset of the host
/// and every bijection onto the pattern, requiring all pattern edges mapped.
pub fn brute_force_node_labels(host: &Graph, pattern: &Graph) -> Vec<u8> {
    let n = host.n();
    let k = pattern.n();
    let mut y = vec![0u8; n];
    if k > n {
        return y;
    }
    let mut subset = Vec::with_capacity(k);
    enumerate_subsets(n, k, 0, &mut subset, &mut |s| {
        if y.iter().enumerate().all(|(v, &l)| !s.contains(&v) || l == 1) {
            return; // already all marked
        }
        if subset_embeds(host, pattern, s) {
            for &v in s {
                y[v] = 1;
            }
        }
    });
    y
}

pub fn brute_force_contains(host: &Graph, pattern: &Graph) -> bool {
    brute_force_node_labels(host, pattern).iter().any(|&v| v == 1)
}

fn enumerate_subsets(
    n: usize,
    k: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if current.len() == k {
        visit(current);
        return;
    }
    let remaining = k - current.len();
    for v in start..=n.saturating_sub(remaining) {
        current.push(v);
        enumerate_subsets(n, k, v + 1, current, visit);
        current.pop();
    }
}

/// Does any bijection subset -> pattern preserve all pattern edges?
fn subset_embeds(host: &Graph, pattern: &Graph, subset: &[usize]) -> bool {
    let k = subset.len();
    let mut perm: Vec<usize> = (0..k).collect();
    // Heap's algorithm over permutations of the subset positions
    let mut c = vec![0usize; k];
    if perm_maps(host, pattern, subset, &perm) {
        return true;
    }
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            if perm_maps(host, pattern, subset, &perm) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

fn perm_maps(host: &Graph, pattern: &Graph, subset: &[usize], perm: &[usize]) -> bool {
    // pattern node p maps to host node subset[perm[p]]
    pattern
        .edges()
        .iter()
        .all(|&(u, v)| host.has_edge(subset[perm[u]], subset[perm[v]]))
}

/// All set partitions of `0..n` as restricted-growth strings, with Newman
/// modularity; returns the maximum over every partition.
pub fn best_partition_modularity(g: &Graph) -> (f64, Vec<usize>) {
    let n = g.n();
    let mut best = (f64::NEG_INFINITY, vec![0; n]);
    let mut labels = vec![0usize; n];
    fn rec(
        g: &Graph,
        labels: &mut Vec<usize>,
        pos: usize,
        max_used: usize,
        best: &mut (f64, Vec<usize>),
    ) {
        if pos == labels.len() {
            let q = heteroflow_core::datagen::modularity(g, labels);
            if q > best.0 {
                *best = (q, labels.clone());
            }
            return;
        }
        for l in 0..=max_used + 1 {
            labels[pos] = l;
            rec(g, labels, pos + 1, max_used.max(l), best);
        }
    }
    labels[0] = 0;
    rec(g, &mut labels, 1, 0, &mut best);
    best
}

/// Dense matrix exponential by scaling-and-squaring with a Taylor series.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).sum::<f64>(); // coarse over-estimate
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s as i32);
    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..200 {
        term = term.dot(&scaled) / k as f64;
        result = &result + &term;
        if term.iter().map(|x| x.abs()).sum::<f64>() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Triple-loop biased MMD^2, the literal sum from the estimator definition.
pub fn naive_mmd2(h: &[Vec<f64>], g: &[Vec<f64>], sigma: f64) -> f64 {
    let k = |x: &[f64], y: &[f64]| {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    };
    let p = h.len() as f64;
    let q = g.len() as f64;
    let mut hh = 0.0;
    for a in h {
        for b in h {
            hh += k(a, b);
        }
    }
    let mut gg = 0.0;
    for a in g {
        for b in g {
            gg += k(a, b);
        }
    }
    let mut hg = 0.0;
    for a in h {
        for b in g {
            hg += k(a, b);
        }
    }
    hh / (p * p) + gg / (q * q) - 2.0 * hg / (p * q)
}

/// Random connected graph on `n` nodes via a uniform tree plus uniformly
/// sampled extra edges.
pub fn random_connected_graph(n: usize, rng: &mut ChaCha12Rng) -> Graph {
    let tree = random_tree(n, rng).expect("n >= 2");
    if max_target_edges(n) <= n - 1 {
        return tree; // n <= 4: nothing to densify
    }
    let target = rng.gen_range(n - 1..=max_target_edges(n));
    densify(&tree, target, rng).expect("valid target")
}

/// Random symmetric matrix with N(0, scale^2) entries.
pub fn random_symmetric(d: usize, scale: f64, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let x: f64 = rng.sample(StandardNormal);
            m[(i, j)] = x * scale;
            m[(j, i)] = x * scale;
        }
    }
    m
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// One-sided two-sample z statistic for mean(a) > mean(b).
pub fn z_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    (ma - mb) / (va / a.len() as f64 + vb / b.len() as f64).sqrt()
}

pub fn test_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    stream_rng(seed, stream)
}
