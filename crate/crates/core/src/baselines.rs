//! Classical random-graph baselines: Erdős–Rényi, Barabási–Albert and the
//! mixed-membership stochastic block model.
//!
//! Sizes are drawn from the empirical training sizes. E-R and B-A have no
//! notion of labels, so their node labels and graph classes are uniform.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use thiserror::Error;

use crate::graph::argmax;
use crate::{GraphDataset, LabeledGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("dataset is empty")]
    Empty,
    #[error("every graph has a single node, so no edge density can be estimated")]
    AllSingletons,
    #[error("Barabási–Albert needs more than m = {m} nodes, got {n}")]
    TooSmall { n: usize, m: usize },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

fn observed_sizes(data: &GraphDataset) -> Result<Vec<usize>, BaselineError> {
    if data.is_empty() {
        return Err(BaselineError::Empty);
    }
    Ok(data.graphs.iter().map(LabeledGraph::n).collect())
}

fn pick_size<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<usize, BaselineError> {
    if sizes.is_empty() {
        return Err(BaselineError::Invalid("no sizes to sample from".into()));
    }
    Ok(sizes[rng.random_range(0..sizes.len())])
}

fn uniform_labels<R: Rng + ?Sized>(n: usize, num_labels: usize, rng: &mut R) -> Vec<usize> {
    (0..n)
        .map(|_| rng.random_range(0..num_labels.max(1)))
        .collect()
}

fn check_label_space(num_labels: usize, num_classes: usize) -> Result<(), BaselineError> {
    if num_labels == 0 || num_classes == 0 {
        return Err(BaselineError::Invalid(
            "need at least one node label and one class".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErParams {
    /// Observed training sizes, one entry per training graph.
    pub sizes: Vec<usize>,
    pub p: f64,
    pub num_labels: usize,
    pub num_classes: usize,
}

/// `p` is the mean per-graph density over graphs with at least two nodes.
pub fn er_fit(data: &GraphDataset) -> Result<ErParams, BaselineError> {
    let sizes = observed_sizes(data)?;
    let densities: Vec<f64> = data
        .graphs
        .iter()
        .filter(|g| g.n() > 1)
        .map(|g| 2.0 * g.num_edges() as f64 / (g.n() * (g.n() - 1)) as f64)
        .collect();
    if densities.is_empty() {
        return Err(BaselineError::AllSingletons);
    }
    Ok(ErParams {
        sizes,
        p: densities.iter().sum::<f64>() / densities.len() as f64,
        num_labels: data.num_node_labels,
        num_classes: data.num_graph_classes,
    })
}

pub fn er_sample<R: Rng + ?Sized>(
    params: &ErParams,
    rng: &mut R,
) -> Result<LabeledGraph, BaselineError> {
    check_label_space(params.num_labels, params.num_classes)?;
    if !(0.0..=1.0).contains(&params.p) {
        return Err(BaselineError::Invalid(format!(
            "edge probability {} outside [0, 1]",
            params.p
        )));
    }
    let n = pick_size(&params.sizes, rng)?;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < params.p {
                edges.push((u, v));
            }
        }
    }
    let labels = uniform_labels(n, params.num_labels, rng);
    let class = rng.random_range(0..params.num_classes);
    Ok(LabeledGraph::new(n, edges, labels, class).expect("sampled graph is valid"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaParams {
    /// Observed training sizes larger than `m`.
    pub sizes: Vec<usize>,
    pub m: usize,
    pub num_labels: usize,
    pub num_classes: usize,
}

/// `m = max(1, round(mean |E| / n))`; training sizes not above `m` are dropped.
pub fn ba_fit(data: &GraphDataset) -> Result<BaParams, BaselineError> {
    observed_sizes(data)?;
    let ratio = data
        .graphs
        .iter()
        .map(|g| g.num_edges() as f64 / g.n() as f64)
        .sum::<f64>()
        / data.len() as f64;
    let m = (ratio.round() as usize).max(1);
    let sizes: Vec<usize> = data
        .graphs
        .iter()
        .map(LabeledGraph::n)
        .filter(|&n| n > m)
        .collect();
    if sizes.is_empty() {
        return Err(BaselineError::TooSmall {
            n: data.max_nodes(),
            m,
        });
    }
    Ok(BaParams {
        sizes,
        m,
        num_labels: data.num_node_labels,
        num_classes: data.num_graph_classes,
    })
}

/// Preferential attachment on `n` nodes starting from a clique on `m + 1`.
pub fn ba_graph<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, BaselineError> {
    if m == 0 {
        return Err(BaselineError::Invalid("m must be at least 1".into()));
    }
    if n <= m {
        return Err(BaselineError::TooSmall { n, m });
    }
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    for v in m + 1..n {
        let mut weights: Vec<f64> = degree[..v].iter().map(|&d| d as f64).collect();
        let mut targets = Vec::with_capacity(m);
        for _ in 0..m {
            let t = WeightedIndex::new(&weights)
                .expect("earlier nodes have positive degree")
                .sample(rng);
            weights[t] = 0.0;
            targets.push(t);
        }
        for t in targets {
            edges.push((t, v));
            degree[t] += 1;
            degree[v] += 1;
        }
    }
    Ok(edges)
}

pub fn ba_sample<R: Rng + ?Sized>(
    params: &BaParams,
    rng: &mut R,
) -> Result<LabeledGraph, BaselineError> {
    check_label_space(params.num_labels, params.num_classes)?;
    let n = pick_size(&params.sizes, rng)?;
    let edges = ba_graph(n, params.m, rng)?;
    let labels = uniform_labels(n, params.num_labels, rng);
    let class = rng.random_range(0..params.num_classes);
    Ok(LabeledGraph::new(n, edges, labels, class).expect("sampled graph is valid"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsbParams {
    pub k: usize,
    pub alpha: Vec<f64>,
    /// Row-major `k × k`, symmetric.
    pub b: Vec<f64>,
    /// Row-major `k × num_labels`, rows sum to 1.
    pub label_dist: Vec<f64>,
    pub sizes: Vec<usize>,
    pub num_labels: usize,
    pub num_classes: usize,
}

impl MmsbParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        check_label_space(self.num_labels, self.num_classes)?;
        let fail = |m: &str| Err(BaselineError::Invalid(m.to_string()));
        if self.k == 0
            || self.alpha.len() != self.k
            || self.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite()))
        {
            return fail("alpha must have k positive entries");
        }
        if Some(self.b.len()) != self.k.checked_mul(self.k)
            || self.b.iter().any(|&p| !(0.0..=1.0).contains(&p))
        {
            return fail("B must be k × k with entries in [0, 1]");
        }
        if Some(self.label_dist.len()) != self.k.checked_mul(self.num_labels) {
            return fail("label distribution must be k × labels");
        }
        for row in self.label_dist.chunks(self.num_labels) {
            if row.iter().any(|&x| !(x >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return fail("label distribution rows must be stochastic");
            }
        }
        Ok(())
    }
}

/// Default Dirichlet concentration for [`mmsb_fit`].
pub const MMSB_ALPHA: f64 = 0.1;

/// Default number of Gibbs sweeps for [`mmsb_fit`].
pub const MMSB_ITERS: usize = 500;

struct Pair {
    graph_node_u: usize,
    graph_node_v: usize,
    edge: bool,
    send: usize,
    recv: usize,
}

fn block_pair(k: usize, a: usize, b: usize) -> usize {
    a.min(b) * k + a.max(b)
}

/// Collapsed Gibbs sampling over the per-pair block indicators of every
/// graph, with memberships and `B` integrated out (`Dir(alpha)` and
/// `Beta(1, 1)` priors). Returns posterior-mean `B` and a label distribution
/// per block weighted by posterior memberships.
pub fn mmsb_fit<R: Rng + ?Sized>(
    data: &GraphDataset,
    k: usize,
    alpha: f64,
    iters: usize,
    rng: &mut R,
) -> Result<MmsbParams, BaselineError> {
    let sizes = observed_sizes(data)?;
    if k == 0 || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(BaselineError::Invalid(
            "k must be positive and alpha a positive number".into(),
        ));
    }
    check_label_space(data.num_node_labels, data.num_graph_classes)?;
    // node ids are global across graphs
    let mut offsets = Vec::with_capacity(data.len());
    let mut total_nodes = 0;
    for g in &data.graphs {
        offsets.push(total_nodes);
        total_nodes += g.n();
    }
    let mut pairs = Vec::new();
    for (g, &off) in data.graphs.iter().zip(&offsets) {
        for u in 0..g.n() {
            for v in u + 1..g.n() {
                pairs.push(Pair {
                    graph_node_u: off + u,
                    graph_node_v: off + v,
                    edge: g.has_edge(u, v),
                    send: rng.random_range(0..k),
                    recv: rng.random_range(0..k),
                });
            }
        }
    }
    let mut member = vec![0.0; total_nodes * k];
    let mut links = vec![0.0; k * k];
    let mut trials = vec![0.0; k * k];
    for p in &pairs {
        member[p.graph_node_u * k + p.send] += 1.0;
        member[p.graph_node_v * k + p.recv] += 1.0;
        let bp = block_pair(k, p.send, p.recv);
        trials[bp] += 1.0;
        if p.edge {
            links[bp] += 1.0;
        }
    }
    let mut weights = vec![0.0; k];
    for _ in 0..iters {
        for p in pairs.iter_mut() {
            for side in 0..2 {
                let (node, current, other) = if side == 0 {
                    (p.graph_node_u, p.send, p.recv)
                } else {
                    (p.graph_node_v, p.recv, p.send)
                };
                let bp = block_pair(k, current, other);
                member[node * k + current] -= 1.0;
                trials[bp] -= 1.0;
                if p.edge {
                    links[bp] -= 1.0;
                }
                for (c, w) in weights.iter_mut().enumerate() {
                    let bp = block_pair(k, c, other);
                    let hit = if p.edge {
                        links[bp]
                    } else {
                        trials[bp] - links[bp]
                    };
                    *w = (member[node * k + c] + alpha) * (hit + 1.0) / (trials[bp] + 2.0);
                }
                let chosen = WeightedIndex::new(&weights)
                    .expect("weights are positive")
                    .sample(rng);
                let bp = block_pair(k, chosen, other);
                member[node * k + chosen] += 1.0;
                trials[bp] += 1.0;
                if p.edge {
                    links[bp] += 1.0;
                }
                if side == 0 {
                    p.send = chosen;
                } else {
                    p.recv = chosen;
                }
            }
        }
    }
    let mut b = vec![0.0; k * k];
    for r in 0..k {
        for c in 0..k {
            let bp = block_pair(k, r, c);
            b[r * k + c] = (links[bp] + 1.0) / (trials[bp] + 2.0);
        }
    }
    let labels = data.num_node_labels;
    let mut label_dist = vec![0.0; k * labels];
    for (g, &off) in data.graphs.iter().zip(&offsets) {
        for (v, &l) in g.node_labels().iter().enumerate() {
            let row = &member[(off + v) * k..(off + v + 1) * k];
            let total: f64 = row.iter().sum::<f64>() + k as f64 * alpha;
            for c in 0..k {
                label_dist[c * labels + l] += (row[c] + alpha) / total;
            }
        }
    }
    for row in label_dist.chunks_mut(labels) {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        } else {
            row.iter_mut().for_each(|x| *x = 1.0 / labels as f64);
        }
    }
    Ok(MmsbParams {
        k,
        alpha: vec![alpha; k],
        b,
        label_dist,
        sizes,
        num_labels: labels,
        num_classes: data.num_graph_classes,
    })
}

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draw: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("alpha validated").sample(rng))
        .collect();
    let total: f64 = draw.iter().sum();
    if total > 0.0 && total.is_finite() {
        draw.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma draw underflowed; fall back to a vertex of the simplex
        let pick = rng.random_range(0..alpha.len());
        draw = (0..alpha.len())
            .map(|i| if i == pick { 1.0 } else { 0.0 })
            .collect();
    }
    draw
}

pub fn mmsb_sample<R: Rng + ?Sized>(
    params: &MmsbParams,
    rng: &mut R,
) -> Result<LabeledGraph, BaselineError> {
    params.validate()?;
    let n = pick_size(&params.sizes, rng)?;
    let k = params.k;
    let memberships: Vec<Vec<f64>> = (0..n).map(|_| dirichlet(&params.alpha, rng)).collect();
    let pickers: Vec<WeightedIndex<f64>> = memberships
        .iter()
        .map(|m| WeightedIndex::new(m).expect("membership sums to 1"))
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let zu = pickers[u].sample(rng);
            let zv = pickers[v].sample(rng);
            if rng.random::<f64>() < params.b[zu * k + zv] {
                edges.push((u, v));
            }
        }
    }
    let c = params.num_labels;
    let labels = memberships
        .iter()
        .map(|m| {
            let block = argmax(m);
            WeightedIndex::new(&params.label_dist[block * c..(block + 1) * c])
                .expect("label rows are stochastic")
                .sample(rng)
        })
        .collect();
    let class = rng.random_range(0..params.num_classes);
    Ok(LabeledGraph::new(n, edges, labels, class).expect("sampled graph is valid"))
}
