//! Graph kernels, kernel distances, diversity histograms and a kernel SVM
//! for downstream classification.

mod svm;

pub use svm::{svm_train, BinarySvm, SvmModel, KKT_TOL};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use thiserror::Error;

use crate::rng;
use crate::{GraphDataset, LabeledGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("index {index} out of range for a {n}×{n} kernel matrix")]
    Index { index: usize, n: usize },
    #[error("SVM needs at least two classes in the training set")]
    SingleClass,
    #[error("class {0} does not occur in the training set")]
    MissingClass(usize),
    #[error("{0} set is empty")]
    Empty(&'static str),
    #[error("class spaces differ: {0} vs {1}")]
    ClassSpace(usize, usize),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

/// Default number of WL refinement rounds.
pub const WL_ITERATIONS: usize = 3;
/// Shortest-path distances above this share one bin.
pub const SP_MAX_DISTANCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Wl { h: usize },
    ShortestPath,
    Graphlet { k: usize },
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Wl { .. } => "wl",
            KernelKind::ShortestPath => "sp",
            KernelKind::Graphlet { .. } => "graphlet",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wl" => Ok(KernelKind::Wl { h: WL_ITERATIONS }),
            "sp" => Ok(KernelKind::ShortestPath),
            "graphlet" | "gk" => Ok(KernelKind::Graphlet { k: 3 }),
            _ => Err(format!(
                "unknown kernel `{s}` (expected wl, sp or graphlet)"
            )),
        }
    }
}

/// Sparse feature vector: `(key, value)` sorted by key.
pub type Features = Vec<(u64, f64)>;

fn from_counts(counts: HashMap<u64, f64>) -> Features {
    let mut v: Features = counts.into_iter().collect();
    v.sort_unstable_by_key(|&(k, _)| k);
    v
}

pub fn dot(a: &Features, b: &Features) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    total
}

/// WL subtree features for a set of graphs sharing one relabeling
/// dictionary, accumulated over rounds `0..=h`.
pub fn wl_features(graphs: &[&LabeledGraph], h: usize) -> Vec<Features> {
    let mut labels: Vec<Vec<u64>> = graphs
        .iter()
        .map(|g| g.node_labels().iter().map(|&l| l as u64).collect())
        .collect();
    let mut counts: Vec<HashMap<u64, f64>> = vec![HashMap::new(); graphs.len()];
    let key = |round: usize, label: u64| ((round as u64) << 48) | label;
    for (c, ls) in counts.iter_mut().zip(&labels) {
        for &l in ls {
            *c.entry(key(0, l)).or_insert(0.0) += 1.0;
        }
    }
    for round in 1..=h {
        let mut dictionary: HashMap<(u64, Vec<u64>), u64> = HashMap::new();
        let mut next_labels = Vec::with_capacity(graphs.len());
        for (g, ls) in graphs.iter().zip(&labels) {
            let relabeled: Vec<u64> = (0..g.n())
                .map(|v| {
                    let mut nb: Vec<u64> = g.neighbors(v).iter().map(|&u| ls[u]).collect();
                    nb.sort_unstable();
                    let fresh = dictionary.len() as u64;
                    *dictionary.entry((ls[v], nb)).or_insert(fresh)
                })
                .collect();
            next_labels.push(relabeled);
        }
        labels = next_labels;
        for (c, ls) in counts.iter_mut().zip(&labels) {
            for &l in ls {
                *c.entry(key(round, l)).or_insert(0.0) += 1.0;
            }
        }
    }
    counts.into_iter().map(from_counts).collect()
}

/// Counts of `(label pair, distance)` over unordered node pairs joined by a
/// path; distances above [`SP_MAX_DISTANCE`] are capped.
pub fn sp_features(g: &LabeledGraph) -> Features {
    let mut counts = HashMap::new();
    let labels = g.node_labels();
    for u in 0..g.n() {
        let dist = g.bfs_distances(u);
        for (v, d) in dist.iter().enumerate().skip(u + 1) {
            if let Some(d) = *d {
                let (a, b) = (
                    labels[u].min(labels[v]) as u64,
                    labels[u].max(labels[v]) as u64,
                );
                let key = (a << 36) | (b << 8) | d.min(SP_MAX_DISTANCE) as u64;
                *counts.entry(key).or_insert(0.0) += 1.0;
            }
        }
    }
    from_counts(counts)
}

/// Number of isomorphism types of graphs on `k` nodes.
pub fn graphlet_types(k: usize) -> usize {
    match k {
        3 => 4,
        4 => 11,
        _ => 0,
    }
}

/// Isomorphism type of a graph on 3 or 4 nodes, from its edge count and
/// sorted degree sequence.
fn graphlet_type(edges: usize, degrees: &mut [usize]) -> usize {
    if degrees.len() == 3 {
        return edges;
    }
    degrees.sort_unstable();
    match (edges, &degrees[..]) {
        (0, _) => 0,
        (1, _) => 1,
        (2, [0, 1, 1, 2]) => 2,
        (2, _) => 3,
        (3, [0, 2, 2, 2]) => 4,
        (3, [1, 1, 2, 2]) => 5,
        (3, _) => 6,
        (4, [2, 2, 2, 2]) => 7,
        (4, _) => 8,
        (5, _) => 9,
        _ => 10,
    }
}

/// Frequencies of the induced subgraph types on `k ∈ {3, 4}` nodes. Types for
/// `k = 3` are indexed by edge count; graphs smaller than `k` have no features.
pub fn graphlet_frequencies(g: &LabeledGraph, k: usize) -> Result<Vec<f64>, KernelError> {
    let types = graphlet_types(k);
    if types == 0 {
        return Err(KernelError::Invalid(format!(
            "graphlet size must be 3 or 4, got {k}"
        )));
    }
    let mut counts = vec![0.0; types];
    let n = g.n();
    if n < k {
        return Ok(counts);
    }
    let mut subset: Vec<usize> = (0..k).collect();
    let mut total = 0.0;
    loop {
        let mut degrees = [0usize; 4];
        let mut edges = 0;
        for a in 0..k {
            for b in a + 1..k {
                if g.has_edge(subset[a], subset[b]) {
                    edges += 1;
                    degrees[a] += 1;
                    degrees[b] += 1;
                }
            }
        }
        counts[graphlet_type(edges, &mut degrees[..k])] += 1.0;
        total += 1.0;
        // next k-combination in lexicographic order
        let Some(i) = (0..k).rev().find(|&i| subset[i] < n - k + i) else {
            break;
        };
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(counts)
}

/// Feature vectors of `graphs` under `kind`; WL labels are shared across the set.
pub fn features(kind: KernelKind, graphs: &[&LabeledGraph]) -> Result<Vec<Features>, KernelError> {
    match kind {
        KernelKind::Wl { h } => Ok(wl_features(graphs, h)),
        KernelKind::ShortestPath => Ok(graphs.iter().map(|g| sp_features(g)).collect()),
        KernelKind::Graphlet { k } => graphs
            .iter()
            .map(|g| {
                let f = graphlet_frequencies(g, k)?;
                Ok(f.into_iter()
                    .enumerate()
                    .filter(|&(_, x)| x != 0.0)
                    .map(|(i, x)| (i as u64, x))
                    .collect())
            })
            .collect(),
    }
}

pub fn wl_kernel(a: &LabeledGraph, b: &LabeledGraph, h: usize) -> f64 {
    let f = wl_features(&[a, b], h);
    dot(&f[0], &f[1])
}

pub fn sp_kernel(a: &LabeledGraph, b: &LabeledGraph) -> f64 {
    dot(&sp_features(a), &sp_features(b))
}

pub fn graphlet_kernel(a: &LabeledGraph, b: &LabeledGraph, k: usize) -> Result<f64, KernelError> {
    let fa = graphlet_frequencies(a, k)?;
    let fb = graphlet_frequencies(b, k)?;
    Ok(fa.iter().zip(&fb).map(|(x, y)| x * y).sum())
}

/// Dense symmetric Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_features(f: &[Features]) -> Self {
        let n = f.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = dot(&f[i], &f[j]);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Self { n, values }
    }

    /// Takes a row-major `n × n` matrix as is.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self, KernelError> {
        if values.len() != n * n {
            return Err(KernelError::Invalid(format!(
                "{} values for a {n}×{n} matrix",
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn gram(kind: KernelKind, graphs: &[&LabeledGraph]) -> Result<Self, KernelError> {
        Ok(Self::from_features(&features(kind, graphs)?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `K_ij / sqrt(K_ii K_jj)`; a graph with an all-zero feature vector is
    /// treated as orthogonal to everything but itself.
    pub fn normalized(&self) -> Self {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = self.get(i, i) * self.get(j, j);
                values[i * n + j] = if d > 0.0 {
                    self.get(i, j) / d.sqrt()
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
            }
        }
        Self { n, values }
    }

    /// Square matrix of the rows and columns listed in `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let values = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self {
            n: idx.len(),
            values,
        }
    }
}

/// `sqrt(K_ii + K_jj - 2 K_ij)`, floored at 0.
pub fn kernel_distance(k: &KernelMatrix, i: usize, j: usize) -> Result<f64, KernelError> {
    for index in [i, j] {
        if index >= k.n() {
            return Err(KernelError::Index { index, n: k.n() });
        }
    }
    Ok((k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j))
        .max(0.0)
        .sqrt())
}

/// Minimum-distance histograms over `[0, √2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diversity {
    /// `bins + 1` bin edges.
    pub edges: Vec<f64>,
    /// For each training graph, the distance to its nearest other training graph.
    pub training_min: Vec<f64>,
    /// For each generated graph, the distance to its nearest training graph.
    pub generated_min: Vec<f64>,
    pub training_counts: Vec<usize>,
    pub generated_counts: Vec<usize>,
}

fn bin_counts(values: &[f64], bins: usize, hi: f64) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let b = ((v / hi) * bins as f64).floor().max(0.0) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    counts
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Nearest-neighbor distances under the normalized kernel of `kind`.
pub fn diversity(
    generated: &GraphDataset,
    training: &GraphDataset,
    kind: KernelKind,
    bins: usize,
) -> Result<Diversity, KernelError> {
    if generated.is_empty() {
        return Err(KernelError::Empty("generated"));
    }
    if training.is_empty() {
        return Err(KernelError::Empty("training"));
    }
    if bins == 0 {
        return Err(KernelError::Invalid("need at least one bin".into()));
    }
    let nt = training.len();
    let all: Vec<&LabeledGraph> = training.graphs.iter().chain(&generated.graphs).collect();
    let k = KernelMatrix::gram(kind, &all)?.normalized();
    let nearest = |i: usize, exclude_self: bool| -> Result<Option<f64>, KernelError> {
        let mut best: Option<f64> = None;
        for j in 0..nt {
            if exclude_self && j == i {
                continue;
            }
            let d = kernel_distance(&k, i, j)?;
            best = Some(best.map_or(d, |b| b.min(d)));
        }
        Ok(best)
    };
    let mut training_min = Vec::with_capacity(nt);
    for i in 0..nt {
        if let Some(d) = nearest(i, true)? {
            training_min.push(d);
        }
    }
    let mut generated_min = Vec::with_capacity(generated.len());
    for i in nt..all.len() {
        generated_min.push(nearest(i, false)?.expect("training set is nonempty"));
    }
    let hi = 2f64.sqrt();
    Ok(Diversity {
        edges: (0..=bins).map(|b| hi * b as f64 / bins as f64).collect(),
        training_counts: bin_counts(&training_min, bins, hi),
        generated_counts: bin_counts(&generated_min, bins, hi),
        training_min,
        generated_min,
    })
}

/// Settings for [`downstream_trials`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownstreamConfig {
    pub kernel: KernelKind,
    pub c: f64,
    pub trials: usize,
    /// Share of the training set drawn (without replacement) in each trial.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Wl { h: WL_ITERATIONS },
            c: 1.0,
            trials: 10,
            fraction: 0.9,
            seed: 0,
        }
    }
}

struct Joint {
    k: KernelMatrix,
    n_train: usize,
    train_classes: Vec<usize>,
    test_classes: Vec<usize>,
}

fn joint(
    train: &GraphDataset,
    test: &GraphDataset,
    kind: KernelKind,
) -> Result<Joint, KernelError> {
    if train.is_empty() {
        return Err(KernelError::Empty("training"));
    }
    if test.is_empty() {
        return Err(KernelError::Empty("test"));
    }
    if train.num_graph_classes != test.num_graph_classes {
        return Err(KernelError::ClassSpace(
            train.num_graph_classes,
            test.num_graph_classes,
        ));
    }
    let train_classes: Vec<usize> = train.graphs.iter().map(LabeledGraph::graph_class).collect();
    let test_classes: Vec<usize> = test.graphs.iter().map(LabeledGraph::graph_class).collect();
    for &c in &test_classes {
        if !train_classes.contains(&c) {
            return Err(KernelError::MissingClass(c));
        }
    }
    let all: Vec<&LabeledGraph> = train.graphs.iter().chain(&test.graphs).collect();
    Ok(Joint {
        k: KernelMatrix::gram(kind, &all)?.normalized(),
        n_train: train.len(),
        train_classes,
        test_classes,
    })
}

fn accuracy_on(j: &Joint, train_idx: &[usize], c: f64) -> Result<f64, KernelError> {
    let classes: Vec<usize> = train_idx.iter().map(|&i| j.train_classes[i]).collect();
    let model = svm_train(&j.k.submatrix(train_idx), &classes, c)?;
    let mut correct = 0;
    for (t, &truth) in j.test_classes.iter().enumerate() {
        let row: Vec<f64> = train_idx
            .iter()
            .map(|&i| j.k.get(j.n_train + t, i))
            .collect();
        if model.predict(&row) == truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / j.test_classes.len() as f64)
}

/// Trains on all of `train` under the normalized kernel and returns the
/// accuracy on `test`.
pub fn downstream_eval(
    train: &GraphDataset,
    test: &GraphDataset,
    kind: KernelKind,
    c: f64,
) -> Result<f64, KernelError> {
    let j = joint(train, test, kind)?;
    let idx: Vec<usize> = (0..j.n_train).collect();
    accuracy_on(&j, &idx, c)
}

/// Per-trial test accuracies; each trial trains on a seeded random subset of
/// the training set.
pub fn downstream_trials(
    train: &GraphDataset,
    test: &GraphDataset,
    config: &DownstreamConfig,
) -> Result<Vec<f64>, KernelError> {
    if !(config.fraction > 0.0 && config.fraction <= 1.0) || config.trials == 0 {
        return Err(KernelError::Invalid(
            "fraction must be in (0, 1] and trials positive".into(),
        ));
    }
    let j = joint(train, test, config.kernel)?;
    let take = ((j.n_train as f64 * config.fraction).round() as usize).clamp(1, j.n_train);
    (0..config.trials)
        .map(|t| {
            let mut r = rng::substream(config.seed, "downstream-trial", t as u64);
            let mut idx = sample(&mut r, j.n_train, take).into_vec();
            idx.sort_unstable();
            accuracy_on(&j, &idx, config.c)
        })
        .collect()
}
