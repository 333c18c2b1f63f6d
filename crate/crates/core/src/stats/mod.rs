//! Graph statistics and MMD between graph sets.

mod orbits;

pub use orbits::{node_orbit_counts, MAX_ORBIT_NODES, NUM_ORBITS};

use std::fmt;

use thiserror::Error;

use crate::{GraphDataset, LabeledGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("cannot compare a {0} histogram with a {1} histogram")]
    KindMismatch(StatKind, StatKind),
    #[error("MMD needs two nonempty sets")]
    EmptySet,
    #[error("graph with {n} nodes exceeds the orbit enumeration limit of {MAX_ORBIT_NODES}")]
    TooLarge { n: usize },
    #[error("label spaces differ: {0} vs {1} node labels")]
    LabelSpace(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    Degree,
    Clustering,
    Orbit,
    Label,
}

impl StatKind {
    pub fn name(self) -> &'static str {
        match self {
            StatKind::Degree => "degree",
            StatKind::Clustering => "clustering",
            StatKind::Orbit => "orbit",
            StatKind::Label => "label",
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A per-graph statistic. Bins are a normalized distribution, except for
/// [`StatKind::Orbit`] where they hold the mean orbit-count vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StatHistogram {
    pub kind: StatKind,
    pub bins: Vec<f64>,
}

/// Number of clustering-coefficient bins on `[0, 1]`.
pub const CLUSTERING_BINS: usize = 100;

fn normalized(kind: StatKind, counts: Vec<f64>) -> StatHistogram {
    let total: f64 = counts.iter().sum();
    let bins = if total > 0.0 {
        counts.into_iter().map(|c| c / total).collect()
    } else {
        counts
    };
    StatHistogram { kind, bins }
}

/// Degree distribution over bins `0..=max_degree`; larger degrees land in the
/// last bin.
pub fn degree_histogram(g: &LabeledGraph, max_degree: usize) -> StatHistogram {
    let mut counts = vec![0.0; max_degree + 1];
    for v in 0..g.n() {
        counts[g.degree(v).min(max_degree)] += 1.0;
    }
    normalized(StatKind::Degree, counts)
}

/// Local clustering coefficient of every node (0 below degree 2).
pub fn clustering_coefficients(g: &LabeledGraph) -> Vec<f64> {
    (0..g.n())
        .map(|v| {
            let nb = g.neighbors(v);
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                links += nb[i + 1..].iter().filter(|&&b| g.has_edge(a, b)).count();
            }
            links as f64 / (d * (d - 1) / 2) as f64
        })
        .collect()
}

pub fn clustering_histogram(g: &LabeledGraph, bins: usize) -> StatHistogram {
    let bins = bins.max(1);
    let mut counts = vec![0.0; bins];
    for c in clustering_coefficients(g) {
        counts[((c * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    normalized(StatKind::Clustering, counts)
}

/// Mean per-node orbit-count vector.
pub fn orbit_counts(g: &LabeledGraph) -> Result<StatHistogram, StatsError> {
    let counts = node_orbit_counts(g).ok_or(StatsError::TooLarge { n: g.n() })?;
    let mut mean = vec![0.0; NUM_ORBITS];
    for node in &counts {
        for (m, &c) in mean.iter_mut().zip(node) {
            *m += c as f64;
        }
    }
    let n = g.n().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(StatHistogram {
        kind: StatKind::Orbit,
        bins: mean,
    })
}

pub fn label_distribution(g: &LabeledGraph, num_labels: usize) -> StatHistogram {
    let mut counts = vec![0.0; num_labels];
    for &l in g.node_labels() {
        if l < num_labels {
            counts[l] += 1.0;
        }
    }
    normalized(StatKind::Label, counts)
}

/// Distance used inside the MMD kernel: first Wasserstein distance between
/// distributions (bins spaced `bin_width` apart, shorter one zero-padded), or
/// Euclidean distance between orbit vectors.
pub fn histogram_distance(a: &StatHistogram, b: &StatHistogram) -> Result<f64, StatsError> {
    if a.kind != b.kind {
        return Err(StatsError::KindMismatch(a.kind, b.kind));
    }
    let len = a.bins.len().max(b.bins.len());
    let at = |h: &StatHistogram, i: usize| h.bins.get(i).copied().unwrap_or(0.0);
    if a.kind == StatKind::Orbit {
        let sq: f64 = (0..len).map(|i| (at(a, i) - at(b, i)).powi(2)).sum();
        return Ok(sq.sqrt());
    }
    let width = if a.kind == StatKind::Clustering {
        1.0 / len as f64
    } else {
        1.0
    };
    let (mut ca, mut cb, mut total) = (0.0, 0.0, 0.0);
    for i in 0..len {
        ca += at(a, i);
        cb += at(b, i);
        total += (ca - cb).abs();
    }
    Ok(total * width)
}

fn gaussian(a: &StatHistogram, b: &StatHistogram, sigma: f64) -> Result<f64, StatsError> {
    let d = histogram_distance(a, b)?;
    Ok((-d * d / (2.0 * sigma * sigma)).exp())
}

fn kernel_sum(xs: &[StatHistogram], ys: &[StatHistogram], sigma: f64) -> Result<f64, StatsError> {
    let mut total = 0.0;
    for x in xs {
        for y in ys {
            total += gaussian(x, y, sigma)?;
        }
    }
    Ok(total)
}

/// Biased (V-statistic) MMD with a Gaussian kernel over
/// [`histogram_distance`]; returns `sqrt(max(MMD², 0))`.
pub fn mmd(a: &[StatHistogram], b: &[StatHistogram], sigma: f64) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySet);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let kaa = kernel_sum(a, a, sigma)? / (na * na);
    let kbb = kernel_sum(b, b, sigma)? / (nb * nb);
    // both cross orders are summed so that swapping the sets is exact
    let kab = (kernel_sum(a, b, sigma)? + kernel_sum(b, a, sigma)?) / (2.0 * na * nb);
    Ok((kaa + kbb - 2.0 * kab).max(0.0).sqrt())
}

/// Kernel bandwidth per metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    pub degree: f64,
    pub clustering: f64,
    pub orbit: f64,
    pub label: f64,
}

impl Default for Bandwidths {
    fn default() -> Self {
        Self {
            degree: 1.0,
            clustering: 0.1,
            orbit: 1.0,
            label: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdReport {
    pub degree: f64,
    pub clustering: f64,
    pub orbit: f64,
    pub label: f64,
}

/// Name of the estimator, as written in reports.
pub const ESTIMATOR: &str = "biased-v";

fn max_degree(graphs: &[&LabeledGraph]) -> usize {
    graphs
        .iter()
        .flat_map(|g| (0..g.n()).map(move |v| g.degree(v)))
        .max()
        .unwrap_or(0)
}

/// Degree, clustering and orbit MMD between two graph sets.
fn structural(
    a: &[&LabeledGraph],
    b: &[&LabeledGraph],
    sigma: &Bandwidths,
) -> Result<[f64; 3], StatsError> {
    let all: Vec<&LabeledGraph> = a.iter().chain(b).copied().collect();
    let bins = max_degree(&all);
    let deg = |s: &[&LabeledGraph]| {
        s.iter()
            .map(|g| degree_histogram(g, bins))
            .collect::<Vec<_>>()
    };
    let clu = |s: &[&LabeledGraph]| {
        s.iter()
            .map(|g| clustering_histogram(g, CLUSTERING_BINS))
            .collect::<Vec<_>>()
    };
    let orb = |s: &[&LabeledGraph]| {
        s.iter()
            .map(|g| orbit_counts(g))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok([
        mmd(&deg(a), &deg(b), sigma.degree)?,
        mmd(&clu(a), &clu(b), sigma.clustering)?,
        mmd(&orb(a)?, &orb(b)?, sigma.orbit)?,
    ])
}

pub fn evaluate(
    generated: &GraphDataset,
    reference: &GraphDataset,
    sigma: &Bandwidths,
) -> Result<MmdReport, StatsError> {
    if generated.num_node_labels != reference.num_node_labels {
        return Err(StatsError::LabelSpace(
            generated.num_node_labels,
            reference.num_node_labels,
        ));
    }
    let a: Vec<&LabeledGraph> = generated.graphs.iter().collect();
    let b: Vec<&LabeledGraph> = reference.graphs.iter().collect();
    let [degree, clustering, orbit] = structural(&a, &b, sigma)?;
    let labels = |s: &[&LabeledGraph]| {
        s.iter()
            .map(|g| label_distribution(g, reference.num_node_labels))
            .collect::<Vec<_>>()
    };
    Ok(MmdReport {
        degree,
        clustering,
        orbit,
        label: mmd(&labels(&a), &labels(&b), sigma.label)?,
    })
}

/// Structural MMDs restricted to the subgraphs induced by each node label.
#[derive(Debug, Clone, PartialEq)]
pub struct PerClassReport {
    /// `(label, [degree, clustering, orbit])` for labels present in both sets.
    pub per_label: Vec<(usize, [f64; 3])>,
    /// Labels missing from at least one set.
    pub skipped: Vec<usize>,
    /// Mean over `per_label`; `None` if every label was skipped.
    pub average: Option<[f64; 3]>,
}

fn label_subgraphs(data: &GraphDataset, label: usize) -> Vec<LabeledGraph> {
    data.graphs
        .iter()
        .filter_map(|g| {
            let nodes: Vec<usize> = (0..g.n())
                .filter(|&v| g.node_labels()[v] == label)
                .collect();
            if nodes.is_empty() {
                None
            } else {
                Some(g.induced_subgraph(&nodes).expect("nodes are in range"))
            }
        })
        .collect()
}

pub fn per_class_stats(
    generated: &GraphDataset,
    reference: &GraphDataset,
    sigma: &Bandwidths,
) -> Result<PerClassReport, StatsError> {
    if generated.num_node_labels != reference.num_node_labels {
        return Err(StatsError::LabelSpace(
            generated.num_node_labels,
            reference.num_node_labels,
        ));
    }
    let mut per_label = Vec::new();
    let mut skipped = Vec::new();
    for label in 0..reference.num_node_labels {
        let a = label_subgraphs(generated, label);
        let b = label_subgraphs(reference, label);
        if a.is_empty() || b.is_empty() {
            skipped.push(label);
            continue;
        }
        let a: Vec<&LabeledGraph> = a.iter().collect();
        let b: Vec<&LabeledGraph> = b.iter().collect();
        per_label.push((label, structural(&a, &b, sigma)?));
    }
    let average = (!per_label.is_empty()).then(|| {
        let mut avg = [0.0; 3];
        for (_, v) in &per_label {
            for k in 0..3 {
                avg[k] += v[k];
            }
        }
        avg.map(|x| x / per_label.len() as f64)
    });
    Ok(PerClassReport {
        per_label,
        skipped,
        average,
    })
}
