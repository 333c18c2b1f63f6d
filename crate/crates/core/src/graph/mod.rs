//! Labeled graphs and the preprocessing used before training.
//!
//! A [`LabeledGraph`] is undirected, unweighted and simple; each node carries a
//! categorical label and the graph carries a class. Training consumes graphs in
//! their [`DenseGraph`] form after BFS canonicalization.

mod dataset;
mod synthetic;

pub use dataset::{write_atomic, GraphDataset, ParseError, ParseErrorKind};
pub use synthetic::{planted_partition, P_IN, P_OUT};

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge ({u}, {v}) has an endpoint outside [0, {n})")]
    EdgeOutOfRange { u: usize, v: usize, n: usize },
    #[error("expected {expected} node labels, found {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("node {node} has label {label}, outside [0, {bound})")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        bound: usize,
    },
    #[error("graph class {class} outside [0, {bound})")]
    ClassOutOfRange { class: usize, bound: usize },
    #[error("node {node} outside [0, {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("permutation of length {len} is not a bijection over [0, {n})")]
    BadPermutation { len: usize, n: usize },
    #[error("graph with {n} nodes does not fit into {n_max} slots")]
    TooLarge { n: usize, n_max: usize },
}

/// Undirected simple graph with node labels and a graph class.
///
/// Edges are stored once, as `(u, v)` with `u < v`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    node_labels: Vec<usize>,
    graph_class: usize,
    adjacency: Vec<Vec<usize>>,
}

impl LabeledGraph {
    /// Builds a graph, rejecting self-loops, duplicate or out-of-range edges and
    /// a label vector whose length differs from `n`. Edge endpoint order does
    /// not matter.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        node_labels: Vec<usize>,
        graph_class: usize,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if node_labels.len() != n {
            return Err(GraphError::LabelCount {
                expected: n,
                found: node_labels.len(),
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EdgeOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if adjacency[a].contains(&b) {
                return Err(GraphError::DuplicateEdge { u: a, v: b });
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
            list.push((a, b));
        }
        list.sort_unstable();
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        Ok(Self {
            n,
            edges: list,
            node_labels,
            graph_class,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_labels(&self) -> &[usize] {
        &self.node_labels
    }

    pub fn graph_class(&self) -> usize {
        self.graph_class
    }

    pub fn with_class(mut self, class: usize) -> Self {
        self.graph_class = class;
        self
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Checks label bounds against a label space. Structural invariants are
    /// enforced by [`LabeledGraph::new`].
    pub fn validate(
        &self,
        num_node_labels: usize,
        num_graph_classes: usize,
    ) -> Result<(), GraphError> {
        for (node, &label) in self.node_labels.iter().enumerate() {
            if label >= num_node_labels {
                return Err(GraphError::LabelOutOfRange {
                    node,
                    label,
                    bound: num_node_labels,
                });
            }
        }
        if self.graph_class >= num_graph_classes {
            return Err(GraphError::ClassOutOfRange {
                class: self.graph_class,
                bound: num_graph_classes,
            });
        }
        Ok(())
    }

    /// Relabels nodes so that old node `order[k]` becomes node `k`.
    pub fn reorder(&self, order: &[usize]) -> Result<Self, GraphError> {
        let position = inverse_permutation(order, self.n)?;
        let labels = order.iter().map(|&v| self.node_labels[v]).collect();
        let edges = self.edges.iter().map(|&(u, v)| (position[u], position[v]));
        Self::new(self.n, edges, labels, self.graph_class)
    }

    /// Subgraph induced by `nodes`, which keep their relative order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self, GraphError> {
        let mut position = vec![usize::MAX; self.n];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.n {
                return Err(GraphError::NodeOutOfRange { node: v, n: self.n });
            }
            position[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| position[u] != usize::MAX && position[v] != usize::MAX)
            .map(|&(u, v)| (position[u], position[v]));
        let labels = nodes.iter().map(|&v| self.node_labels[v]).collect();
        Self::new(nodes.len(), edges, labels, self.graph_class)
    }

    /// Hop distance from `source` to every node (`None` if unreachable).
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

fn inverse_permutation(perm: &[usize], n: usize) -> Result<Vec<usize>, GraphError> {
    let bad = GraphError::BadPermutation { len: perm.len(), n };
    if perm.len() != n {
        return Err(bad);
    }
    let mut inv = vec![usize::MAX; n];
    for (i, &p) in perm.iter().enumerate() {
        if p >= n || inv[p] != usize::MAX {
            return Err(bad);
        }
        inv[p] = i;
    }
    Ok(inv)
}

/// Breadth-first node order.
///
/// `relabel[v]` is the index node `v` takes under the input permutation; it
/// only decides tie-breaks: neighbors are visited in ascending relabeled index,
/// and once the component of `start` is exhausted the search restarts from
/// the unvisited node with the lowest relabeled index. The result lists
/// original node indices in visit order.
pub fn bfs_order(
    graph: &LabeledGraph,
    start: usize,
    relabel: &[usize],
) -> Result<Vec<usize>, GraphError> {
    let n = graph.n();
    if start >= n {
        return Err(GraphError::NodeOutOfRange { node: start, n });
    }
    // by_rank[r] = original node with relabeled index r
    let by_rank = inverse_permutation(relabel, n)?;
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut next_root = 0;
    let mut root = Some(start);
    while let Some(r) = root {
        visited[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut frontier: Vec<usize> = graph
                .neighbors(u)
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            frontier.sort_unstable_by_key(|&w| relabel[w]);
            for w in frontier {
                visited[w] = true;
                queue.push_back(w);
            }
        }
        while next_root < n && visited[by_rank[next_root]] {
            next_root += 1;
        }
        root = (next_root < n).then(|| by_rank[next_root]);
    }
    Ok(order)
}

/// Random BFS canonical form: a uniform permutation breaks ties and a uniform
/// start node roots the search.
pub fn canonicalize<R: Rng + ?Sized>(graph: &LabeledGraph, rng: &mut R) -> LabeledGraph {
    let n = graph.n();
    let mut relabel: Vec<usize> = (0..n).collect();
    relabel.shuffle(rng);
    let start = rng.random_range(0..n);
    let order = bfs_order(graph, start, &relabel).expect("start and permutation are in range");
    graph.reorder(&order).expect("bfs order is a permutation")
}

/// Induced subgraph on the `hops`-ball around `center`, or `None` when its size
/// falls outside `[min_n, max_n]`. The graph class becomes the center's label.
pub fn extract_ego_network(
    host: &LabeledGraph,
    center: usize,
    hops: usize,
    min_n: usize,
    max_n: usize,
) -> Result<Option<LabeledGraph>, GraphError> {
    if center >= host.n() {
        return Err(GraphError::NodeOutOfRange {
            node: center,
            n: host.n(),
        });
    }
    let ball: Vec<usize> = host
        .bfs_distances(center)
        .iter()
        .enumerate()
        .filter_map(|(v, d)| d.filter(|&d| d <= hops).map(|_| v))
        .collect();
    if ball.len() < min_n || ball.len() > max_n {
        return Ok(None);
    }
    let class = host.node_labels()[center];
    Ok(Some(host.induced_subgraph(&ball)?.with_class(class)))
}

/// Zero-padded dense form with `n_max` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGraph {
    pub n_max: usize,
    pub num_labels: usize,
    /// Row-major `n_max × n_max`, symmetric 0/1 with zero diagonal.
    pub adj: Vec<f64>,
    /// Row-major `n_max × num_labels`; one-hot on real slots, zero on padding.
    pub labels: Vec<f64>,
    pub mask: Vec<bool>,
    pub graph_class: usize,
}

impl DenseGraph {
    pub fn adj_at(&self, i: usize, j: usize) -> f64 {
        self.adj[i * self.n_max + j]
    }
}

pub fn to_dense(
    graph: &LabeledGraph,
    n_max: usize,
    num_labels: usize,
) -> Result<DenseGraph, GraphError> {
    if graph.n() > n_max {
        return Err(GraphError::TooLarge {
            n: graph.n(),
            n_max,
        });
    }
    graph.validate(num_labels, usize::MAX)?;
    let mut adj = vec![0.0; n_max * n_max];
    for &(u, v) in graph.edges() {
        adj[u * n_max + v] = 1.0;
        adj[v * n_max + u] = 1.0;
    }
    let mut labels = vec![0.0; n_max * num_labels];
    for (v, &l) in graph.node_labels().iter().enumerate() {
        labels[v * num_labels + l] = 1.0;
    }
    let mask = (0..n_max).map(|i| i < graph.n()).collect();
    Ok(DenseGraph {
        n_max,
        num_labels,
        adj,
        labels,
        mask,
        graph_class: graph.graph_class(),
    })
}

/// Drops degree-0 slots and compacts the rest in slot order. Labels are the
/// argmax of each label row (lowest index on ties). A graph with no edges at
/// all collapses to the single node in slot 0.
pub fn prune_isolated(dense: &DenseGraph) -> LabeledGraph {
    let n = dense.n_max;
    let c = dense.num_labels;
    let label_of = |i: usize| argmax(&dense.labels[i * c..(i + 1) * c]);
    let kept: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| j != i && dense.adj_at(i, j) > 0.5))
        .collect();
    if kept.is_empty() {
        return LabeledGraph::new(1, [], vec![label_of(0)], dense.graph_class)
            .expect("single node graph is valid");
    }
    let mut position = vec![usize::MAX; n];
    for (k, &i) in kept.iter().enumerate() {
        position[i] = k;
    }
    let mut edges = Vec::new();
    for (a, &i) in kept.iter().enumerate() {
        for &j in &kept[a + 1..] {
            if dense.adj_at(i, j) > 0.5 || dense.adj_at(j, i) > 0.5 {
                edges.push((position[i], position[j]));
            }
        }
    }
    let labels = kept.iter().map(|&i| label_of(i)).collect();
    LabeledGraph::new(kept.len(), edges, labels, dense.graph_class)
        .expect("compacted graph is valid")
}

/// Index of the largest entry; ties go to the lowest index. Empty input is 0.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn path(n: usize) -> LabeledGraph {
        LabeledGraph::new(n, (1..n).map(|i| (i - 1, i)), vec![0; n], 0).unwrap()
    }

    fn star(leaves: usize) -> LabeledGraph {
        LabeledGraph::new(
            leaves + 1,
            (1..=leaves).map(|i| (0, i)),
            vec![0; leaves + 1],
            0,
        )
        .unwrap()
    }

    fn identity(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn validate_cases() {
        let k3 = LabeledGraph::new(3, [(0, 1), (1, 2), (0, 2)], vec![0, 0, 1], 0).unwrap();
        assert!(k3.validate(2, 1).is_ok());
        assert_eq!(
            LabeledGraph::new(2, [(0, 0)], vec![0, 0], 0),
            Err(GraphError::SelfLoop { node: 0 })
        );
        let g = LabeledGraph::new(2, [(0, 1)], vec![0, 7], 0).unwrap();
        assert_eq!(
            g.validate(6, 1),
            Err(GraphError::LabelOutOfRange {
                node: 1,
                label: 7,
                bound: 6
            })
        );
        assert_eq!(
            LabeledGraph::new(3, [(0, 1), (1, 0)], vec![0; 3], 0),
            Err(GraphError::DuplicateEdge { u: 0, v: 1 })
        );
        assert!(matches!(
            LabeledGraph::new(2, [(0, 2)], vec![0; 2], 0),
            Err(GraphError::EdgeOutOfRange { .. })
        ));
        assert!(matches!(
            LabeledGraph::new(2, [], vec![0], 0),
            Err(GraphError::LabelCount { .. })
        ));
    }

    #[test]
    fn bfs_examples() {
        assert_eq!(
            bfs_order(&star(4), 0, &identity(5)).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            bfs_order(&path(4), 3, &identity(4)).unwrap(),
            vec![3, 2, 1, 0]
        );
        let two = LabeledGraph::new(4, [(0, 1), (2, 3)], vec![0; 4], 0).unwrap();
        assert_eq!(bfs_order(&two, 1, &identity(4)).unwrap(), vec![1, 0, 2, 3]);
        assert!(matches!(
            bfs_order(&two, 4, &identity(4)),
            Err(GraphError::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn bfs_uses_relabeled_tie_break() {
        // center 0 with leaves 1..3; relabeling reverses leaf priority
        let g = star(3);
        let relabel = vec![0, 3, 2, 1];
        assert_eq!(bfs_order(&g, 0, &relabel).unwrap(), vec![0, 3, 2, 1]);
        // restart picks the lowest relabeled index among unvisited nodes
        let two = LabeledGraph::new(5, [(0, 1), (2, 3)], vec![0; 5], 0).unwrap();
        let relabel = vec![4, 3, 1, 2, 0];
        assert_eq!(bfs_order(&two, 0, &relabel).unwrap(), vec![0, 1, 4, 2, 3]);
    }

    #[test]
    fn canonicalize_preserves_multisets_and_bfs_property() {
        let mut r = rng::stream(3, "test");
        let g = LabeledGraph::new(
            6,
            [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)],
            vec![0, 1, 2, 0, 1, 2],
            1,
        )
        .unwrap();
        for _ in 0..20 {
            let c = canonicalize(&g, &mut r);
            let mut d1: Vec<usize> = (0..6).map(|v| g.degree(v)).collect();
            let mut d2: Vec<usize> = (0..6).map(|v| c.degree(v)).collect();
            d1.sort_unstable();
            d2.sort_unstable();
            assert_eq!(d1, d2);
            let mut l1 = g.node_labels().to_vec();
            let mut l2 = c.node_labels().to_vec();
            l1.sort_unstable();
            l2.sort_unstable();
            assert_eq!(l1, l2);
            assert_eq!(c.graph_class(), 1);
        }
        let p = path(7);
        for _ in 0..20 {
            let c = canonicalize(&p, &mut r);
            for v in 1..7 {
                assert!(
                    c.neighbors(v).iter().any(|&u| u < v),
                    "node {v} has no earlier neighbor"
                );
            }
        }
    }

    #[test]
    fn ego_network_examples() {
        let s = star(4);
        let ego = extract_ego_network(&s, 0, 1, 1, 10).unwrap().unwrap();
        assert_eq!(ego.n(), 5);
        assert_eq!(ego.num_edges(), 4);
        let p = LabeledGraph::new(5, (1..5).map(|i| (i - 1, i)), vec![0, 1, 2, 3, 4], 0).unwrap();
        let ego = extract_ego_network(&p, 2, 1, 1, 10).unwrap().unwrap();
        assert_eq!(ego.node_labels(), &[1, 2, 3]);
        assert_eq!(ego.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(ego.graph_class(), 2);
        assert_eq!(extract_ego_network(&p, 0, 1, 3, 10).unwrap(), None);
        assert!(extract_ego_network(&p, 9, 1, 1, 10).is_err());
    }

    #[test]
    fn dense_examples() {
        let single = LabeledGraph::new(1, [], vec![2], 0).unwrap();
        let d = to_dense(&single, 2, 3).unwrap();
        assert_eq!(d.adj, vec![0.0; 4]);
        assert_eq!(d.labels, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.mask, vec![true, false]);
        let k3 = LabeledGraph::new(3, [(0, 1), (1, 2), (0, 2)], vec![0; 3], 0).unwrap();
        let d = to_dense(&k3, 3, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.adj_at(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        assert_eq!(
            to_dense(&path(4), 3, 1),
            Err(GraphError::TooLarge { n: 4, n_max: 3 })
        );
    }

    #[test]
    fn prune_examples() {
        let k3 = LabeledGraph::new(3, [(0, 1), (1, 2), (0, 2)], vec![0, 1, 0], 0).unwrap();
        let pruned = prune_isolated(&to_dense(&k3, 5, 2).unwrap());
        assert_eq!(pruned, k3);

        let empty = to_dense(
            &LabeledGraph::new(4, [], vec![1, 0, 0, 0], 0).unwrap(),
            4,
            2,
        )
        .unwrap();
        let p = prune_isolated(&empty);
        assert_eq!(p.n(), 1);
        assert_eq!(p.node_labels(), &[1]);

        let g = LabeledGraph::new(4, [(1, 3)], vec![0, 1, 0, 2], 0).unwrap();
        let p = prune_isolated(&to_dense(&g, 4, 3).unwrap());
        assert_eq!(p.n(), 2);
        assert_eq!(p.edges(), &[(0, 1)]);
        assert_eq!(p.node_labels(), &[1, 2]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
