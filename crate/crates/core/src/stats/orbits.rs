//! Per-node graphlet orbit counts for connected graphlets on 2–4 nodes.
//!
//! Orbit numbering:
//!
//! | orbit | graphlet | position |
//! |-------|----------|----------|
//! | 0 | edge | either end |
//! | 1, 2 | path on 3 | end, middle |
//! | 3 | triangle | any |
//! | 4, 5 | path on 4 | end, inner |
//! | 6, 7 | star on 4 | leaf, center |
//! | 8 | 4-cycle | any |
//! | 9, 10, 11 | paw | pendant, degree 2, degree 3 |
//! | 12, 13 | diamond | degree 2, degree 3 |
//! | 14 | K4 | any |

use crate::LabeledGraph;

pub const NUM_ORBITS: usize = 15;

/// Largest graph accepted by [`node_orbit_counts`].
pub const MAX_ORBIT_NODES: usize = 400;

/// Orbit of each member of a connected induced subgraph, given the members'
/// degrees inside it and its edge count.
fn classify(degrees: &[usize], edges: usize) -> [usize; 4] {
    let mut out = [0; 4];
    for (slot, &d) in out.iter_mut().zip(degrees) {
        *slot = match (degrees.len(), edges, d) {
            (2, _, _) => 0,
            (3, 2, 1) => 1,
            (3, 2, _) => 2,
            (3, _, _) => 3,
            (4, 3, _) if degrees.contains(&3) => {
                if d == 3 {
                    7
                } else {
                    6
                }
            }
            (4, 3, 1) => 4,
            (4, 3, _) => 5,
            (4, 4, _) if degrees.contains(&3) => match d {
                1 => 9,
                2 => 10,
                _ => 11,
            },
            (4, 4, _) => 8,
            (4, 5, 2) => 12,
            (4, 5, _) => 13,
            _ => 14,
        };
    }
    out
}

fn record(graph: &LabeledGraph, members: &[usize], counts: &mut [[u64; NUM_ORBITS]]) {
    let mut degrees = [0usize; 4];
    let mut edges = 0;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if graph.has_edge(members[i], members[j]) {
                degrees[i] += 1;
                degrees[j] += 1;
                edges += 1;
            }
        }
    }
    let orbits = classify(&degrees[..members.len()], edges);
    for (&v, &o) in members.iter().zip(&orbits) {
        counts[v][o] += 1;
    }
}

/// Enumerates every connected induced subgraph on 2–4 nodes exactly once
/// (ESU), keyed by its smallest vertex `root`.
fn extend(
    graph: &LabeledGraph,
    root: usize,
    members: &mut Vec<usize>,
    extension: Vec<usize>,
    counts: &mut [[u64; NUM_ORBITS]],
) {
    if members.len() >= 2 {
        record(graph, members, counts);
    }
    if members.len() == 4 {
        return;
    }
    let mut extension = extension;
    while let Some(w) = extension.pop() {
        let mut next = extension.clone();
        for &u in graph.neighbors(w) {
            let exclusive = u > root
                && !members.contains(&u)
                && u != w
                && !next.contains(&u)
                && members.iter().all(|&m| !graph.has_edge(m, u));
            if exclusive {
                next.push(u);
            }
        }
        members.push(w);
        extend(graph, root, members, next, counts);
        members.pop();
    }
}

/// Orbit counts for every node, or `None` when the graph exceeds
/// [`MAX_ORBIT_NODES`].
pub fn node_orbit_counts(graph: &LabeledGraph) -> Option<Vec<[u64; NUM_ORBITS]>> {
    if graph.n() > MAX_ORBIT_NODES {
        return None;
    }
    let mut counts = vec![[0u64; NUM_ORBITS]; graph.n()];
    for v in 0..graph.n() {
        let extension = graph
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| u > v)
            .collect();
        extend(graph, v, &mut vec![v], extension, &mut counts);
    }
    Some(counts)
}
