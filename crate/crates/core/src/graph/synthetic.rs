//! Synthetic labeled-graph datasets with planted structure.

use std::ops::RangeInclusive;

use rand::Rng;

use super::{GraphDataset, LabeledGraph};
use crate::rng;

/// Edge probability inside a community.
pub const P_IN: f64 = 0.7;
/// Edge probability between the two communities of class 1.
pub const P_OUT: f64 = 0.05;

/// Two-class dataset. Even-indexed graphs (class 0) are Erdős–Rényi with
/// `P_IN`, every node labeled 0. Odd-indexed graphs (class 1) split their
/// nodes into two halves joined with `P_IN` inside and `P_OUT` across; the
/// second half carries label 1. Sizes are uniform over `sizes`.
pub fn planted_partition(count: usize, sizes: RangeInclusive<usize>, seed: u64) -> GraphDataset {
    let mut r = rng::stream(seed, "planted-partition");
    let mut data = GraphDataset::new("planted", 2, 2);
    for i in 0..count {
        let n = r.random_range(sizes.clone());
        let class = i % 2;
        let half = n / 2;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if class == 0 || (u < half) == (v < half) {
                    P_IN
                } else {
                    P_OUT
                };
                if r.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let labels = (0..n)
            .map(|u| usize::from(class == 1 && u >= half))
            .collect();
        data.graphs
            .push(LabeledGraph::new(n, edges, labels, class).expect("planted graphs are simple"));
    }
    data
}
