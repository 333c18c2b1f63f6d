//! Brute-force orbit counts and the naive MMD double loop.

use lggan::stats::{histogram_distance, StatHistogram, NUM_ORBITS};
use lggan::LabeledGraph;

/// Graphlet templates: size, edges and the orbit of each position.
const TEMPLATES: &[(usize, &[(usize, usize)], &[usize])] = &[
    (2, &[(0, 1)], &[0, 0]),
    (3, &[(0, 1), (1, 2)], &[1, 2, 1]),
    (3, &[(0, 1), (1, 2), (0, 2)], &[3, 3, 3]),
    (4, &[(0, 1), (1, 2), (2, 3)], &[4, 5, 5, 4]),
    (4, &[(0, 1), (0, 2), (0, 3)], &[7, 6, 6, 6]),
    (4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[8, 8, 8, 8]),
    (4, &[(0, 1), (1, 2), (2, 0), (2, 3)], &[10, 10, 11, 9]),
    (
        4,
        &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)],
        &[13, 12, 13, 12],
    ),
    (
        4,
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        &[14, 14, 14, 14],
    ),
];

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
        .collect()
}

/// Matches every induced subgraph on 2–4 nodes against the templates by
/// trying all vertex bijections.
pub fn brute_force_orbits(g: &LabeledGraph) -> Vec<[u64; NUM_ORBITS]> {
    let mut counts = vec![[0u64; NUM_ORBITS]; g.n()];
    for k in 2..=4 {
        let perms = permutations(k);
        for nodes in subsets(g.n(), k) {
            'templates: for &(size, edges, orbits) in TEMPLATES.iter().filter(|t| t.0 == k) {
                for p in &perms {
                    let adjacent =
                        |i: usize, j: usize| edges.contains(&(i, j)) || edges.contains(&(j, i));
                    let iso = (0..size).all(|i| {
                        (0..size).all(|j| {
                            i == j || adjacent(i, j) == g.has_edge(nodes[p[i]], nodes[p[j]])
                        })
                    });
                    if iso {
                        for i in 0..size {
                            counts[nodes[p[i]]][orbits[i]] += 1;
                        }
                        break 'templates;
                    }
                }
            }
        }
    }
    counts
}

/// MMD by an explicit double loop over all pairs.
pub fn naive_mmd(a: &[StatHistogram], b: &[StatHistogram], sigma: f64) -> f64 {
    let k = |x: &StatHistogram, y: &StatHistogram| {
        let d = histogram_distance(x, y).unwrap();
        (-d * d / (2.0 * sigma * sigma)).exp()
    };
    let mean = |xs: &[StatHistogram], ys: &[StatHistogram]| {
        let mut s = 0.0;
        for x in xs {
            for y in ys {
                s += k(x, y);
            }
        }
        s / (xs.len() * ys.len()) as f64
    };
    (mean(a, a) + mean(b, b) - 2.0 * mean(a, b)).max(0.0).sqrt()
}
