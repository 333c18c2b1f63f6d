//! Exact and grid solutions of the SVM dual on small problems.

use lggan::kernels::KernelMatrix;
use lggan::rng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn dual_objective(k: &KernelMatrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k.get(i, j);
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|c| a[i][c] * x[c]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Exact dual optimum by enumerating which variables sit at 0, at C or
/// strictly between, solving the stationarity system for the free ones.
pub fn active_set_optimum(k: &KernelMatrix, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { c } else { 0.0 })
            .collect();
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[r][s] = q(i, j);
            }
            a[r][m] = y[i];
            b[r] = 1.0
                - (0..n)
                    .filter(|&j| state[j] == 1)
                    .map(|j| q(i, j) * c)
                    .sum::<f64>();
            a[m][r] = y[i];
        }
        b[m] = -(0..n)
            .filter(|&j| state[j] == 1)
            .map(|j| y[j] * c)
            .sum::<f64>();
        if m == 0 {
            if b[m].abs() > 1e-12 {
                continue;
            }
        } else {
            let Some(x) = solve(a, b) else { continue };
            if free
                .iter()
                .zip(&x)
                .any(|(_, &v)| !(-1e-12..=c + 1e-12).contains(&v))
            {
                continue;
            }
            for (&i, &v) in free.iter().zip(&x) {
                alpha[i] = v;
            }
        }
        best = best.min(dual_objective(k, y, &alpha));
    }
    best
}

/// Minimum of the dual over a grid of step `c / steps` on the feasible set.
pub fn grid_optimum(k: &KernelMatrix, y: &[f64], c: f64, steps: usize) -> f64 {
    let n = y.len();
    let mut best = f64::INFINITY;
    let mut alpha = vec![0.0; n];
    // the last variable is determined by the equality constraint
    let total = (steps + 1).pow((n - 1) as u32);
    for code in 0..total {
        let mut s = 0.0;
        for (i, a) in alpha.iter_mut().enumerate().take(n - 1) {
            *a = (code / (steps + 1).pow(i as u32) % (steps + 1)) as f64 * c / steps as f64;
            s += y[i] * *a;
        }
        let last = -s * y[n - 1];
        if !(-1e-12..=c + 1e-12).contains(&last) {
            continue;
        }
        alpha[n - 1] = last;
        best = best.min(dual_objective(k, y, &alpha));
    }
    best
}

pub fn rbf_problem(seed: u64) -> (KernelMatrix, Vec<f64>) {
    let mut r = rng::stream(seed, "svm-toy");
    let pts: Vec<[f64; 2]> = (0..6)
        .map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
        .collect();
    let mut y: Vec<f64> = (0..6).map(|i| if i < 3 { 1.0 } else { -1.0 }).collect();
    y.shuffle(&mut r);
    let mut v = vec![0.0; 36];
    for i in 0..6 {
        for j in 0..6 {
            let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
            v[i * 6 + j] = (-d2).exp();
        }
    }
    (KernelMatrix::from_values(6, v).unwrap(), y)
}
