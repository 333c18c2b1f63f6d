//! Kernel SVM solved in the dual with pairwise (SMO-style) updates on the
//! maximal violating pair.

use super::{KernelError, KernelMatrix};

/// Stopping tolerance on the KKT violation `max_up - min_low`.
pub const KKT_TOL: f64 = 1e-4;

const TAU: f64 = 1e-12;

/// Two-class dual solution for labels `y ∈ {-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    /// Decision offset: `f(x) = Σ α_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub c: f64,
}

impl BinarySvm {
    /// Minimizes `½ αᵀQα - 1ᵀα` with `Q_ij = y_i y_j K_ij`, `0 ≤ α ≤ c`,
    /// `yᵀα = 0`.
    pub fn train(k: &KernelMatrix, y: &[f64], c: f64) -> Result<Self, KernelError> {
        let n = k.n();
        if y.len() != n || n == 0 {
            return Err(KernelError::Invalid(format!(
                "{} labels for {} points",
                y.len(),
                n
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(KernelError::Invalid(format!("C must be positive, got {c}")));
        }
        if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
            return Err(KernelError::SingleClass);
        }
        let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let max_iter = 1000 * n.max(10) * n.max(10);
        for _ in 0..max_iter {
            let Some((i, j, gap)) = select_pair(&alpha, &grad, y, c) else {
                break;
            };
            if gap < KKT_TOL {
                break;
            }
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let qii = q(i, i);
            let qjj = q(j, j);
            let qij = q(i, j);
            if y[i] != y[j] {
                let quad = (qii + qjj + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qii + qjj - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for (t, g) in grad.iter_mut().enumerate() {
                *g += q(t, i) * di + q(t, j) * dj;
            }
        }
        let rho = offset(&alpha, &grad, y, c);
        Ok(Self {
            alpha,
            y: y.to_vec(),
            rho,
            c,
        })
    }

    /// `½ αᵀQα - 1ᵀα`.
    pub fn dual_objective(k: &KernelMatrix, y: &[f64], alpha: &[f64]) -> f64 {
        let n = alpha.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += alpha[i] * alpha[j] * y[i] * y[j] * k.get(i, j);
            }
        }
        0.5 * quad - alpha.iter().sum::<f64>()
    }

    /// Decision value for a point given its kernel row against the training set.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(&self.y)
            .zip(row)
            .map(|((a, y), k)| a * y * k)
            .sum::<f64>()
            - self.rho
    }
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair `(i, j)` and its violation.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up: Option<(usize, f64)> = None;
    let mut low: Option<(usize, f64)> = None;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && up.is_none_or(|(_, b)| v > b) {
            up = Some((t, v));
        }
        if in_low(alpha[t], y[t], c) && low.is_none_or(|(_, b)| v < b) {
            low = Some((t, v));
        }
    }
    let ((i, m), (j, mm)) = (up?, low?);
    Some((i, j, m - mm))
}

fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            count += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    if count > 0 {
        sum / count as f64
    } else {
        let (lo, hi) = (lb.max(f64::MIN), ub.min(f64::MAX));
        0.5 * (lo + hi)
    }
}

/// One-vs-rest multiclass SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Classes present in training, ascending.
    pub classes: Vec<usize>,
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn decision_values(&self, row: &[f64]) -> Vec<f64> {
        self.machines.iter().map(|m| m.decision(row)).collect()
    }

    /// Class with the largest decision value (lowest class on ties).
    pub fn predict(&self, row: &[f64]) -> usize {
        let values = self.decision_values(row);
        self.classes[crate::graph::argmax(&values)]
    }
}

pub fn svm_train(k: &KernelMatrix, classes: &[usize], c: f64) -> Result<SvmModel, KernelError> {
    let mut present: Vec<usize> = classes.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(KernelError::SingleClass);
    }
    let machines = present
        .iter()
        .map(|&target| {
            let y: Vec<f64> = classes
                .iter()
                .map(|&cl| if cl == target { 1.0 } else { -1.0 })
                .collect();
            BinarySvm::train(k, &y, c)
        })
        .collect::<Result<_, _>>()?;
    Ok(SvmModel {
        classes: present,
        machines,
    })
}
