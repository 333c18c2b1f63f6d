//! MLP generator: latent vector (plus class one-hot for conditional variants)
//! to a continuous adjacency matrix and label matrix.

use std::sync::Arc;

use rand::Rng;

use super::params::{materialize, overflow, ParamShape};
use super::{ModelError, ParamSet};
use crate::autodiff::{IndexMap, Tape, Tensor, Var};
use crate::graph::{argmax, prune_isolated, DenseGraph, LabeledGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    /// Width of the class one-hot appended to the latent vector; 0 for the
    /// unconditional generator.
    pub condition_dim: usize,
    pub hidden: Vec<usize>,
    pub n_max: usize,
    pub num_labels: usize,
}

impl GeneratorConfig {
    pub fn input_dim(&self) -> usize {
        self.latent_dim + self.condition_dim
    }

    pub fn num_pairs(&self) -> usize {
        self.n_max * (self.n_max - 1) / 2
    }

    /// Parameter layout in creation order, without allocating it.
    pub fn param_shapes(&self) -> Result<Vec<ParamShape>, ModelError> {
        let mut out = Vec::new();
        let mut width = self
            .latent_dim
            .checked_add(self.condition_dim)
            .ok_or_else(overflow)?;
        for (i, &h) in self.hidden.iter().enumerate() {
            out.push((format!("gen.hidden{i}.w"), width, h));
            out.push((format!("gen.hidden{i}.b"), 1, h));
            width = h;
        }
        let pairs = self
            .n_max
            .checked_mul(self.n_max.saturating_sub(1))
            .ok_or_else(overflow)?
            / 2;
        let label_cols = self
            .n_max
            .checked_mul(self.num_labels)
            .ok_or_else(overflow)?;
        out.push(("gen.adj.w".into(), width, pairs));
        out.push(("gen.adj.b".into(), 1, pairs));
        out.push(("gen.labels.w".into(), width, label_cols));
        out.push(("gen.labels.b".into(), 1, label_cols));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub params: ParamSet,
    mirror: Arc<IndexMap>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self, ModelError> {
        if config.n_max < 2 || config.num_labels == 0 || config.latent_dim == 0 {
            return Err(ModelError::Config(
                "generator needs n_max >= 2, at least one label and a latent dimension".into(),
            ));
        }
        let params = materialize(config.param_shapes()?, rng);
        Ok(Self::from_params(config, params))
    }

    pub fn from_params(config: GeneratorConfig, params: ParamSet) -> Self {
        let mirror = Arc::new(mirror_map(config.n_max));
        Self {
            config,
            params,
            mirror,
        }
    }

    /// Runs the MLP on `z` (`1 × latent_dim`). Returns `(A, L)` with `A`
    /// symmetric, zero-diagonal and in (0, 1), and each row of `L` a softmax.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        z: Var,
        class: Option<Var>,
    ) -> Result<(Var, Var), ModelError> {
        let input = match (class, self.config.condition_dim) {
            (None, 0) => z,
            (Some(c), d) if d > 0 => tape.concat_cols(&[z, c])?,
            (None, _) => {
                return Err(ModelError::Config(
                    "conditional generator needs a class".into(),
                ))
            }
            (Some(_), _) => {
                return Err(ModelError::Config(
                    "unconditional generator takes no class".into(),
                ))
            }
        };
        let mut h = input;
        let layers = self.config.hidden.len();
        for i in 0..layers {
            let pre = tape.linear(h, vars[2 * i], vars[2 * i + 1])?;
            h = tape.tanh(pre)?;
        }
        let adj_logits = tape.linear(h, vars[2 * layers], vars[2 * layers + 1])?;
        let edge_probs = tape.sigmoid(adj_logits)?;
        let adj = tape.gather(edge_probs, self.mirror.clone())?;
        let label_logits = tape.linear(h, vars[2 * layers + 2], vars[2 * layers + 3])?;
        let label_logits =
            tape.reshape(label_logits, &[self.config.n_max, self.config.num_labels])?;
        let labels = tape.softmax_rows(label_logits)?;
        Ok((adj, labels))
    }

    /// Forward pass on plain values, without gradients.
    pub fn sample(&self, z: &[f64], class: Option<usize>) -> Result<(Tensor, Tensor), ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let z = tape.constant(Tensor::row(z.to_vec()));
        let class = class.map(|c| tape.constant(one_hot(c, self.config.condition_dim)));
        let (a, l) = self.forward(&mut tape, &vars, z, class)?;
        Ok((tape.value(a).clone(), tape.value(l).clone()))
    }
}

pub fn one_hot(index: usize, width: usize) -> Tensor {
    let mut v = vec![0.0; width];
    if index < width {
        v[index] = 1.0;
    }
    Tensor::row(v)
}

/// Gathers an upper-triangle vector (row-major over `i < j`) into a symmetric
/// `n × n` matrix with zero diagonal.
fn mirror_map(n: usize) -> IndexMap {
    let mut pair = vec![vec![0; n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            pair[i][j] = k;
            pair[j][i] = k;
            k += 1;
        }
    }
    let index = (0..n * n)
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            (i != j).then(|| pair[i][j])
        })
        .collect();
    IndexMap {
        src_shape: vec![1, k],
        out_shape: vec![n, n],
        index,
    }
}

/// Thresholds the continuous generator output into a labeled graph: an edge
/// wherever `A[i][j] > threshold`, each label the row argmax, then isolated
/// nodes are dropped.
pub fn discretize(
    adj: &Tensor,
    labels: &Tensor,
    threshold: f64,
    graph_class: usize,
) -> LabeledGraph {
    let n = adj.rows();
    let c = labels.cols();
    let mut dense_adj = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if adj.at(i, j) > threshold {
                dense_adj[i * n + j] = 1.0;
                dense_adj[j * n + i] = 1.0;
            }
        }
    }
    let mut dense_labels = vec![0.0; n * c];
    for i in 0..n {
        let row = &labels.data()[i * c..(i + 1) * c];
        dense_labels[i * c + argmax(row)] = 1.0;
    }
    prune_isolated(&DenseGraph {
        n_max: n,
        num_labels: c,
        adj: dense_adj,
        labels: dense_labels,
        mask: vec![true; n],
        graph_class,
    })
}
