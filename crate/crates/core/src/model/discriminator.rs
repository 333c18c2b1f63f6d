//! Residual GCN discriminator.
//!
//! Each layer computes `relu(D̃^{-1/2} Ã D̃^{-1/2} H W)` with `Ã = A + I`. With
//! residual connections a layer's input is added back whenever widths match.
//! The per-layer outputs are aggregated (elementwise max or concatenation),
//! the label matrix is appended, rows are summed into a graph vector, and two
//! linear heads produce the realness score and the class logits.

use rand::Rng;

use super::params::{materialize, overflow, ParamShape};
use super::{ModelError, ParamSet};
use crate::autodiff::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    MaxPool,
    Concat,
}

/// Node features fed to the first GCN layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFeatures {
    /// A presence indicator, the degree divided by `N`, and the label row
    /// zeroed on nodes without edges. Permutation invariant.
    Labels,
    /// `H(0) = I_N`: node identities. Depends on node order.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    pub n_max: usize,
    pub num_labels: usize,
    pub num_classes: usize,
    pub layers: usize,
    pub hidden: usize,
    pub aggregation: Aggregation,
    pub residual: bool,
    pub input: InputFeatures,
    /// Append the class one-hot to every node's input features (conditional GAN).
    pub conditional: bool,
}

impl DiscriminatorConfig {
    pub fn input_dim(&self) -> usize {
        let base = match self.input {
            InputFeatures::Labels => 2 + self.num_labels,
            InputFeatures::Identity => self.n_max,
        };
        base + if self.conditional {
            self.num_classes
        } else {
            0
        }
    }

    /// Parameter layout in creation order, without allocating it.
    pub fn param_shapes(&self) -> Result<Vec<ParamShape>, ModelError> {
        let base = match self.input {
            InputFeatures::Labels => self.num_labels.checked_add(2),
            InputFeatures::Identity => Some(self.n_max),
        };
        let cond = if self.conditional {
            self.num_classes
        } else {
            0
        };
        let mut width = base
            .and_then(|b| b.checked_add(cond))
            .ok_or_else(overflow)?;
        let mut out = Vec::new();
        for l in 0..self.layers {
            out.push((format!("disc.gcn{l}.w"), width, self.hidden));
            width = self.hidden;
        }
        let agg = match self.aggregation {
            Aggregation::MaxPool => Some(self.hidden),
            Aggregation::Concat => self.hidden.checked_mul(self.layers),
        };
        let d = agg
            .and_then(|a| a.checked_add(self.num_labels))
            .ok_or_else(overflow)?;
        out.push(("disc.real.w".into(), d, 1));
        out.push(("disc.real.b".into(), 1, 1));
        out.push(("disc.class.w".into(), d, self.num_classes));
        out.push(("disc.class.b".into(), 1, self.num_classes));
        Ok(out)
    }

    /// Width of the graph vector that the heads read.
    pub fn feature_dim(&self) -> usize {
        let agg = match self.aggregation {
            Aggregation::MaxPool => self.hidden,
            Aggregation::Concat => self.hidden * self.layers,
        };
        agg + self.num_labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub params: ParamSet,
}

/// Tape handles for one discriminator evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DiscriminatorOutput {
    /// Unbounded critic score, shape `[]`.
    pub realness: Var,
    /// `1 × num_classes`.
    pub class_logits: Var,
    /// Summed graph representation, `1 × feature_dim`.
    pub features: Var,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        config: DiscriminatorConfig,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        if config.layers == 0 || config.hidden == 0 {
            return Err(ModelError::Config(
                "discriminator needs at least one layer".into(),
            ));
        }
        if config.num_classes == 0 || config.num_labels == 0 {
            return Err(ModelError::Config(
                "discriminator needs labels and classes".into(),
            ));
        }
        let params = materialize(config.param_shapes()?, rng);
        Ok(Self { config, params })
    }

    /// Evaluates the discriminator on one dense graph (`adj`: `N × N`,
    /// `labels`: `N × C`). `class` (`1 × classes`) is required iff the
    /// configuration is conditional.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        adj: Var,
        labels: Var,
        class: Option<Var>,
    ) -> Result<DiscriminatorOutput, ModelError> {
        let cfg = &self.config;
        let n = tape.value(adj).rows();
        if cfg.conditional != class.is_some() {
            return Err(ModelError::Config(
                "class input must match the conditional flag".into(),
            ));
        }
        // presence = min(1, degree): padding and dropped nodes have no edges
        let ones_col = tape.constant(Tensor::ones(&[n, 1]));
        let degree = tape.matmul(adj, ones_col)?;
        let neg = tape.scale(degree, -1.0)?;
        let deficit = tape.add_scalar(neg, 1.0)?;
        let deficit = tape.relu(deficit)?;
        let neg = tape.scale(deficit, -1.0)?;
        let presence = tape.add_scalar(neg, 1.0)?;
        let ones_labels = tape.constant(Tensor::ones(&[1, cfg.num_labels]));
        let label_gate = tape.matmul(presence, ones_labels)?;
        let gated_labels = tape.mul(labels, label_gate)?;

        let mut h0_parts = match cfg.input {
            InputFeatures::Labels => {
                let scaled_degree = tape.scale(degree, 1.0 / n as f64)?;
                vec![presence, scaled_degree, gated_labels]
            }
            InputFeatures::Identity => vec![tape.constant(Tensor::identity(n))],
        };
        if let Some(c) = class {
            h0_parts.push(tape.matmul(presence, c)?);
        }
        let mut h = tape.concat_cols(&h0_parts)?;

        let norm_adj = normalized_adjacency(tape, adj)?;
        let mut outputs = Vec::with_capacity(cfg.layers);
        for &w in &vars[..cfg.layers] {
            let out = propagate(tape, norm_adj, h, w)?;
            h = if cfg.residual && tape.value(out).shape() == tape.value(h).shape() {
                tape.add(out, h)?
            } else {
                out
            };
            outputs.push(h);
        }
        let aggregated = match cfg.aggregation {
            Aggregation::MaxPool => {
                let mut acc = outputs[0];
                for &o in &outputs[1..] {
                    acc = tape.maximum(acc, o)?;
                }
                acc
            }
            Aggregation::Concat => tape.concat_cols(&outputs)?,
        };
        let z = tape.concat_cols(&[aggregated, gated_labels])?;
        let ones_row = tape.constant(Tensor::ones(&[1, n]));
        let features = tape.matmul(ones_row, z)?;

        let heads = &vars[cfg.layers..];
        let real = tape.linear(features, heads[0], heads[1])?;
        let realness = tape.reshape(real, &[])?;
        let class_logits = tape.linear(features, heads[2], heads[3])?;
        Ok(DiscriminatorOutput {
            realness,
            class_logits,
            features,
        })
    }

    /// Realness and class logits on plain values.
    pub fn score(
        &self,
        adj: &Tensor,
        labels: &Tensor,
        class: Option<usize>,
    ) -> Result<(f64, Vec<f64>), ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let a = tape.constant(adj.clone());
        let l = tape.constant(labels.clone());
        let c = class.map(|c| tape.constant(super::generator::one_hot(c, self.config.num_classes)));
        let out = self.forward(&mut tape, &vars, a, l, c)?;
        Ok((
            tape.value(out.realness).item(),
            tape.value(out.class_logits).data().to_vec(),
        ))
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the row sums of `A + I`.
pub fn normalized_adjacency(tape: &mut Tape, adj: Var) -> Result<Var, ModelError> {
    let n = tape.value(adj).rows();
    let eye = tape.constant(Tensor::identity(n));
    let with_loops = tape.add(adj, eye)?;
    let ones = tape.constant(Tensor::ones(&[n, 1]));
    let degree = tape.matmul(with_loops, ones)?;
    let inv_sqrt = tape.powf(degree, -0.5)?;
    let inv_sqrt_t = tape.transpose(inv_sqrt)?;
    let outer = tape.matmul(inv_sqrt, inv_sqrt_t)?;
    Ok(tape.mul(with_loops, outer)?)
}

fn propagate(tape: &mut Tape, norm_adj: Var, h: Var, w: Var) -> Result<Var, ModelError> {
    let hw = tape.matmul(h, w)?;
    let mixed = tape.matmul(norm_adj, hw)?;
    Ok(tape.relu(mixed)?)
}

/// One graph convolution `relu(D̃^{-1/2} Ã D̃^{-1/2} H W)`.
pub fn gcn_layer(tape: &mut Tape, h: Var, adj: Var, w: Var) -> Result<Var, ModelError> {
    let norm_adj = normalized_adjacency(tape, adj)?;
    propagate(tape, norm_adj, h, w)
}
