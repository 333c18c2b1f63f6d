//! Supervised training of the GCN discriminator as a plain graph classifier,
//! used to study how depth and residual connections affect trainability.

use rand::seq::SliceRandom;

use super::losses::{cross_entropy, mean_of};
use super::{Adam, TrainError};
use crate::autodiff::{Tape, Tensor};
use crate::graph::{argmax, to_dense, GraphDataset};
use crate::model::{Aggregation, Discriminator, DiscriminatorConfig, InputFeatures};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub layers: usize,
    pub hidden: usize,
    pub residual: bool,
    pub aggregation: Aggregation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

fn dense_inputs(data: &GraphDataset, n_max: usize) -> Result<Vec<(Tensor, Tensor)>, TrainError> {
    data.graphs
        .iter()
        .map(|g| {
            let d = to_dense(g, n_max, data.num_node_labels)?;
            Ok((
                Tensor::matrix(n_max, n_max, d.adj)?,
                Tensor::matrix(n_max, data.num_node_labels, d.labels)?,
            ))
        })
        .collect()
}

/// Trains a fresh classifier with cross-entropy and Adam. Returns the model
/// and the training accuracy after each epoch.
pub fn fit_classifier(
    config: &ClassifierConfig,
    data: &GraphDataset,
) -> Result<(Discriminator, Vec<f64>), TrainError> {
    if data.is_empty() || config.batch_size == 0 || config.epochs == 0 {
        return Err(TrainError::Config(
            "classifier needs data, epochs and a positive batch size".into(),
        ));
    }
    let n_max = data.max_nodes().max(1);
    let disc_cfg = DiscriminatorConfig {
        n_max,
        num_labels: data.num_node_labels,
        num_classes: data.num_graph_classes,
        layers: config.layers,
        hidden: config.hidden,
        aggregation: config.aggregation,
        residual: config.residual,
        input: InputFeatures::Labels,
        conditional: false,
    };
    let mut disc = Discriminator::new(disc_cfg, &mut rng::stream(config.seed, "classifier-init"))?;
    let mut adam = Adam::new(&disc.params, config.lr, 0.9, 0.999);
    let inputs = dense_inputs(data, n_max)?;
    let classes: Vec<usize> = data.graphs.iter().map(|g| g.graph_class()).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut shuffle = rng::stream(config.seed, "classifier-order");
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let vars = disc.params.bind(&mut tape, true);
            let mut terms = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let a = tape.constant(inputs[i].0.clone());
                let l = tape.constant(inputs[i].1.clone());
                let out = disc.forward(&mut tape, &vars, a, l, None)?;
                terms.push(cross_entropy(&mut tape, out.class_logits, classes[i])?);
            }
            let loss = mean_of(&mut tape, &terms)?;
            let grads = tape.grad(loss, &vars)?;
            let grads: Vec<Tensor> = grads.into_iter().map(|g| tape.value(g).clone()).collect();
            adam.step(&mut disc.params, &grads);
        }
        history.push(accuracy(&disc, data)?);
    }
    Ok((disc, history))
}

/// Fraction of graphs whose argmax class logit equals the graph class.
pub fn accuracy(disc: &Discriminator, data: &GraphDataset) -> Result<f64, TrainError> {
    let inputs = dense_inputs(data, disc.config.n_max)?;
    let mut correct = 0;
    for ((a, l), g) in inputs.iter().zip(&data.graphs) {
        let (_, logits) = disc.score(a, l, None)?;
        if argmax(&logits) == g.graph_class() {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}
