use rand::Rng;

use super::ModelError;
use crate::autodiff::{Tape, Tensor, Var};

/// Ordered, named weight tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.push((name.into(), value));
    }

    /// Glorot-uniform `rows × cols` matrix.
    pub fn push_glorot<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        self.push(
            name,
            Tensor::matrix(rows, cols, data).expect("length matches"),
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_finite())
    }

    /// Records every tensor on `tape`, as leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.entries
            .iter()
            .map(|(_, t)| {
                if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// Checks that `other` has the same names and shapes, in order.
    pub fn check_layout(&self, other: &ParamSet) -> Result<(), ModelError> {
        for (i, (name, t)) in self.entries.iter().enumerate() {
            match other.entries.get(i) {
                Some((n, o)) if n == name && o.shape() == t.shape() => {}
                found => {
                    return Err(ModelError::Param {
                        name: name.clone(),
                        expected: t.shape().to_vec(),
                        found: found.map(|(_, o)| o.shape().to_vec()),
                    })
                }
            }
        }
        if other.entries.len() != self.entries.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameter tensors, found {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        Ok(())
    }
}

/// Name, rows and columns of one parameter tensor. Names ending in `.b` are
/// biases and start at zero; the rest are Glorot-initialized.
pub type ParamShape = (String, usize, usize);

pub(super) fn materialize<R: Rng + ?Sized>(shapes: Vec<ParamShape>, rng: &mut R) -> ParamSet {
    let mut params = ParamSet::new();
    for (name, rows, cols) in shapes {
        if name.ends_with(".b") {
            params.push(name, Tensor::zeros(&[rows, cols]));
        } else {
            params.push_glorot(name, rows, cols, rng);
        }
    }
    params
}

pub(super) fn overflow() -> ModelError {
    ModelError::Config("parameter shapes overflow".into())
}
