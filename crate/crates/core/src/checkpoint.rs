//! Named-tensor text format for trained models and fitted baselines.
//!
//! ```text
//! format lggan-checkpoint 1
//! meta <key> <value>
//! tensors <count>
//! <name> <dim_0> <dim_1> ...
//! <value> <value> ...
//! ```
//!
//! Values are written in shortest round-trip decimal form, so reading a
//! written checkpoint reproduces every value bit for bit. A tensor with no
//! dims is a scalar; a tensor with no values has no values line.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::autodiff::Tensor;
use crate::baselines::{BaParams, ErParams, MmsbParams};
use crate::graph::write_atomic;
use crate::model::{Discriminator, Generator, ModelError, ParamSet};
use crate::training::{Adam, TrainConfig, TrainState};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckpointError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing metadata key `{0}`")]
    MissingMeta(String),
    #[error("invalid value `{value}` for metadata key `{key}`")]
    BadMeta { key: String, value: String },
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("checkpoint holds a `{found}` model, expected `{expected}`")]
    Kind { expected: String, found: String },
    #[error("checkpoint does not match the architecture: {0}")]
    Architecture(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

fn syntax(line: usize, message: impl Into<String>) -> CheckpointError {
    CheckpointError::Syntax {
        line,
        message: message.into(),
    }
}

impl Checkpoint {
    /// Sets a metadata entry, replacing an existing value for `key`.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn meta(&self, key: &str) -> Result<&str, CheckpointError> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CheckpointError::MissingMeta(key.to_string()))
    }

    pub fn meta_as<T: FromStr>(&self, key: &str) -> Result<T, CheckpointError> {
        let v = self.meta(key)?;
        v.parse().map_err(|_| CheckpointError::BadMeta {
            key: key.to_string(),
            value: v.to_string(),
        })
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format lggan-checkpoint {FORMAT_VERSION}");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        let _ = writeln!(out, "tensors {}", self.tensors.len());
        for (name, t) in &self.tensors {
            out.push_str(name);
            for d in t.shape() {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            if t.data().is_empty() {
                continue;
            }
            for (i, v) in t.data().iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut last = 0;
        let mut next = |what: &str| {
            let (n, l) = lines.next().ok_or_else(|| {
                syntax(
                    last + 1,
                    format!("unexpected end of input, expected {what}"),
                )
            })?;
            last = n;
            Ok::<_, CheckpointError>((n, l))
        };
        let (n, header) = next("header")?;
        if header != format!("format lggan-checkpoint {FORMAT_VERSION}") {
            return Err(syntax(
                n,
                format!("expected `format lggan-checkpoint {FORMAT_VERSION}`"),
            ));
        }
        let mut ck = Checkpoint::default();
        let count = loop {
            let (n, line) = next("`meta` or `tensors`")?;
            let mut fields = line.splitn(3, char::is_whitespace);
            match fields.next() {
                Some("meta") => {
                    let key = fields
                        .next()
                        .filter(|k| !k.is_empty())
                        .ok_or_else(|| syntax(n, "`meta` needs a key"))?;
                    let value = fields.next().unwrap_or("").trim();
                    ck.meta.push((key.to_string(), value.to_string()));
                }
                Some("tensors") => {
                    let count = fields.next().unwrap_or("");
                    if fields.next().is_some() {
                        return Err(syntax(n, "`tensors` takes one field"));
                    }
                    break count
                        .parse::<usize>()
                        .map_err(|_| syntax(n, format!("invalid tensor count `{count}`")))?;
                }
                other => return Err(syntax(n, format!("unexpected `{}`", other.unwrap_or("")))),
            }
        };
        for _ in 0..count {
            let (n, head) = next("tensor header")?;
            let mut fields = head.split_whitespace();
            let name = fields
                .next()
                .ok_or_else(|| syntax(n, "missing tensor name"))?
                .to_string();
            let mut shape = Vec::new();
            let mut len: usize = 1;
            for f in fields {
                let d: usize = f
                    .parse()
                    .map_err(|_| syntax(n, format!("invalid dimension `{f}`")))?;
                len = len
                    .checked_mul(d)
                    .ok_or_else(|| syntax(n, "tensor too large"))?;
                shape.push(d);
            }
            if len == 0 {
                let t = Tensor::new(shape, Vec::new()).map_err(|e| syntax(n, e.to_string()))?;
                ck.tensors.push((name, t));
                continue;
            }
            let (n, body) = next("tensor values")?;
            let mut data = Vec::with_capacity(len.min(1 << 20));
            for f in body.split_whitespace() {
                let v: f64 = f
                    .parse()
                    .map_err(|_| syntax(n, format!("invalid number `{f}`")))?;
                if !v.is_finite() {
                    return Err(syntax(n, format!("non-finite value `{f}`")));
                }
                data.push(v);
            }
            if data.len() != len {
                return Err(syntax(
                    n,
                    format!("tensor `{name}` needs {len} values, found {}", data.len()),
                ));
            }
            let t = Tensor::new(shape, data).map_err(|e| syntax(n, e.to_string()))?;
            ck.tensors.push((name, t));
        }
        if let Some((n, _)) = lines.next() {
            return Err(syntax(n, "trailing content after the last tensor"));
        }
        Ok(ck)
    }

    pub fn read(path: &Path) -> io::Result<Result<Self, CheckpointError>> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        let found = self.meta("kind")?;
        if found != kind {
            return Err(CheckpointError::Kind {
                expected: kind.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    /// Model kind recorded in the `kind` metadata entry.
    pub fn kind(&self) -> Result<&str, CheckpointError> {
        self.meta("kind")
    }
}

fn list<T: ToString>(items: &[T]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
    }
}

fn parse_list<T: FromStr>(ck: &Checkpoint, key: &str) -> Result<Vec<T>, CheckpointError> {
    let v = ck.meta(key)?;
    if v == "-" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|x| x.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CheckpointError::BadMeta {
            key: key.to_string(),
            value: v.to_string(),
        })
}

fn load_params(
    ck: &Checkpoint,
    layout: &ParamSet,
    prefix: &str,
) -> Result<ParamSet, CheckpointError> {
    let mut out = ParamSet::new();
    for (name, t) in layout.iter() {
        let stored = ck.tensor(&format!("{prefix}{name}"))?;
        if stored.shape() != t.shape() {
            return Err(CheckpointError::Architecture(format!(
                "tensor `{prefix}{name}` has shape {:?}, expected {:?}",
                stored.shape(),
                t.shape()
            )));
        }
        out.push(name, stored.clone());
    }
    Ok(out)
}

fn save_adam(ck: &mut Checkpoint, adam: &Adam, params: &ParamSet, prefix: &str) {
    ck.set(&format!("{prefix}.t"), adam.t);
    for ((name, _), (m, v)) in params.iter().zip(adam.m.iter().zip(&adam.v)) {
        ck.push(format!("{prefix}.m.{name}"), m.clone());
        ck.push(format!("{prefix}.v.{name}"), v.clone());
    }
}

fn load_adam(
    ck: &Checkpoint,
    params: &ParamSet,
    prefix: &str,
    lr: f64,
    b1: f64,
    b2: f64,
) -> Result<Adam, CheckpointError> {
    let mut adam = Adam::new(params, lr, b1, b2);
    adam.t = ck.meta_as(&format!("{prefix}.t"))?;
    let m = load_params(ck, params, &format!("{prefix}.m."))?;
    let v = load_params(ck, params, &format!("{prefix}.v."))?;
    adam.m = m.tensors().cloned().collect();
    adam.v = v.tensors().cloned().collect();
    Ok(adam)
}

/// Full training state: configuration, both networks and optimizer moments.
pub fn from_train_state(state: &TrainState) -> Checkpoint {
    let c = &state.config;
    let mut ck = Checkpoint::default();
    ck.set("kind", "lggan");
    ck.set("variant", c.variant);
    ck.set("objective", c.objective);
    ck.set("step", state.step);
    ck.set("num_labels", state.num_labels);
    ck.set("num_classes", state.num_classes);
    ck.set("n_max", c.n_max);
    ck.set("latent_dim", c.latent_dim);
    ck.set("gen_hidden", list(&c.gen_hidden));
    ck.set("disc_layers", c.disc_layers);
    ck.set("disc_hidden", c.disc_hidden);
    ck.set("aggregation", c.aggregation);
    ck.set("residual", c.residual);
    ck.set("batch_size", c.batch_size);
    ck.set("d_steps", c.d_steps);
    ck.set("lr_g", c.lr_g);
    ck.set("lr_d", c.lr_d);
    ck.set("beta1", c.beta1);
    ck.set("beta2", c.beta2);
    ck.set("lambda_gp", c.lambda_gp);
    ck.set("lambda_ct", c.lambda_ct);
    ck.set("ct_margin", c.ct_margin);
    ck.set("ct_noise", c.ct_noise);
    ck.set("lambda_fm", c.lambda_fm);
    ck.set("steps", c.steps);
    ck.set("seed", c.seed);
    ck.set("class_prior", c.class_prior);
    ck.push("class_weights", Tensor::row(state.class_weights.clone()));
    for (name, t) in state
        .generator
        .params
        .iter()
        .chain(state.discriminator.params.iter())
    {
        ck.push(name, t.clone());
    }
    save_adam(&mut ck, &state.adam_g, &state.generator.params, "adam_g");
    save_adam(
        &mut ck,
        &state.adam_d,
        &state.discriminator.params,
        "adam_d",
    );
    ck
}

pub fn to_train_state(ck: &Checkpoint) -> Result<TrainState, CheckpointError> {
    ck.expect_kind("lggan")?;
    let config = TrainConfig {
        variant: ck.meta_as("variant")?,
        objective: ck.meta_as("objective")?,
        batch_size: ck.meta_as("batch_size")?,
        d_steps: ck.meta_as("d_steps")?,
        lr_g: ck.meta_as("lr_g")?,
        lr_d: ck.meta_as("lr_d")?,
        beta1: ck.meta_as("beta1")?,
        beta2: ck.meta_as("beta2")?,
        lambda_gp: ck.meta_as("lambda_gp")?,
        lambda_ct: ck.meta_as("lambda_ct")?,
        ct_margin: ck.meta_as("ct_margin")?,
        ct_noise: ck.meta_as("ct_noise")?,
        lambda_fm: ck.meta_as("lambda_fm")?,
        steps: ck.meta_as("steps")?,
        seed: ck.meta_as("seed")?,
        latent_dim: ck.meta_as("latent_dim")?,
        n_max: ck.meta_as("n_max")?,
        gen_hidden: parse_list(ck, "gen_hidden")?,
        disc_layers: ck.meta_as("disc_layers")?,
        disc_hidden: ck.meta_as("disc_hidden")?,
        aggregation: ck.meta_as("aggregation")?,
        residual: ck.meta_as("residual")?,
        class_prior: ck.meta_as("class_prior")?,
    };
    config
        .validate()
        .map_err(|e| CheckpointError::Architecture(e.to_string()))?;
    let num_labels: usize = ck.meta_as("num_labels")?;
    let num_classes: usize = ck.meta_as("num_classes")?;
    let class_weights = ck.tensor("class_weights")?.data().to_vec();
    // every tensor the metadata implies must already be stored with its
    // shape, so nothing larger than the checkpoint itself is allocated
    if config.disc_layers.saturating_add(config.gen_hidden.len()) > ck.tensors.len() {
        return Err(CheckpointError::Architecture(
            "more layers than stored tensors".into(),
        ));
    }
    let gen_cfg = TrainState::generator_config(&config, num_labels, num_classes);
    let disc_cfg = TrainState::discriminator_config(&config, num_labels, num_classes);
    let arch = |e: ModelError| CheckpointError::Architecture(e.to_string());
    for (name, rows, cols) in gen_cfg
        .param_shapes()
        .map_err(arch)?
        .into_iter()
        .chain(disc_cfg.param_shapes().map_err(arch)?)
    {
        let stored = ck.tensor(&name)?;
        if stored.shape() != [rows, cols] {
            return Err(CheckpointError::Architecture(format!(
                "tensor `{name}` has shape {:?}, expected {:?}",
                stored.shape(),
                [rows, cols]
            )));
        }
    }
    // a freshly initialized state supplies the expected layout
    let mut state = TrainState::init(config, num_labels, num_classes, class_weights)
        .map_err(|e| CheckpointError::Architecture(e.to_string()))?;
    let gen_params = load_params(ck, &state.generator.params, "")?;
    let disc_params = load_params(ck, &state.discriminator.params, "")?;
    let c = &state.config;
    state.adam_g = load_adam(ck, &gen_params, "adam_g", c.lr_g, c.beta1, c.beta2)?;
    state.adam_d = load_adam(ck, &disc_params, "adam_d", c.lr_d, c.beta1, c.beta2)?;
    state.generator = Generator::from_params(state.generator.config.clone(), gen_params);
    state.discriminator = Discriminator {
        config: state.discriminator.config.clone(),
        params: disc_params,
    };
    state.step = ck.meta_as("step")?;
    Ok(state)
}

fn sizes_tensor(sizes: &[usize]) -> Tensor {
    Tensor::row(sizes.iter().map(|&n| n as f64).collect())
}

fn load_sizes(ck: &Checkpoint) -> Result<Vec<usize>, CheckpointError> {
    ck.tensor("sizes")?
        .data()
        .iter()
        .map(|&x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(CheckpointError::Architecture(format!(
                    "invalid graph size {x}"
                )))
            }
        })
        .collect()
}

fn label_space(ck: &mut Checkpoint, kind: &str, labels: usize, classes: usize) {
    ck.set("kind", kind);
    ck.set("num_labels", labels);
    ck.set("num_classes", classes);
}

pub fn from_er(p: &ErParams) -> Checkpoint {
    let mut ck = Checkpoint::default();
    label_space(&mut ck, "er", p.num_labels, p.num_classes);
    ck.push("p", Tensor::scalar(p.p));
    ck.push("sizes", sizes_tensor(&p.sizes));
    ck
}

pub fn to_er(ck: &Checkpoint) -> Result<ErParams, CheckpointError> {
    ck.expect_kind("er")?;
    Ok(ErParams {
        sizes: load_sizes(ck)?,
        p: ck.tensor("p")?.item(),
        num_labels: ck.meta_as("num_labels")?,
        num_classes: ck.meta_as("num_classes")?,
    })
}

pub fn from_ba(p: &BaParams) -> Checkpoint {
    let mut ck = Checkpoint::default();
    label_space(&mut ck, "ba", p.num_labels, p.num_classes);
    ck.set("m", p.m);
    ck.push("sizes", sizes_tensor(&p.sizes));
    ck
}

pub fn to_ba(ck: &Checkpoint) -> Result<BaParams, CheckpointError> {
    ck.expect_kind("ba")?;
    Ok(BaParams {
        sizes: load_sizes(ck)?,
        m: ck.meta_as("m")?,
        num_labels: ck.meta_as("num_labels")?,
        num_classes: ck.meta_as("num_classes")?,
    })
}

pub fn from_mmsb(p: &MmsbParams) -> Checkpoint {
    let mut ck = Checkpoint::default();
    label_space(&mut ck, "mmsb", p.num_labels, p.num_classes);
    ck.set("k", p.k);
    ck.push("alpha", Tensor::row(p.alpha.clone()));
    ck.push(
        "b",
        Tensor::new(vec![p.k, p.k], p.b.clone()).expect("k × k"),
    );
    ck.push(
        "label_dist",
        Tensor::new(vec![p.k, p.num_labels], p.label_dist.clone()).expect("k × labels"),
    );
    ck.push("sizes", sizes_tensor(&p.sizes));
    ck
}

pub fn to_mmsb(ck: &Checkpoint) -> Result<MmsbParams, CheckpointError> {
    ck.expect_kind("mmsb")?;
    let params = MmsbParams {
        k: ck.meta_as("k")?,
        alpha: ck.tensor("alpha")?.data().to_vec(),
        b: ck.tensor("b")?.data().to_vec(),
        label_dist: ck.tensor("label_dist")?.data().to_vec(),
        sizes: load_sizes(ck)?,
        num_labels: ck.meta_as("num_labels")?,
        num_classes: ck.meta_as("num_classes")?,
    };
    params
        .validate()
        .map_err(|e| CheckpointError::Architecture(e.to_string()))?;
    Ok(params)
}
