use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::losses::{
    consistency_term, feature_matching, gradient_penalty, loss_acgan_class, loss_acgan_fake,
    loss_gan, loss_wasserstein,
};
use super::{Adam, ClassPrior, Objective, TrainConfig, TrainError, Variant};
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::graph::{canonicalize, to_dense, GraphDataset, LabeledGraph};
use crate::model::{
    discretize, one_hot, Discriminator, DiscriminatorConfig, DiscriminatorOutput, Generator,
    GeneratorConfig, InputFeatures,
};
use crate::rng::{self, Rng};

/// One line of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    /// Total critic loss of the last critic update in this step.
    pub loss_d: f64,
    /// Total generator loss.
    pub loss_g: f64,
    pub gp: f64,
    pub ct: f64,
    /// Class loss (critic side, both halves); 0 unless AC-GAN.
    pub l_c: f64,
    pub fm: f64,
}

impl LossRecord {
    pub const HEADER: &'static str = "step loss_d loss_g gp ct l_c fm";
}

impl fmt::Display for LossRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {}",
            self.step, self.loss_d, self.loss_g, self.gp, self.ct, self.l_c, self.fm
        )
    }
}

/// Everything needed to continue training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: TrainConfig,
    pub num_labels: usize,
    pub num_classes: usize,
    /// Unnormalized class sampling weights for generated graphs.
    pub class_weights: Vec<f64>,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub adam_g: Adam,
    pub adam_d: Adam,
    /// Completed generator updates.
    pub step: u64,
}

impl TrainState {
    pub fn generator_config(
        config: &TrainConfig,
        num_labels: usize,
        num_classes: usize,
    ) -> GeneratorConfig {
        GeneratorConfig {
            latent_dim: config.latent_dim,
            condition_dim: if config.variant.conditional_generator() {
                num_classes
            } else {
                0
            },
            hidden: config.gen_hidden.clone(),
            n_max: config.n_max,
            num_labels,
        }
    }

    pub fn discriminator_config(
        config: &TrainConfig,
        num_labels: usize,
        num_classes: usize,
    ) -> DiscriminatorConfig {
        DiscriminatorConfig {
            n_max: config.n_max,
            num_labels,
            num_classes,
            layers: config.disc_layers,
            hidden: config.disc_hidden,
            aggregation: config.aggregation,
            residual: config.residual,
            input: InputFeatures::Labels,
            conditional: config.variant.conditional_discriminator(),
        }
    }

    /// Fresh parameters and optimizer state.
    pub fn init(
        config: TrainConfig,
        num_labels: usize,
        num_classes: usize,
        class_weights: Vec<f64>,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        if class_weights.len() != num_classes || !class_weights.iter().any(|&w| w > 0.0) {
            return Err(TrainError::Config(
                "class weights must cover every class and not all be zero".into(),
            ));
        }
        let gen_cfg = Self::generator_config(&config, num_labels, num_classes);
        let disc_cfg = Self::discriminator_config(&config, num_labels, num_classes);
        let generator = Generator::new(gen_cfg, &mut rng::stream(config.seed, "init-generator"))?;
        let discriminator = Discriminator::new(
            disc_cfg,
            &mut rng::stream(config.seed, "init-discriminator"),
        )?;
        let adam_g = Adam::new(&generator.params, config.lr_g, config.beta1, config.beta2);
        let adam_d = Adam::new(
            &discriminator.params,
            config.lr_d,
            config.beta1,
            config.beta2,
        );
        Ok(Self {
            config,
            num_labels,
            num_classes,
            class_weights,
            generator,
            discriminator,
            adam_g,
            adam_d,
            step: 0,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.generator.params.is_finite()
            && self.discriminator.params.is_finite()
            && self.adam_g.is_finite()
            && self.adam_d.is_finite()
    }

    fn class_sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.class_weights).expect("class weights validated at construction")
    }

    /// Draws `count` discrete graphs. Classes come from the class weights
    /// unless `class` is given; every sample reads only from `seed`.
    pub fn sample_graphs(
        &self,
        count: usize,
        seed: u64,
        threshold: f64,
        class: Option<usize>,
    ) -> Result<Vec<LabeledGraph>, TrainError> {
        if let Some(c) = class {
            if c >= self.num_classes {
                return Err(TrainError::ClassOutOfRange {
                    class: c,
                    bound: self.num_classes,
                });
            }
        }
        let mut r = rng::stream(seed, "generate");
        let sampler = self.class_sampler();
        let conditional = self.config.variant.conditional_generator();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let c = class.unwrap_or_else(|| sampler.sample(&mut r));
            let z = latent(self.config.latent_dim, &mut r);
            let (a, l) = self.generator.sample(&z, conditional.then_some(c))?;
            out.push(discretize(&a, &l, threshold, c));
        }
        Ok(out)
    }
}

fn latent<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Inputs for one critic update.
#[derive(Debug, Clone)]
pub struct CriticBatch {
    pub real: Vec<(Tensor, Tensor)>,
    pub real_classes: Vec<usize>,
    pub latents: Vec<Vec<f64>>,
    pub fake_classes: Vec<usize>,
    /// Interpolation weights for the gradient penalty.
    pub eps: Vec<f64>,
    /// Source of the consistency-term perturbations.
    pub noise_rng: Rng,
}

/// Inputs for one generator update. `real` is the last critic batch of the
/// same step and feeds feature matching.
#[derive(Debug, Clone)]
pub struct GeneratorBatch {
    pub real: Vec<(Tensor, Tensor)>,
    pub real_classes: Vec<usize>,
    pub latents: Vec<Vec<f64>>,
    pub fake_classes: Vec<usize>,
}

/// Loss values of one critic update and the gradient for every
/// discriminator parameter.
#[derive(Debug, Clone)]
pub struct CriticOutcome {
    pub total: f64,
    pub gp: f64,
    pub ct: f64,
    pub l_c: f64,
    pub grads: Vec<Tensor>,
}

/// Loss values of one generator update and the gradient for every generator
/// parameter.
#[derive(Debug, Clone)]
pub struct GeneratorOutcome {
    pub total: f64,
    pub fm: f64,
    pub grads: Vec<Tensor>,
}

struct Epoch {
    index: u64,
    order: Vec<usize>,
    dense: Vec<(Tensor, Tensor)>,
}

/// Drives training of a [`TrainState`] over a fixed dataset.
///
/// Every random draw is keyed by the step or batch index, so a run resumed
/// from a saved state continues exactly as an uninterrupted one would.
pub struct Trainer {
    pub state: TrainState,
    graphs: Vec<LabeledGraph>,
    epoch: Option<Epoch>,
}

impl Trainer {
    pub fn new(config: TrainConfig, data: &GraphDataset) -> Result<Self, TrainError> {
        check_data(&config, data)?;
        let mut counts = vec![0.0; data.num_graph_classes];
        for g in &data.graphs {
            counts[g.graph_class()] += 1.0;
        }
        let weights = match config.class_prior {
            ClassPrior::Empirical => counts,
            ClassPrior::Uniform => vec![1.0; data.num_graph_classes],
        };
        let state = TrainState::init(
            config,
            data.num_node_labels,
            data.num_graph_classes,
            weights,
        )?;
        Ok(Self {
            state,
            graphs: data.graphs.clone(),
            epoch: None,
        })
    }

    pub fn resume(state: TrainState, data: &GraphDataset) -> Result<Self, TrainError> {
        check_data(&state.config, data)?;
        if data.num_node_labels != state.num_labels || data.num_graph_classes != state.num_classes {
            return Err(TrainError::Data(format!(
                "dataset has {} labels and {} classes, model expects {} and {}",
                data.num_node_labels, data.num_graph_classes, state.num_labels, state.num_classes
            )));
        }
        Ok(Self {
            state,
            graphs: data.graphs.clone(),
            epoch: None,
        })
    }

    fn batches_per_epoch(&self) -> u64 {
        (self.graphs.len() / self.state.config.batch_size).max(1) as u64
    }

    /// Shuffles and re-canonicalizes the whole dataset for `index`.
    fn load_epoch(&mut self, index: u64) -> Result<(), TrainError> {
        if self.epoch.as_ref().is_some_and(|e| e.index == index) {
            return Ok(());
        }
        let cfg = &self.state.config;
        let mut r = rng::substream(cfg.seed, "epoch", index);
        let mut order: Vec<usize> = (0..self.graphs.len()).collect();
        order.shuffle(&mut r);
        let mut dense = Vec::with_capacity(self.graphs.len());
        for g in &self.graphs {
            let canon = canonicalize(g, &mut r);
            let d = to_dense(&canon, cfg.n_max, self.state.num_labels)?;
            dense.push((
                Tensor::matrix(cfg.n_max, cfg.n_max, d.adj)?,
                Tensor::matrix(cfg.n_max, self.state.num_labels, d.labels)?,
            ));
        }
        self.epoch = Some(Epoch {
            index,
            order,
            dense,
        });
        Ok(())
    }

    fn real_batch(
        &mut self,
        index: u64,
    ) -> Result<(Vec<(Tensor, Tensor)>, Vec<usize>), TrainError> {
        let per_epoch = self.batches_per_epoch();
        self.load_epoch(index / per_epoch)?;
        let bs = self.state.config.batch_size;
        let epoch = self.epoch.as_ref().expect("epoch loaded");
        let start = (index % per_epoch) as usize * bs;
        let n = self.graphs.len();
        let picks: Vec<usize> = (0..bs).map(|i| epoch.order[(start + i) % n]).collect();
        Ok((
            picks.iter().map(|&g| epoch.dense[g].clone()).collect(),
            picks
                .iter()
                .map(|&g| self.graphs[g].graph_class())
                .collect(),
        ))
    }

    fn fakes(&self, r: &mut Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
        let sampler = self.state.class_sampler();
        let bs = self.state.config.batch_size;
        let mut latents = Vec::with_capacity(bs);
        let mut classes = Vec::with_capacity(bs);
        for _ in 0..bs {
            classes.push(sampler.sample(r));
            latents.push(latent(self.state.config.latent_dim, r));
        }
        (latents, classes)
    }

    /// Inputs of the `index`-th critic update (counted over the whole run).
    pub fn critic_batch(&mut self, index: u64) -> Result<CriticBatch, TrainError> {
        let (real, real_classes) = self.real_batch(index)?;
        let mut r = rng::substream(self.state.config.seed, "critic", index);
        let (latents, fake_classes) = self.fakes(&mut r);
        let eps = (0..real.len()).map(|_| r.random::<f64>()).collect();
        let noise_rng = rng::substream(self.state.config.seed, "consistency", index);
        Ok(CriticBatch {
            real,
            real_classes,
            latents,
            fake_classes,
            eps,
            noise_rng,
        })
    }

    /// Inputs of the generator update of step `step` (1-based).
    pub fn generator_batch(&mut self, step: u64) -> Result<GeneratorBatch, TrainError> {
        let d = self.state.config.d_steps as u64;
        let (real, real_classes) = self.real_batch(step * d - 1)?;
        let mut r = rng::substream(self.state.config.seed, "generator", step);
        let (latents, fake_classes) = self.fakes(&mut r);
        Ok(GeneratorBatch {
            real,
            real_classes,
            latents,
            fake_classes,
        })
    }

    /// Runs one generator step (preceded by `d_steps` critic updates). On a
    /// non-finite loss or parameter the state is rolled back and
    /// [`TrainError::Diverged`] carries the last good state.
    pub fn step(&mut self) -> Result<LossRecord, TrainError> {
        let last_good = self.state.clone();
        match self.try_step() {
            Ok(record) => Ok(record),
            Err(e) => {
                self.state = last_good;
                match e {
                    TrainError::Autodiff(AutodiffError::NonFinite { .. })
                    | TrainError::Diverged { .. } => Err(TrainError::Diverged {
                        step: self.state.step + 1,
                        last_good: Box::new(self.state.clone()),
                    }),
                    other => Err(other),
                }
            }
        }
    }

    /// Steps until the configured number of generator updates is reached.
    pub fn run(&mut self) -> Result<Vec<LossRecord>, TrainError> {
        let mut curve = Vec::new();
        while self.state.step < self.state.config.steps {
            curve.push(self.step()?);
        }
        Ok(curve)
    }

    fn try_step(&mut self) -> Result<LossRecord, TrainError> {
        let step = self.state.step + 1;
        let d = self.state.config.d_steps as u64;
        let mut critic = None;
        for k in 0..d {
            let mut batch = self.critic_batch((step - 1) * d + k)?;
            let outcome = critic_update(&self.state, &mut batch)?;
            let st = &mut self.state;
            st.adam_d.step(&mut st.discriminator.params, &outcome.grads);
            critic = Some(outcome);
        }
        let critic = critic.expect("at least one critic update");
        let batch = self.generator_batch(step)?;
        let gen = generator_update(&self.state, &batch)?;
        let st = &mut self.state;
        st.adam_g.step(&mut st.generator.params, &gen.grads);
        let record = LossRecord {
            step,
            loss_d: critic.total,
            loss_g: gen.total,
            gp: critic.gp,
            ct: critic.ct,
            l_c: critic.l_c,
            fm: gen.fm,
        };
        let values = [
            record.loss_d,
            record.loss_g,
            record.gp,
            record.ct,
            record.l_c,
            record.fm,
        ];
        if !values.iter().all(|v| v.is_finite()) || !self.state.is_finite() {
            return Err(TrainError::Diverged {
                step,
                last_good: Box::new(self.state.clone()),
            });
        }
        self.state.step = step;
        Ok(record)
    }
}

fn check_data(config: &TrainConfig, data: &GraphDataset) -> Result<(), TrainError> {
    config.validate()?;
    if data.is_empty() {
        return Err(TrainError::Data("dataset is empty".into()));
    }
    if let Err((i, e)) = data.validate() {
        return Err(TrainError::Data(format!("graph {i}: {e}")));
    }
    if data.max_nodes() > config.n_max {
        return Err(TrainError::Data(format!(
            "largest graph has {} nodes, n_max is {}",
            data.max_nodes(),
            config.n_max
        )));
    }
    Ok(())
}

fn class_input(tape: &mut Tape, conditional: bool, class: usize, width: usize) -> Option<Var> {
    conditional.then(|| tape.constant(one_hot(class, width)))
}

fn evaluate(
    tape: &mut Tape,
    disc: &Discriminator,
    vars: &[Var],
    sample: &(Tensor, Tensor),
    class: Option<Var>,
) -> Result<DiscriminatorOutput, TrainError> {
    let a = tape.constant(sample.0.clone());
    let l = tape.constant(sample.1.clone());
    Ok(disc.forward(tape, vars, a, l, class)?)
}

fn zero(tape: &mut Tape) -> Var {
    tape.constant(Tensor::scalar(0.0))
}

/// Critic loss on `batch`: adversarial term, gradient penalty, consistency
/// term and (AC-GAN) class loss. Consumes randomness from `batch.noise_rng`.
pub fn critic_update(
    state: &TrainState,
    batch: &mut CriticBatch,
) -> Result<CriticOutcome, TrainError> {
    let cfg = &state.config;
    let disc = &state.discriminator;
    let classes = state.num_classes;
    let cond_d = cfg.variant.conditional_discriminator();
    let cond_g = cfg.variant.conditional_generator();
    let fakes = batch
        .latents
        .iter()
        .zip(&batch.fake_classes)
        .map(|(z, &c)| state.generator.sample(z, cond_g.then_some(c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut tape = Tape::new();
    let dv = disc.params.bind(&mut tape, true);
    let mut real_out = Vec::with_capacity(batch.real.len());
    for (sample, &c) in batch.real.iter().zip(&batch.real_classes) {
        let cv = class_input(&mut tape, cond_d, c, classes);
        real_out.push(evaluate(&mut tape, disc, &dv, sample, cv)?);
    }
    let mut fake_out = Vec::with_capacity(fakes.len());
    for (sample, &c) in fakes.iter().zip(&batch.fake_classes) {
        let cv = class_input(&mut tape, cond_d, c, classes);
        fake_out.push(evaluate(&mut tape, disc, &dv, sample, cv)?);
    }
    let d_real: Vec<Var> = real_out.iter().map(|o| o.realness).collect();
    let d_fake: Vec<Var> = fake_out.iter().map(|o| o.realness).collect();
    let (adv, _) = match cfg.objective {
        Objective::Wasserstein => loss_wasserstein(&mut tape, &d_real, &d_fake)?,
        Objective::NonSaturating => loss_gan(&mut tape, &d_real, &d_fake)?,
    };

    let real_classes = &batch.real_classes;
    let gp = if cfg.lambda_gp > 0.0 {
        gradient_penalty(
            &mut tape,
            &batch.real,
            &fakes,
            &batch.eps,
            cfg.lambda_gp,
            |t, i, a, l| {
                let cv = class_input(t, cond_d, real_classes[i], classes);
                Ok(disc.forward(t, &dv, a, l, cv)?.realness)
            },
        )?
    } else {
        zero(&mut tape)
    };
    let ct = if cfg.lambda_ct > 0.0 {
        consistency_term(
            &mut tape,
            &batch.real,
            cfg.ct_noise,
            cfg.ct_margin,
            cfg.lambda_ct,
            &mut batch.noise_rng,
            |t, i, a, l| {
                let cv = class_input(t, cond_d, real_classes[i], classes);
                let out = disc.forward(t, &dv, a, l, cv)?;
                Ok((out.realness, out.features))
            },
        )?
    } else {
        zero(&mut tape)
    };
    let l_c = if cfg.variant == Variant::Acgan {
        let real_logits: Vec<Var> = real_out.iter().map(|o| o.class_logits).collect();
        let fake_logits: Vec<Var> = fake_out.iter().map(|o| o.class_logits).collect();
        loss_acgan_class(
            &mut tape,
            &real_logits,
            real_classes,
            &fake_logits,
            &batch.fake_classes,
        )?
    } else {
        zero(&mut tape)
    };
    let total = tape.add_all(&[adv, gp, ct, l_c])?;
    let grads = tape.grad(total, &dv)?;
    Ok(CriticOutcome {
        total: tape.value(total).item(),
        gp: tape.value(gp).item(),
        ct: tape.value(ct).item(),
        l_c: tape.value(l_c).item(),
        grads: grads.into_iter().map(|g| tape.value(g).clone()).collect(),
    })
}

/// Generator loss on `batch`: adversarial term, (AC-GAN) class loss on the
/// generated graphs and feature matching against the real batch.
pub fn generator_update(
    state: &TrainState,
    batch: &GeneratorBatch,
) -> Result<GeneratorOutcome, TrainError> {
    let cfg = &state.config;
    let disc = &state.discriminator;
    let gen = &state.generator;
    let classes = state.num_classes;
    let cond_d = cfg.variant.conditional_discriminator();
    let cond_g = cfg.variant.conditional_generator();

    let mut tape = Tape::new();
    let gv = gen.params.bind(&mut tape, true);
    let dv = disc.params.bind(&mut tape, false);
    let mut real_out = Vec::with_capacity(batch.real.len());
    for (sample, &c) in batch.real.iter().zip(&batch.real_classes) {
        let cv = class_input(&mut tape, cond_d, c, classes);
        real_out.push(evaluate(&mut tape, disc, &dv, sample, cv)?);
    }
    let mut fake_out = Vec::with_capacity(batch.latents.len());
    for (z, &c) in batch.latents.iter().zip(&batch.fake_classes) {
        let zv = tape.constant(Tensor::row(z.clone()));
        let gc = class_input(&mut tape, cond_g, c, classes);
        let (a, l) = gen.forward(&mut tape, &gv, zv, gc)?;
        let dc = class_input(&mut tape, cond_d, c, classes);
        fake_out.push(disc.forward(&mut tape, &dv, a, l, dc)?);
    }
    let d_real: Vec<Var> = real_out.iter().map(|o| o.realness).collect();
    let d_fake: Vec<Var> = fake_out.iter().map(|o| o.realness).collect();
    let (_, adv) = match cfg.objective {
        Objective::Wasserstein => loss_wasserstein(&mut tape, &d_real, &d_fake)?,
        Objective::NonSaturating => loss_gan(&mut tape, &d_real, &d_fake)?,
    };
    let mut terms = vec![adv];
    if cfg.variant == Variant::Acgan {
        let logits: Vec<Var> = fake_out.iter().map(|o| o.class_logits).collect();
        terms.push(loss_acgan_fake(&mut tape, &logits, &batch.fake_classes)?);
    }
    let fm = if cfg.lambda_fm > 0.0 {
        let real_f: Vec<Var> = real_out.iter().map(|o| o.features).collect();
        let fake_f: Vec<Var> = fake_out.iter().map(|o| o.features).collect();
        feature_matching(&mut tape, &real_f, &fake_f, cfg.lambda_fm)?
    } else {
        zero(&mut tape)
    };
    terms.push(fm);
    let total = tape.add_all(&terms)?;
    let grads = tape.grad(total, &gv)?;
    Ok(GeneratorOutcome {
        total: tape.value(total).item(),
        fm: tape.value(fm).item(),
        grads: grads.into_iter().map(|g| tape.value(g).clone()).collect(),
    })
}
