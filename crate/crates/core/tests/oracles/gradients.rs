//! Finite-difference checks of every loss term against the tape.

use lggan::autodiff::{Tape, Tensor, Var};
use lggan::graph::GraphDataset;
use lggan::model::{
    one_hot, Aggregation, Discriminator, DiscriminatorConfig, DiscriminatorOutput, Generator,
    GeneratorConfig, InputFeatures, ParamSet,
};
use lggan::rng;
use lggan::training::*;
use rand::Rng;

pub const N: usize = 6;
pub const LABELS: usize = 3;
pub const CLASSES: usize = 2;
const FD_EPS: f64 = 1e-6;

/// 1e-3 relative or 1e-6 absolute.
pub fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-6 || diff <= 1e-3 * numeric.abs()
}

pub fn disc_config(layers: usize, conditional: bool) -> DiscriminatorConfig {
    DiscriminatorConfig {
        n_max: N,
        num_labels: LABELS,
        num_classes: CLASSES,
        layers,
        hidden: 4,
        aggregation: Aggregation::MaxPool,
        residual: true,
        input: InputFeatures::Labels,
        conditional,
    }
}

pub fn gen_config() -> GeneratorConfig {
    GeneratorConfig {
        latent_dim: 3,
        condition_dim: CLASSES,
        hidden: vec![5],
        n_max: N,
        num_labels: LABELS,
    }
}

/// A continuous symmetric adjacency in (0, 1) and softmax-like label rows.
pub fn soft_sample(r: &mut impl Rng) -> (Tensor, Tensor) {
    let mut a = vec![0.0; N * N];
    for i in 0..N {
        for j in i + 1..N {
            let v = r.random_range(0.05..0.95);
            a[i * N + j] = v;
            a[j * N + i] = v;
        }
    }
    let mut l = Vec::with_capacity(N * LABELS);
    for _ in 0..N {
        let row: Vec<f64> = (0..LABELS).map(|_| r.random_range(0.1..1.0)).collect();
        let s: f64 = row.iter().sum();
        l.extend(row.iter().map(|x| x / s));
    }
    (
        Tensor::matrix(N, N, a).unwrap(),
        Tensor::matrix(N, LABELS, l).unwrap(),
    )
}

pub type LossFn<'a> = dyn Fn(&mut Tape, &[Var]) -> Var + 'a;

fn evaluate(params: &ParamSet, f: &LossFn) -> f64 {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, true);
    let out = f(&mut tape, &vars);
    tape.value(out).item()
}

/// Compares the tape gradient of `f` with central differences on up to
/// `per_tensor` coordinates of every parameter tensor. Returns the failures.
pub fn check_params(params: &ParamSet, f: &LossFn, per_tensor: usize, seed: u64) -> Vec<String> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, true);
    let out = f(&mut tape, &vars);
    let grads = tape.grad(out, &vars).unwrap();
    let mut r = rng::stream(seed, "coords");
    let mut failures = Vec::new();
    for (k, (name, t)) in params.iter().enumerate() {
        let coords: Vec<usize> = if t.len() <= per_tensor {
            (0..t.len()).collect()
        } else {
            (0..per_tensor)
                .map(|_| r.random_range(0..t.len()))
                .collect()
        };
        for i in coords {
            let shifted = |delta: f64| {
                let mut p = params.clone();
                p.tensors_mut().nth(k).unwrap().data_mut()[i] += delta;
                evaluate(&p, f)
            };
            let numeric = (shifted(FD_EPS) - shifted(-FD_EPS)) / (2.0 * FD_EPS);
            let analytic = tape.value(grads[k]).data()[i];
            if !close(analytic, numeric) {
                failures.push(format!(
                    "{name}[{i}]: analytic {analytic} numeric {numeric}"
                ));
            }
        }
    }
    failures
}

pub struct Fixture {
    pub disc: Discriminator,
    pub gen: Generator,
    pub real: Vec<(Tensor, Tensor)>,
    pub fake: Vec<(Tensor, Tensor)>,
    pub latents: Vec<Tensor>,
    pub classes: Vec<usize>,
}

pub fn fixture(seed: u64, layers: usize) -> Fixture {
    let mut r = rng::stream(seed, "fixture");
    let disc = Discriminator::new(disc_config(layers, false), &mut r).unwrap();
    let gen = Generator::new(gen_config(), &mut r).unwrap();
    let real = (0..3).map(|_| soft_sample(&mut r)).collect();
    let fake = (0..3).map(|_| soft_sample(&mut r)).collect();
    let latents = (0..3)
        .map(|_| Tensor::row((0..3).map(|_| r.random_range(-1.5..1.5)).collect()))
        .collect();
    Fixture {
        disc,
        gen,
        real,
        fake,
        latents,
        classes: vec![0, 1, 1],
    }
}

pub fn outputs(
    tape: &mut Tape,
    disc: &Discriminator,
    vars: &[Var],
    samples: &[(Tensor, Tensor)],
) -> Vec<DiscriminatorOutput> {
    samples
        .iter()
        .map(|(a, l)| {
            let a = tape.constant(a.clone());
            let l = tape.constant(l.clone());
            disc.forward(tape, vars, a, l, None).unwrap()
        })
        .collect()
}

pub fn generated(
    tape: &mut Tape,
    fx: &Fixture,
    gv: &[Var],
    dv: &[Var],
) -> Vec<DiscriminatorOutput> {
    fx.latents
        .iter()
        .zip(&fx.classes)
        .map(|(z, &c)| {
            let z = tape.constant(z.clone());
            let cv = tape.constant(one_hot(c, CLASSES));
            let (a, l) = fx.gen.forward(tape, gv, z, Some(cv)).unwrap();
            fx.disc.forward(tape, dv, a, l, None).unwrap()
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Adv {
    Gan,
    Wasserstein,
}

fn adversarial(tape: &mut Tape, adv: Adv, real: &[Var], fake: &[Var]) -> (Var, Var) {
    match adv {
        Adv::Gan => loss_gan(tape, real, fake).unwrap(),
        Adv::Wasserstein => loss_wasserstein(tape, real, fake).unwrap(),
    }
}

/// Both adversarial objectives, critic and generator sides.
pub fn adversarial_failures(seed: u64) -> Vec<String> {
    let fx = fixture(seed, 3);
    let mut failures = Vec::new();
    for adv in [Adv::Gan, Adv::Wasserstein] {
        let critic = |tape: &mut Tape, dv: &[Var]| {
            let r: Vec<Var> = outputs(tape, &fx.disc, dv, &fx.real)
                .iter()
                .map(|o| o.realness)
                .collect();
            let f: Vec<Var> = outputs(tape, &fx.disc, dv, &fx.fake)
                .iter()
                .map(|o| o.realness)
                .collect();
            adversarial(tape, adv, &r, &f).0
        };
        failures.extend(check_params(&fx.disc.params, &critic, 12, seed));
        let generator = |tape: &mut Tape, gv: &[Var]| {
            let dv = fx.disc.params.bind(tape, false);
            let r: Vec<Var> = outputs(tape, &fx.disc, &dv, &fx.real)
                .iter()
                .map(|o| o.realness)
                .collect();
            let f: Vec<Var> = generated(tape, &fx, gv, &dv)
                .iter()
                .map(|o| o.realness)
                .collect();
            adversarial(tape, adv, &r, &f).1
        };
        failures.extend(check_params(&fx.gen.params, &generator, 12, seed));
    }
    failures
}

/// Auxiliary class losses on both sides.
pub fn class_failures(seed: u64) -> Vec<String> {
    let fx = fixture(seed, 3);
    let critic = |tape: &mut Tape, dv: &[Var]| {
        let r: Vec<Var> = outputs(tape, &fx.disc, dv, &fx.real)
            .iter()
            .map(|o| o.class_logits)
            .collect();
        let f: Vec<Var> = outputs(tape, &fx.disc, dv, &fx.fake)
            .iter()
            .map(|o| o.class_logits)
            .collect();
        loss_acgan_class(tape, &r, &[1, 0, 1], &f, &fx.classes).unwrap()
    };
    let mut failures = check_params(&fx.disc.params, &critic, 12, seed);
    let generator = |tape: &mut Tape, gv: &[Var]| {
        let dv = fx.disc.params.bind(tape, false);
        let f: Vec<Var> = generated(tape, &fx, gv, &dv)
            .iter()
            .map(|o| o.class_logits)
            .collect();
        loss_acgan_fake(tape, &f, &fx.classes).unwrap()
    };
    failures.extend(check_params(&fx.gen.params, &generator, 12, seed));
    failures
}

pub fn penalty(tape: &mut Tape, fx: &Fixture, dv: &[Var], eps: &[f64]) -> Var {
    gradient_penalty(tape, &fx.real, &fx.fake, eps, 10.0, |t, _, a, l| {
        Ok(fx.disc.forward(t, dv, a, l, None)?.realness)
    })
    .unwrap()
}

/// Gradient penalty of a two-layer critic on six-node inputs, every
/// parameter coordinate.
pub fn penalty_failures(seed: u64) -> Vec<String> {
    let fx = fixture(seed, 2);
    let eps = [0.2, 0.5, 0.9];
    let f = |tape: &mut Tape, dv: &[Var]| penalty(tape, &fx, dv, &eps);
    check_params(&fx.disc.params, &f, usize::MAX, seed)
}

pub fn consistency_failures(seed: u64) -> Vec<String> {
    let fx = fixture(seed, 3);
    let f = |tape: &mut Tape, dv: &[Var]| {
        let mut noise = rng::stream(seed, "ct-noise");
        // margin 0 keeps every hinge active
        consistency_term(tape, &fx.real, 0.05, 0.0, 2.0, &mut noise, |t, _, a, l| {
            let out = fx.disc.forward(t, dv, a, l, None)?;
            Ok((out.realness, out.features))
        })
        .unwrap()
    };
    check_params(&fx.disc.params, &f, 12, seed)
}

pub fn feature_matching_failures(seed: u64) -> Vec<String> {
    let fx = fixture(seed, 3);
    let f = |tape: &mut Tape, gv: &[Var]| {
        let dv = fx.disc.params.bind(tape, false);
        let r: Vec<Var> = outputs(tape, &fx.disc, &dv, &fx.real)
            .iter()
            .map(|o| o.features)
            .collect();
        let g: Vec<Var> = generated(tape, &fx, gv, &dv)
            .iter()
            .map(|o| o.features)
            .collect();
        feature_matching(tape, &r, &g, 1.0).unwrap()
    };
    check_params(&fx.gen.params, &f, 12, seed)
}

pub fn planted(count: usize, seed: u64) -> GraphDataset {
    lggan::graph::planted_partition(count, 6..=9, seed)
}

pub fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        d_steps: 2,
        steps: 4,
        seed,
        latent_dim: 4,
        n_max: 9,
        gen_hidden: vec![8],
        disc_layers: 2,
        disc_hidden: 4,
        ..Default::default()
    }
}

/// Full critic and generator objectives, as the trainer composes them.
pub fn composed_failures(seed: u64, variant: Variant) -> Vec<String> {
    let data = planted(12, 5);
    let mut trainer = Trainer::new(
        TrainConfig {
            variant,
            ..small_config(seed)
        },
        &data,
    )
    .unwrap();
    trainer.step().unwrap();
    let batch = trainer.critic_batch(7).unwrap();
    let state = trainer.state.clone();
    let critic_at = |p: &ParamSet| {
        let mut s = state.clone();
        s.discriminator.params = p.clone();
        critic_update(&s, &mut batch.clone()).unwrap()
    };
    let analytic = critic_at(&state.discriminator.params).grads;
    let gbatch = trainer.generator_batch(4).unwrap();
    let gen_at = |p: &ParamSet| {
        let mut s = state.clone();
        s.generator.params = p.clone();
        generator_update(&s, &gbatch).unwrap()
    };
    let gen_analytic = gen_at(&state.generator.params).grads;
    let mut r = rng::stream(seed, "coords");
    let mut failures = Vec::new();
    for (params, grads, total) in [
        (
            &state.discriminator.params,
            &analytic,
            &(|p: &ParamSet| critic_at(p).total) as &dyn Fn(&ParamSet) -> f64,
        ),
        (&state.generator.params, &gen_analytic, &|p: &ParamSet| {
            gen_at(p).total
        }),
    ] {
        for (k, (name, t)) in params.iter().enumerate() {
            for _ in 0..6 {
                let i = r.random_range(0..t.len());
                let shifted = |delta: f64| {
                    let mut p = params.clone();
                    p.tensors_mut().nth(k).unwrap().data_mut()[i] += delta;
                    total(&p)
                };
                let numeric = (shifted(FD_EPS) - shifted(-FD_EPS)) / (2.0 * FD_EPS);
                let a = grads[k].data()[i];
                if !close(a, numeric) {
                    failures.push(format!("{variant} {name}[{i}]: {a} vs {numeric}"));
                }
            }
        }
    }
    failures
}

/// A linear critic `<W_A, A> + <W_L, L>` with `‖W‖ = 1` everywhere.
pub fn unit_linear_critic(
    w_a: &Tensor,
    w_l: &Tensor,
) -> impl Fn(&mut Tape, usize, Var, Var) -> Result<Var, TrainError> {
    let (w_a, w_l) = (w_a.clone(), w_l.clone());
    move |t, _, a, l| {
        let wa = t.constant(w_a.clone());
        let wl = t.constant(w_l.clone());
        let pa = t.mul(a, wa)?;
        let pl = t.mul(l, wl)?;
        let sa = t.sum(pa)?;
        let sl = t.sum(pl)?;
        Ok(t.add(sa, sl)?)
    }
}

pub fn unit_weights(seed: u64) -> (Tensor, Tensor) {
    let mut r = rng::stream(seed, "unit");
    let a: Vec<f64> = (0..N * N).map(|_| r.random_range(-1.0..1.0)).collect();
    let l: Vec<f64> = (0..N * LABELS).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = a.iter().chain(&l).map(|x| x * x).sum::<f64>().sqrt();
    (
        Tensor::matrix(N, N, a.iter().map(|x| x / norm).collect()).unwrap(),
        Tensor::matrix(N, LABELS, l.iter().map(|x| x / norm).collect()).unwrap(),
    )
}

/// Penalty value of the unit-norm linear critic.
pub fn unit_critic_penalty(seed: u64) -> f64 {
    let fx = fixture(seed, 2);
    let (wa, wl) = unit_weights(seed);
    let mut tape = Tape::new();
    let gp = gradient_penalty(
        &mut tape,
        &fx.real,
        &fx.fake,
        &[0.1, 0.6, 0.3],
        10.0,
        unit_linear_critic(&wa, &wl),
    )
    .unwrap();
    tape.value(gp).item()
}
