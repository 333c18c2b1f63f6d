//! Adversarial objectives and regularizers, built on a [`Tape`].
//!
//! Critics are passed as closures so the penalties can be checked against
//! simple hand-written critics as well as the GCN discriminator.

use rand::Rng;

use super::TrainError;
use crate::autodiff::{AutodiffError, Tape, Tensor, Var, GRAD_NORM_EPS};

/// Probabilities are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

fn check_pair(op: &'static str, a: usize, b: usize) -> Result<(), TrainError> {
    if a == 0 || a != b {
        return Err(AutodiffError::ShapeMismatch {
            op,
            left: vec![a],
            right: vec![b],
        }
        .into());
    }
    Ok(())
}

/// Mean of scalar nodes.
pub fn mean_of(tape: &mut Tape, xs: &[Var]) -> Result<Var, TrainError> {
    let total = tape.add_all(xs)?;
    Ok(tape.scale(total, 1.0 / xs.len() as f64)?)
}

fn clamped_log(tape: &mut Tape, p: Var) -> Result<Var, TrainError> {
    let p = tape.clamp(p, LOG_CLAMP, 1.0 - LOG_CLAMP)?;
    Ok(tape.log(p)?)
}

fn log_sigmoid(tape: &mut Tape, x: Var) -> Result<Var, TrainError> {
    let s = tape.sigmoid(x)?;
    clamped_log(tape, s)
}

fn log_one_minus_sigmoid(tape: &mut Tape, x: Var) -> Result<Var, TrainError> {
    let s = tape.sigmoid(x)?;
    let neg = tape.scale(s, -1.0)?;
    let q = tape.add_scalar(neg, 1.0)?;
    clamped_log(tape, q)
}

/// Standard GAN losses on unbounded critic outputs:
/// `loss_d = -mean log σ(real) - mean log(1 - σ(fake))`,
/// `loss_g = -mean log σ(fake)`.
pub fn loss_gan(tape: &mut Tape, d_real: &[Var], d_fake: &[Var]) -> Result<(Var, Var), TrainError> {
    check_pair("loss_gan", d_real.len(), d_fake.len())?;
    let real: Vec<Var> = d_real
        .iter()
        .map(|&x| log_sigmoid(tape, x))
        .collect::<Result<_, _>>()?;
    let fake: Vec<Var> = d_fake
        .iter()
        .map(|&x| log_one_minus_sigmoid(tape, x))
        .collect::<Result<_, _>>()?;
    let real = mean_of(tape, &real)?;
    let fake = mean_of(tape, &fake)?;
    let both = tape.add(real, fake)?;
    let loss_d = tape.scale(both, -1.0)?;
    let gen: Vec<Var> = d_fake
        .iter()
        .map(|&x| log_sigmoid(tape, x))
        .collect::<Result<_, _>>()?;
    let gen = mean_of(tape, &gen)?;
    let loss_g = tape.scale(gen, -1.0)?;
    Ok((loss_d, loss_g))
}

/// `loss_d = mean(fake) - mean(real)`, `loss_g = -mean(fake)`.
pub fn loss_wasserstein(
    tape: &mut Tape,
    d_real: &[Var],
    d_fake: &[Var],
) -> Result<(Var, Var), TrainError> {
    check_pair("loss_wasserstein", d_real.len(), d_fake.len())?;
    let real = mean_of(tape, d_real)?;
    let fake = mean_of(tape, d_fake)?;
    let loss_d = tape.sub(fake, real)?;
    let loss_g = tape.scale(fake, -1.0)?;
    Ok((loss_d, loss_g))
}

/// Cross-entropy of `1 × G` logits against a class index.
pub fn cross_entropy(tape: &mut Tape, logits: Var, class: usize) -> Result<Var, TrainError> {
    let width = tape.value(logits).len();
    if class >= width {
        return Err(TrainError::ClassOutOfRange {
            class,
            bound: width,
        });
    }
    let probs = tape.softmax_rows(logits)?;
    let mut target = vec![0.0; width];
    target[class] = 1.0;
    let target = tape.constant(Tensor::new(tape.value(logits).shape().to_vec(), target)?);
    let picked = tape.mul(probs, target)?;
    let picked = tape.sum(picked)?;
    let log_p = clamped_log(tape, picked)?;
    Ok(tape.scale(log_p, -1.0)?)
}

fn mean_cross_entropy(
    tape: &mut Tape,
    logits: &[Var],
    classes: &[usize],
) -> Result<Var, TrainError> {
    check_pair("loss_acgan_class", logits.len(), classes.len())?;
    let terms: Vec<Var> = logits
        .iter()
        .zip(classes)
        .map(|(&l, &c)| cross_entropy(tape, l, c))
        .collect::<Result<_, _>>()?;
    mean_of(tape, &terms)
}

/// Auxiliary classifier loss: mean cross-entropy on real graphs against their
/// classes plus mean cross-entropy on generated graphs against the sampled
/// classes.
pub fn loss_acgan_class(
    tape: &mut Tape,
    real_logits: &[Var],
    true_classes: &[usize],
    fake_logits: &[Var],
    sampled_classes: &[usize],
) -> Result<Var, TrainError> {
    let real = mean_cross_entropy(tape, real_logits, true_classes)?;
    let fake = mean_cross_entropy(tape, fake_logits, sampled_classes)?;
    Ok(tape.add(real, fake)?)
}

/// Generated-side half of [`loss_acgan_class`].
pub fn loss_acgan_fake(
    tape: &mut Tape,
    fake_logits: &[Var],
    sampled_classes: &[usize],
) -> Result<Var, TrainError> {
    mean_cross_entropy(tape, fake_logits, sampled_classes)
}

/// Gradient penalty `weight · mean_i (‖∇ D(x̂_i)‖ - 1)²` with
/// `x̂_i = ε_i real_i + (1 - ε_i) fake_i` applied to both `A` and `L`. The
/// interpolates are fresh leaves, so the result stays differentiable with
/// respect to whatever parameters `critic` reads. `critic` maps
/// `(sample index, A, L)` to a scalar realness.
pub fn gradient_penalty<F>(
    tape: &mut Tape,
    real: &[(Tensor, Tensor)],
    fake: &[(Tensor, Tensor)],
    eps: &[f64],
    weight: f64,
    mut critic: F,
) -> Result<Var, TrainError>
where
    F: FnMut(&mut Tape, usize, Var, Var) -> Result<Var, TrainError>,
{
    check_pair("gradient_penalty", real.len(), fake.len())?;
    check_pair("gradient_penalty", real.len(), eps.len())?;
    let mut inputs = Vec::with_capacity(2 * real.len());
    let mut scores = Vec::with_capacity(real.len());
    for (i, ((ra, rl), (fa, fl))) in real.iter().zip(fake).enumerate() {
        let e = eps[i];
        let mix = |r: &Tensor, f: &Tensor| r.zip(f, |x, y| e * x + (1.0 - e) * y);
        if ra.shape() != fa.shape() || rl.shape() != fl.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "gradient_penalty",
                left: ra.shape().to_vec(),
                right: fa.shape().to_vec(),
            }
            .into());
        }
        let a = tape.leaf(mix(ra, fa));
        let l = tape.leaf(mix(rl, fl));
        inputs.extend([a, l]);
        scores.push(critic(tape, i, a, l)?);
    }
    // samples are independent, so one gradient of the summed scores yields
    // every per-sample input gradient
    let total = tape.add_all(&scores)?;
    let grads = tape.grad(total, &inputs)?;
    let mut terms = Vec::with_capacity(real.len());
    for g in grads.chunks(2) {
        let norm = tape.l2_norm(g)?;
        let gap = tape.add_scalar(norm, -1.0)?;
        terms.push(tape.mul(gap, gap)?);
    }
    let mean = mean_of(tape, &terms)?;
    Ok(tape.scale(mean, weight)?)
}

/// Consistency term: each real sample is perturbed twice with additive
/// `U(-noise, noise)` noise (symmetric with zero diagonal on `A`), and the
/// hinge `max(0, |D(x') - D(x'')| + 0.1 ‖f(x') - f(x'')‖ - margin)` is
/// averaged and scaled by `weight`. `critic` returns `(realness, features)`.
pub fn consistency_term<F, R>(
    tape: &mut Tape,
    real: &[(Tensor, Tensor)],
    noise: f64,
    margin: f64,
    weight: f64,
    rng: &mut R,
    mut critic: F,
) -> Result<Var, TrainError>
where
    F: FnMut(&mut Tape, usize, Var, Var) -> Result<(Var, Var), TrainError>,
    R: Rng + ?Sized,
{
    if real.is_empty() {
        return Err(AutodiffError::Arity {
            op: "consistency_term",
            expected: 1,
            found: 0,
        }
        .into());
    }
    let mut terms = Vec::with_capacity(real.len());
    for (i, (a, l)) in real.iter().enumerate() {
        let mut evals = Vec::with_capacity(2);
        for _ in 0..2 {
            let pa = tape.constant(perturb_adjacency(a, noise, rng));
            let pl = tape.constant(perturb(l, noise, rng));
            evals.push(critic(tape, i, pa, pl)?);
        }
        let (s1, f1) = evals[0];
        let (s2, f2) = evals[1];
        let ds = tape.sub(s1, s2)?;
        let sq = tape.mul(ds, ds)?;
        let sq = tape.add_scalar(sq, GRAD_NORM_EPS)?;
        let abs = tape.powf(sq, 0.5)?;
        let df = tape.sub(f1, f2)?;
        let feat = tape.l2_norm(&[df])?;
        let feat = tape.scale(feat, 0.1)?;
        let gap = tape.add(abs, feat)?;
        let gap = tape.add_scalar(gap, -margin)?;
        terms.push(tape.relu(gap)?);
    }
    let mean = mean_of(tape, &terms)?;
    Ok(tape.scale(mean, weight)?)
}

fn uniform<R: Rng + ?Sized>(noise: f64, rng: &mut R) -> f64 {
    if noise > 0.0 {
        rng.random_range(-noise..noise)
    } else {
        0.0
    }
}

fn perturb<R: Rng + ?Sized>(t: &Tensor, noise: f64, rng: &mut R) -> Tensor {
    let mut out = t.clone();
    for x in out.data_mut() {
        *x += uniform(noise, rng);
    }
    out
}

fn perturb_adjacency<R: Rng + ?Sized>(t: &Tensor, noise: f64, rng: &mut R) -> Tensor {
    let n = t.rows();
    let mut out = t.clone();
    let data = out.data_mut();
    for i in 0..n {
        for j in i + 1..n {
            let d = uniform(noise, rng);
            data[i * n + j] += d;
            data[j * n + i] += d;
        }
    }
    out
}

/// `weight · ‖mean(real) - mean(fake)‖²` over `1 × D` feature rows.
pub fn feature_matching(
    tape: &mut Tape,
    real: &[Var],
    fake: &[Var],
    weight: f64,
) -> Result<Var, TrainError> {
    if real.is_empty() || fake.is_empty() {
        return Err(AutodiffError::Arity {
            op: "feature_matching",
            expected: 1,
            found: 0,
        }
        .into());
    }
    let r = tape.add_all(real)?;
    let r = tape.scale(r, 1.0 / real.len() as f64)?;
    let f = tape.add_all(fake)?;
    let f = tape.scale(f, 1.0 / fake.len() as f64)?;
    let d = tape.sub(r, f)?;
    let sq = tape.mul(d, d)?;
    let s = tape.sum(sq)?;
    Ok(tape.scale(s, weight)?)
}
