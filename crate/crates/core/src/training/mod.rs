//! Adversarial training: objectives, penalties, optimizer and the
//! alternating critic / generator loop.

mod classifier;
mod losses;
mod optim;
mod trainer;

pub use classifier::{accuracy, fit_classifier, ClassifierConfig};
pub use losses::{
    consistency_term, cross_entropy, feature_matching, gradient_penalty, loss_acgan_class,
    loss_acgan_fake, loss_gan, loss_wasserstein, mean_of, LOG_CLAMP,
};
pub use optim::Adam;
pub use trainer::{
    critic_update, generator_update, CriticBatch, CriticOutcome, GeneratorBatch, GeneratorOutcome,
    LossRecord, TrainState, Trainer,
};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::graph::GraphError;
use crate::model::{Aggregation, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Autodiff(AutodiffError),
    #[error("class {class} out of range (classes: {bound})")]
    ClassOutOfRange { class: usize, bound: usize },
    #[error("non-finite loss or parameters at step {step}")]
    Diverged {
        step: u64,
        last_good: Box<TrainState>,
    },
}

impl From<AutodiffError> for TrainError {
    fn from(e: AutodiffError) -> Self {
        TrainError::Autodiff(e)
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Autodiff(a) => TrainError::Autodiff(a),
            other => TrainError::Model(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Gan,
    Cgan,
    Acgan,
}

/// Which adversarial loss drives both players.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Wasserstein,
    /// Log-loss discriminator with the non-saturating generator loss.
    NonSaturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassPrior {
    Empirical,
    Uniform,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),*
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    _ => Err(format!(
                        "unknown {} `{s}` (expected one of: {})",
                        stringify!($ty).to_lowercase(),
                        [$($name),*].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(Variant { Gan => "gan", Cgan => "cgan", Acgan => "acgan" });
keyword_enum!(Objective { Wasserstein => "wasserstein", NonSaturating => "nonsaturating" });
keyword_enum!(ClassPrior { Empirical => "empirical", Uniform => "uniform" });
keyword_enum!(Aggregation { MaxPool => "maxpool", Concat => "concat" });

impl Variant {
    pub fn conditional_generator(self) -> bool {
        self != Variant::Gan
    }

    pub fn conditional_discriminator(self) -> bool {
        self == Variant::Cgan
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub objective: Objective,
    pub batch_size: usize,
    pub d_steps: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_gp: f64,
    pub lambda_ct: f64,
    pub ct_margin: f64,
    pub ct_noise: f64,
    pub lambda_fm: f64,
    /// Number of generator updates.
    pub steps: u64,
    pub seed: u64,
    pub latent_dim: usize,
    pub n_max: usize,
    pub gen_hidden: Vec<usize>,
    pub disc_layers: usize,
    pub disc_hidden: usize,
    pub aggregation: Aggregation,
    pub residual: bool,
    pub class_prior: ClassPrior,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Acgan,
            objective: Objective::Wasserstein,
            batch_size: 16,
            d_steps: 5,
            lr_g: 1e-4,
            lr_d: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            lambda_gp: 10.0,
            lambda_ct: 2.0,
            ct_margin: 0.2,
            ct_noise: 0.05,
            lambda_fm: 1.0,
            steps: 1000,
            seed: 0,
            latent_dim: 16,
            n_max: 16,
            gen_hidden: vec![64, 64],
            disc_layers: 3,
            disc_hidden: 32,
            aggregation: Aggregation::MaxPool,
            residual: true,
            class_prior: ClassPrior::Empirical,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        let weights = [
            self.lr_g,
            self.lr_d,
            self.lambda_gp,
            self.lambda_ct,
            self.ct_margin,
            self.ct_noise,
            self.lambda_fm,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return fail("learning rates and loss weights must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("optimizer moments must lie in [0, 1)");
        }
        if self.batch_size < 2 {
            return fail("batch_size must be at least 2");
        }
        if self.d_steps == 0 {
            return fail("d_steps must be at least 1");
        }
        if self.latent_dim == 0 || self.n_max < 2 {
            return fail("latent_dim must be positive and n_max at least 2");
        }
        if self.disc_layers == 0 || self.disc_hidden == 0 || self.gen_hidden.contains(&0) {
            return fail("layer widths and counts must be positive");
        }
        Ok(())
    }
}
