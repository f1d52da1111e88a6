//! Encoder/decoder models and their training loop.
//!
//! The encoder maps an observation to `m·D` means followed, for variational
//! methods, by `m` raw scale outputs; `σᵢ = softplus(rawᵢ) + 1e-6` is shared
//! by the `D` entries of unit `i`. The objective per batch is
//! `recon + KL + γ·TC` with `recon = ½‖x − x̂‖²` averaged over the batch.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{Method, ModelConfig};
use super::discriminator::{discriminator_loss, discriminator_spec, discriminator_tc, discriminator_tc_with_grad, permute_units};
use super::kl::{kl_vec_spherical_with_grad, CodeGradient, LatentCode};
use super::tc::{tc_minibatch, tc_minibatch_with_grad, tc_per_dimension, tc_per_dimension_with_grad};
use crate::neural::{
    backprop_with_input, clip_grad_norm, mlp_forward, reparameterize_backward, reparameterize_with_noise,
    sigma_from_raw, sigmoid, standard_normal_matrix, Activation, AdamState, Checkpoint, MlpSpec, NamedNetwork,
    ParamBlock,
};
use crate::numerics::RngStream;
use crate::synthdata::{sample_batch, Dataset, Side};
use crate::{Error, Result};

const ENCODE_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: MlpSpec,
    pub params: ParamBlock,
}

impl Network {
    fn new(spec: MlpSpec) -> Self {
        let params = spec.init_params();
        Network { spec, params }
    }
}

/// Scalar terms of one step. `tc` is absent for methods without a TC term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl: f64,
    pub tc: Option<f64>,
    pub total: f64,
    pub disc_loss: Option<f64>,
    pub disc_acc: Option<f64>,
}

/// Parameter gradients of the generator objective.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorGradients {
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub d_x: usize,
    pub encoder: Network,
    pub decoder: Network,
    pub discriminator: Option<Network>,
    pub step: usize,
    enc_adam: AdamState,
    dec_adam: AdamState,
    disc_adam: Option<AdamState>,
}

fn stack(input: usize, hidden: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend(std::iter::repeat_n(hidden, layers));
    w.push(output);
    w
}

impl Model {
    pub fn new(config: ModelConfig, d_x: usize) -> Result<Self> {
        config.validate()?;
        if d_x == 0 {
            return Err(Error::Config("observation width must be positive".into()));
        }
        let root = RngStream::new(config.seed);
        let seed_of = |label: &str| root.child(label).next_word();
        let latent = config.latent_width();
        let enc_out = if config.method.is_variational() { latent + config.m } else { latent };
        let encoder = Network::new(MlpSpec::new(
            stack(d_x, config.hidden_width, config.hidden_layers, enc_out),
            Activation::Relu,
            seed_of("encoder"),
        )?);
        let decoder = Network::new(MlpSpec::new(
            stack(latent, config.hidden_width, config.hidden_layers, d_x),
            Activation::Relu,
            seed_of("decoder"),
        )?);
        let discriminator = if config.method.has_discriminator() {
            Some(Network::new(discriminator_spec(
                latent,
                config.disc_hidden_width,
                config.disc_hidden_layers,
                seed_of("discriminator"),
            )?))
        } else {
            None
        };
        Ok(Model {
            enc_adam: AdamState::new(encoder.params.len(), config.lr),
            dec_adam: AdamState::new(decoder.params.len(), config.lr),
            disc_adam: discriminator
                .as_ref()
                .map(|n| AdamState::new(n.params.len(), config.disc_lr)),
            config,
            d_x,
            encoder,
            decoder,
            discriminator,
            step: 0,
        })
    }

    /// Dataset size used by the minibatch TC estimator.
    pub fn dataset_size(&self) -> usize {
        self.config.dataset_size.max(2)
    }

    /// Encoder and decoder parameters concatenated.
    pub fn generator_params(&self) -> Vec<f64> {
        let mut v = self.encoder.params.values.clone();
        v.extend_from_slice(&self.decoder.params.values);
        v
    }

    pub fn set_generator_params(&mut self, values: &[f64]) -> Result<()> {
        let ne = self.encoder.params.len();
        if values.len() != ne + self.decoder.params.len() {
            return Err(Error::DimensionMismatch {
                context: "generator parameters",
                expected: ne + self.decoder.params.len(),
                got: values.len(),
            });
        }
        self.encoder.params.values.copy_from_slice(&values[..ne]);
        self.decoder.params.values.copy_from_slice(&values[ne..]);
        Ok(())
    }

    fn split_encoder_output(&self, out: &DMatrix<f64>) -> (DMatrix<f64>, Option<(DMatrix<f64>, DMatrix<f64>)>) {
        let latent = self.config.latent_width();
        let mu = out.columns(0, latent).into_owned();
        if !self.config.method.is_variational() {
            return (mu, None);
        }
        let raw = out.columns(latent, self.config.m).into_owned();
        let sigma = raw.map(sigma_from_raw);
        (mu, Some((raw, sigma)))
    }

    /// Posterior means `μ` (the code itself for the autoencoder).
    pub fn encode_mean(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let latent = self.config.latent_width();
        let mut out = DMatrix::zeros(x.nrows(), latent);
        let mut start = 0;
        while start < x.nrows() {
            let n = ENCODE_CHUNK.min(x.nrows() - start);
            let (h, _) = mlp_forward(&self.encoder.spec, &self.encoder.params, &x.rows(start, n).into_owned())?;
            out.rows_mut(start, n).copy_from(&h.columns(0, latent));
            start += n;
        }
        Ok(out)
    }

    /// Latent posterior of a batch with explicit reparameterisation noise.
    pub fn encode(&self, x: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<LatentCode> {
        let (out, _) = mlp_forward(&self.encoder.spec, &self.encoder.params, x)?;
        let (mu, scale) = self.split_encoder_output(&out);
        let (m, d) = (self.config.m, self.config.d);
        match scale {
            Some((_, sigma)) => {
                let z = reparameterize_with_noise(&mu, &sigma, noise, m, d)?;
                LatentCode::new(m, d, mu, sigma, z)
            }
            None => {
                let sigma = DMatrix::from_element(x.nrows(), m, 1.0);
                LatentCode::new(m, d, mu.clone(), sigma, mu)
            }
        }
    }

    fn tc_value(&self, code: &LatentCode) -> Result<f64> {
        let k = self.dataset_size();
        let w = self.config.tc_weighting;
        match self.config.method {
            Method::BetaTcvae => Ok(tc_minibatch(code, k, w)?.value),
            Method::VecBetaTcvae => Ok(tc_per_dimension(code, k, w)?.value),
            Method::FactorVae | Method::VecFactorVae => {
                let disc = self.discriminator.as_ref().expect("discriminator present");
                discriminator_tc(&disc.spec, &disc.params, &code.z)
            }
            Method::Ae | Method::Vae => Err(Error::invalid("method has no total correlation term")),
        }
    }

    fn tc_with_grad(&self, code: &LatentCode) -> Result<(f64, CodeGradient)> {
        let k = self.dataset_size();
        let w = self.config.tc_weighting;
        match self.config.method {
            Method::BetaTcvae => tc_minibatch_with_grad(code, k, w).map(|(e, g)| (e.value, g)),
            Method::VecBetaTcvae => tc_per_dimension_with_grad(code, k, w).map(|(e, g)| (e.value, g)),
            Method::FactorVae | Method::VecFactorVae => {
                let disc = self.discriminator.as_ref().expect("discriminator present");
                let (v, dz) = discriminator_tc_with_grad(&disc.spec, &disc.params, &code.z)?;
                let mut g = CodeGradient::zeros(code);
                g.z = dz;
                Ok((v, g))
            }
            Method::Ae | Method::Vae => Err(Error::invalid("method has no total correlation term")),
        }
    }

    /// Generator objective on a batch with fixed noise, its gradient, and the
    /// latent code that was used.
    pub fn generator_loss(
        &self,
        x: &DMatrix<f64>,
        noise: &DMatrix<f64>,
    ) -> Result<(LossBreakdown, GeneratorGradients, LatentCode)> {
        let cfg = &self.config;
        let (m, d) = (cfg.m, cfg.d);
        let b = x.nrows() as f64;
        let (enc_out, enc_tape) = mlp_forward(&self.encoder.spec, &self.encoder.params, x)?;
        let (mu, scale) = self.split_encoder_output(&enc_out);
        let code = match &scale {
            Some((_, sigma)) => {
                let z = reparameterize_with_noise(&mu, sigma, noise, m, d)?;
                LatentCode::new(m, d, mu, sigma.clone(), z)?
            }
            None => {
                let sigma = DMatrix::from_element(x.nrows(), m, 1.0);
                LatentCode::new(m, d, mu.clone(), sigma, mu)?
            }
        };

        let (x_hat, dec_tape) = mlp_forward(&self.decoder.spec, &self.decoder.params, &code.z)?;
        let resid = &x_hat - x;
        let recon = 0.5 * resid.norm_squared() / b;
        let dec_grads = backprop_with_input(&self.decoder.spec, &self.decoder.params, &dec_tape, &(resid / b))?;
        let mut grad = CodeGradient::zeros(&code);
        grad.z = dec_grads.input.expect("input gradient requested");

        let mut breakdown = LossBreakdown {
            recon,
            ..Default::default()
        };
        if cfg.method.is_variational() {
            let (kl, kl_grad) = kl_vec_spherical_with_grad(&code, cfg.keep_kl_multiplier)?;
            breakdown.kl = kl;
            grad.add_scaled(&kl_grad, 1.0);
        }
        if cfg.method.has_tc() {
            if cfg.gamma > 0.0 {
                let (tc, tc_grad) = self.tc_with_grad(&code)?;
                breakdown.tc = Some(tc);
                grad.add_scaled(&tc_grad, cfg.gamma);
            } else {
                breakdown.tc = Some(self.tc_value(&code)?);
            }
        }
        breakdown.total = breakdown.recon + breakdown.kl + cfg.gamma * breakdown.tc.unwrap_or(0.0);

        let latent = cfg.latent_width();
        let mut upstream = DMatrix::zeros(enc_out.nrows(), enc_out.ncols());
        match &scale {
            Some((raw, _)) => {
                let (dmu, dsigma) = reparameterize_backward(&grad.z, noise, m, d);
                let dmu = dmu + &grad.mu;
                let dsigma = dsigma + &grad.sigma;
                upstream.columns_mut(0, latent).copy_from(&dmu);
                let draw = dsigma.zip_map(raw, |g, r| g * sigmoid(r));
                upstream.columns_mut(latent, m).copy_from(&draw);
            }
            None => {
                upstream.copy_from(&(&grad.z + &grad.mu));
            }
        }
        let enc_grads = backprop_with_input(&self.encoder.spec, &self.encoder.params, &enc_tape, &upstream)?;
        let grads = GeneratorGradients {
            encoder: enc_grads.params,
            decoder: dec_grads.params,
        };
        Ok((breakdown, grads, code))
    }

    /// One generator update followed, for discriminator methods, by one
    /// discriminator update on the detached code and its unit permutation.
    pub fn train_step(&mut self, x: &DMatrix<f64>, noise: &DMatrix<f64>, perm_rng: &mut RngStream) -> Result<LossBreakdown> {
        let step = self.step;
        let diverged = |e: Error| match e {
            Error::NonFinite(message) => Error::Diverged { step, message },
            other => other,
        };
        let (mut breakdown, mut grads, code) = self.generator_loss(x, noise).map_err(diverged)?;
        if !breakdown.total.is_finite() {
            return Err(Error::Diverged {
                step,
                message: format!("loss {}", breakdown.total),
            });
        }
        clip_grad_norm(&mut [&mut grads.encoder, &mut grads.decoder], self.config.clip_norm);
        self.enc_adam
            .update(&mut self.encoder.params.values, &grads.encoder)
            .map_err(diverged)?;
        self.dec_adam
            .update(&mut self.decoder.params.values, &grads.decoder)
            .map_err(diverged)?;

        if let (Some(disc), Some(adam)) = (self.discriminator.as_mut(), self.disc_adam.as_mut()) {
            let permuted = permute_units(&code.z, self.config.m, self.config.d, perm_rng)?;
            let (loss, mut g) = discriminator_loss(&disc.spec, &disc.params, &code.z, &permuted).map_err(diverged)?;
            clip_grad_norm(&mut [&mut g], self.config.clip_norm);
            adam.update(&mut disc.params.values, &g).map_err(diverged)?;
            breakdown.disc_loss = Some(loss.loss);
            breakdown.disc_acc = Some(loss.accuracy);
        }
        self.step += 1;
        Ok(breakdown)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut networks = vec![
            NamedNetwork {
                name: "encoder".into(),
                spec: self.encoder.spec.clone(),
                params: self.encoder.params.clone(),
            },
            NamedNetwork {
                name: "decoder".into(),
                spec: self.decoder.spec.clone(),
                params: self.decoder.params.clone(),
            },
        ];
        if let Some(disc) = &self.discriminator {
            networks.push(NamedNetwork {
                name: "discriminator".into(),
                spec: disc.spec.clone(),
                params: disc.params.clone(),
            });
        }
        Checkpoint {
            seed: self.config.seed,
            step: self.step as u64,
            networks,
        }
    }

    /// Restore trained weights into a model built from `config`. Optimiser
    /// state starts fresh.
    pub fn from_checkpoint(config: ModelConfig, d_x: usize, ck: &Checkpoint) -> Result<Self> {
        let mut model = Model::new(config, d_x)?;
        let restore = |name: &str, target: &mut Network| -> Result<()> {
            let n = ck
                .network(name)
                .ok_or_else(|| Error::Format(format!("checkpoint has no {name} network")))?;
            if n.spec.layer_widths != target.spec.layer_widths {
                return Err(Error::Format(format!("checkpoint {name} shape does not match the config")));
            }
            target.params = n.params.clone();
            Ok(())
        };
        restore("encoder", &mut model.encoder)?;
        restore("decoder", &mut model.decoder)?;
        if let Some(disc) = model.discriminator.as_mut() {
            restore("discriminator", disc)?;
        }
        model.step = ck.step as usize;
        Ok(model)
    }
}

/// Loss terms averaged over a logging window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub recon: f64,
    pub kl: f64,
    pub tc: Option<f64>,
    pub disc_acc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LogRow>,
}

#[derive(Default)]
struct Window {
    n: usize,
    recon: f64,
    kl: f64,
    tc: Option<f64>,
    disc_acc: Option<f64>,
}

impl Window {
    fn push(&mut self, b: &LossBreakdown) {
        self.n += 1;
        self.recon += b.recon;
        self.kl += b.kl;
        if let Some(t) = b.tc {
            *self.tc.get_or_insert(0.0) += t;
        }
        if let Some(a) = b.disc_acc {
            *self.disc_acc.get_or_insert(0.0) += a;
        }
    }

    fn flush(&mut self, step: usize) -> LogRow {
        let n = self.n.max(1) as f64;
        let row = LogRow {
            step,
            recon: self.recon / n,
            kl: self.kl / n,
            tc: self.tc.map(|t| t / n),
            disc_acc: self.disc_acc.map(|a| a / n),
        };
        *self = Window::default();
        row
    }
}

/// Train a fresh model on the training side of `dataset` for
/// `config.steps` steps, logging window means every `log_every` steps.
pub fn train(config: &ModelConfig, dataset: &Dataset, log_every: usize) -> Result<TrainOutcome> {
    let mut config = config.clone();
    if config.dataset_size == 0 {
        config.dataset_size = dataset.split.train.len();
    }
    let mut model = Model::new(config.clone(), dataset.renderer.d_x())?;
    let root = RngStream::new(config.seed).child("train");
    let mut batch_rng = root.child("batch");
    let mut noise_rng = root.child("noise");
    let mut perm_rng = root.child("permute");
    let mut log = Vec::new();
    let mut window = Window::default();
    let log_every = log_every.max(1);
    for step in 0..config.steps {
        let batch = sample_batch(&dataset.renderer, &dataset.split, Side::Train, config.batch, &mut batch_rng)?;
        let noise = standard_normal_matrix(config.batch, config.latent_width(), &mut noise_rng);
        let b = model.train_step(&batch.observations, &noise, &mut perm_rng)?;
        window.push(&b);
        if (step + 1) % log_every == 0 || step + 1 == config.steps {
            log.push(window.flush(step + 1));
        }
    }
    Ok(TrainOutcome { model, log })
}
