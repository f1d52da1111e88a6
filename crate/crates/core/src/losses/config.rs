use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ae,
    Vae,
    BetaTcvae,
    FactorVae,
    VecBetaTcvae,
    VecFactorVae,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ae,
        Method::Vae,
        Method::BetaTcvae,
        Method::FactorVae,
        Method::VecBetaTcvae,
        Method::VecFactorVae,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ae => "ae",
            Method::Vae => "vae",
            Method::BetaTcvae => "beta_tcvae",
            Method::FactorVae => "factor_vae",
            Method::VecBetaTcvae => "vec_beta_tcvae",
            Method::VecFactorVae => "vec_factor_vae",
        }
    }

    /// Vector methods accept any `D ≥ 1`; the rest require `D = 1`.
    pub fn is_vector(self) -> bool {
        matches!(self, Method::VecBetaTcvae | Method::VecFactorVae)
    }

    pub fn is_variational(self) -> bool {
        self != Method::Ae
    }

    pub fn has_tc(self) -> bool {
        matches!(
            self,
            Method::BetaTcvae | Method::FactorVae | Method::VecBetaTcvae | Method::VecFactorVae
        )
    }

    pub fn has_discriminator(self) -> bool {
        matches!(self, Method::FactorVae | Method::VecFactorVae)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Importance weights of the minibatch estimate of `q(z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcWeighting {
    /// The own sample gets weight `1/K`, each other batch member
    /// `(K-1)/(K(M-1))`; weights sum to one.
    Stratified,
    /// Every batch member gets weight `1/(MK)`.
    Verbatim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub method: Method,
    /// Number of latent units.
    pub m: usize,
    /// Vector size of each unit.
    pub d: usize,
    pub gamma: f64,
    pub seed: u64,
    pub steps: usize,
    pub batch: usize,
    /// Dataset size `K` used by the minibatch TC estimator. Zero means the
    /// number of training combinations.
    pub dataset_size: usize,
    pub lr: f64,
    pub disc_lr: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub disc_hidden_width: usize,
    pub disc_hidden_layers: usize,
    /// Multiply the KL term by `D`.
    pub keep_kl_multiplier: bool,
    pub tc_weighting: TcWeighting,
    pub clip_norm: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            method: Method::Vae,
            m: 10,
            d: 1,
            gamma: 0.0,
            seed: 0,
            steps: 20_000,
            batch: 32,
            dataset_size: 0,
            lr: 1e-4,
            disc_lr: 1e-4,
            hidden_width: 256,
            hidden_layers: 2,
            disc_hidden_width: 128,
            disc_hidden_layers: 3,
            keep_kl_multiplier: false,
            tc_weighting: TcWeighting::Stratified,
            clip_norm: 100.0,
        }
    }
}

impl ModelConfig {
    pub fn new(method: Method, d: usize, gamma: f64, seed: u64) -> Self {
        ModelConfig {
            method,
            d,
            gamma,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(Error::Config("m and d must be at least 1".into()));
        }
        if !self.method.is_vector() && self.d != 1 {
            return Err(Error::Config(format!("{} requires d = 1, got {}", self.method, self.d)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if self.batch < 2 {
            return Err(Error::Config("batch must be at least 2".into()));
        }
        if !(self.lr > 0.0 && self.disc_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.hidden_width == 0 || self.disc_hidden_width == 0 {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn latent_width(&self) -> usize {
        self.m * self.d
    }
}
