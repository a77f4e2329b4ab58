use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::SiteFormat;
use crate::error::{Error, Result};
use crate::gibbs::ChainConfig;
use crate::model::{
    HyperPriors, InverseGammaPrior, ModelVariant, NormalPrior, PhiPrior, ScalingPolicy,
};

/// Settings of a fit, read from a flat TOML file and overridable from the
/// command line. Defaults follow the published protocol: 10 chains of
/// 200,000 iterations with the first 100,000 discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_window: usize,
    /// `M0`, `M4` or `Mn:field,...` with fields from beta0, alpha, rho,
    /// sigma.
    pub variant: String,
    /// Sample the autocorrelation of the yearly effects instead of holding
    /// it at zero.
    pub rho_psi_free: bool,
    pub day_of_year_offset: u32,
    /// `fixed`, `fixed:<value>` or `grid:<n>`.
    pub phi: String,
    pub scaling: ScalingPolicy,
    /// Standard deviation of the normal priors on the fixed effects.
    pub prior_fixed_sd: f64,
    /// Standard deviation of the normal prior on the log noise variance.
    pub prior_log_sig2_sd: f64,
    /// Inverse-gamma shape and rate for every variance.
    pub prior_ig_shape: f64,
    pub prior_ig_rate: f64,
    pub site_format: SiteFormat,
    /// Fit only the sites with complete series.
    pub drop_incomplete: bool,
    pub sites: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = HyperPriors::default();
        Self {
            chains: 10,
            iterations: 200_000,
            burn_in: 100_000,
            thin: 100,
            seed: 1,
            adapt_window: 100,
            variant: "M4".into(),
            rho_psi_free: false,
            day_of_year_offset: 0,
            phi: "fixed".into(),
            scaling: ScalingPolicy::Standardize,
            prior_fixed_sd: p.beta0.var.sqrt(),
            prior_log_sig2_sd: p.z_sig2.var.sqrt(),
            prior_ig_shape: p.sigma2_eta.shape,
            prior_ig_rate: p.sigma2_eta.rate,
            site_format: SiteFormat::Planar,
            drop_incomplete: false,
            sites: None,
            observations: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chains must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        self.model_variant()?;
        self.priors()?.validate()
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            adapt_window: self.adapt_window,
        }
    }

    pub fn model_variant(&self) -> Result<ModelVariant> {
        let mut v: ModelVariant = self.variant.parse()?;
        v.pin_rho_psi_zero = !self.rho_psi_free;
        Ok(v)
    }

    pub fn phi_prior(&self) -> Result<PhiPrior> {
        let bad = || {
            Error::InvalidConfig(format!(
                "phi `{}`: expected fixed, fixed:<v> or grid:<n>",
                self.phi
            ))
        };
        let s = self.phi.trim();
        if s == "fixed" {
            return Ok(PhiPrior::Fixed(None));
        }
        match s.split_once(':') {
            Some(("fixed", v)) => {
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                if !(v > 0.0) {
                    return Err(bad());
                }
                Ok(PhiPrior::Fixed(Some(v)))
            }
            Some(("grid", n)) => {
                let n: usize = n.trim().parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                Ok(PhiPrior::AutoGrid(n))
            }
            _ => Err(bad()),
        }
    }

    pub fn priors(&self) -> Result<HyperPriors> {
        let normal = NormalPrior::new(0.0, self.prior_fixed_sd);
        let ig = InverseGammaPrior::new(self.prior_ig_shape, self.prior_ig_rate);
        let p = HyperPriors {
            beta0: normal,
            alpha: normal,
            beta1: normal,
            beta2: normal,
            beta3: normal,
            z_rho: normal,
            z_sig2: NormalPrior::new(0.0, self.prior_log_sig2_sd),
            sigma2_lambda: ig,
            sigma2_eta: ig,
            sigma2_beta0: ig,
            sigma2_alpha: ig,
            sigma2_rho: ig,
            sigma2_sig2: ig,
            ..HyperPriors::default()
        };
        let p = p.with_phi(self.phi_prior()?);
        p.validate()?;
        Ok(p)
    }
}
