use serde::{Deserialize, Serialize};

use super::dataset::SiteMeta;
use super::state::GpField;
use crate::error::{Error, Result};
use crate::spatial::default_phi;
use crate::stats::{inverse_gamma_ln_pdf, normal_ln_pdf};

/// `N(mean, var)`; an infinite variance is a flat (improper) prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, sd: f64) -> Self {
        Self { mean, var: sd * sd }
    }

    pub fn flat() -> Self {
        Self {
            mean: 0.0,
            var: f64::INFINITY,
        }
    }

    pub fn precision(&self) -> f64 {
        if self.var.is_infinite() {
            0.0
        } else {
            1.0 / self.var
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.var.is_infinite() {
            0.0
        } else {
            normal_ln_pdf(x, self.mean, self.var)
        }
    }
}

/// Inverse-Gamma(shape, rate): the precision is Gamma(shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl InverseGammaPrior {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn ln_pdf(&self, v: f64) -> f64 {
        inverse_gamma_ln_pdf(v, self.shape, self.rate)
    }

    /// Prior mean when it exists, the mode otherwise.
    pub fn center(&self) -> f64 {
        if self.shape > 1.0 {
            self.rate / (self.shape - 1.0)
        } else {
            self.rate / (self.shape + 1.0)
        }
    }
}

/// Prior on a spatial decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhiPrior {
    /// Held fixed; `None` means `3 / d_max` of the fitted sites.
    Fixed(Option<f64>),
    /// Discrete uniform over the listed values.
    Grid(Vec<f64>),
    /// `n` geometrically spaced values from `3/d_max` to `30/d_max`.
    AutoGrid(usize),
}

/// A decay prior made concrete for one set of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSupport {
    pub values: Vec<f64>,
    pub fixed: bool,
}

impl PhiPrior {
    pub fn resolve(&self, sites: &[SiteMeta]) -> Result<PhiSupport> {
        let base = || -> Result<f64> {
            if sites.len() < 2 {
                // a single site has no spatial scale; any positive decay works
                Ok(1.0)
            } else {
                default_phi(sites)
            }
        };
        Ok(match self {
            PhiPrior::Fixed(v) => PhiSupport {
                values: vec![match v {
                    Some(v) => *v,
                    None => base()?,
                }],
                fixed: true,
            },
            PhiPrior::Grid(v) => PhiSupport {
                values: v.clone(),
                fixed: false,
            },
            PhiPrior::AutoGrid(n) => {
                let lo = base()?;
                let n = *n;
                let values = if n == 1 {
                    vec![lo]
                } else {
                    (0..n)
                        .map(|k| lo * 10f64.powf(k as f64 / (n - 1) as f64))
                        .collect()
                };
                PhiSupport {
                    values,
                    fixed: false,
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub beta0: NormalPrior,
    pub alpha: NormalPrior,
    pub beta1: NormalPrior,
    pub beta2: NormalPrior,
    pub beta3: NormalPrior,
    pub z_rho: NormalPrior,
    pub z_sig2: NormalPrior,
    pub sigma2_lambda: InverseGammaPrior,
    pub sigma2_eta: InverseGammaPrior,
    pub sigma2_beta0: InverseGammaPrior,
    pub sigma2_alpha: InverseGammaPrior,
    pub sigma2_rho: InverseGammaPrior,
    pub sigma2_sig2: InverseGammaPrior,
    /// Truncation interval of `ρψ`.
    pub rho_psi_bounds: (f64, f64),
    /// Decay priors indexed by [`GpField::index`].
    pub phi: [PhiPrior; 4],
}

impl Default for HyperPriors {
    /// Diffuse defaults: N(0, 100²) on the coefficients and `Z_ρY`,
    /// N(0, 1) on `Z_σε²`, IG(2, 1) on every variance, `ρψ ∈ (−1, 1)` and
    /// decays fixed at `3 / d_max`.
    fn default() -> Self {
        let coef = NormalPrior::new(0.0, 100.0);
        let ig = InverseGammaPrior::new(2.0, 1.0);
        Self {
            beta0: coef,
            alpha: coef,
            beta1: coef,
            beta2: coef,
            beta3: coef,
            z_rho: coef,
            z_sig2: NormalPrior::new(0.0, 1.0),
            sigma2_lambda: ig,
            sigma2_eta: ig,
            sigma2_beta0: ig,
            sigma2_alpha: ig,
            sigma2_rho: ig,
            sigma2_sig2: ig,
            rho_psi_bounds: (-1.0, 1.0),
            phi: [
                PhiPrior::Fixed(None),
                PhiPrior::Fixed(None),
                PhiPrior::Fixed(None),
                PhiPrior::Fixed(None),
            ],
        }
    }
}

impl HyperPriors {
    pub fn with_phi(mut self, phi: PhiPrior) -> Self {
        self.phi = [phi.clone(), phi.clone(), phi.clone(), phi];
        self
    }

    pub fn phi_prior(&self, f: GpField) -> &PhiPrior {
        &self.phi[f.index()]
    }

    pub fn field_mean_prior(&self, f: GpField) -> &NormalPrior {
        match f {
            GpField::Beta0 => &self.beta0,
            GpField::Alpha => &self.alpha,
            GpField::Rho => &self.z_rho,
            GpField::Sig2 => &self.z_sig2,
        }
    }

    pub fn field_variance_prior(&self, f: GpField) -> &InverseGammaPrior {
        match f {
            GpField::Beta0 => &self.sigma2_beta0,
            GpField::Alpha => &self.sigma2_alpha,
            GpField::Rho => &self.sigma2_rho,
            GpField::Sig2 => &self.sigma2_sig2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let normals = [
            ("beta0", self.beta0),
            ("alpha", self.alpha),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("z_rho", self.z_rho),
            ("z_sig2", self.z_sig2),
        ];
        for (n, p) in normals {
            if !(p.var > 0.0) || !p.mean.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "prior on {n} needs finite mean and positive variance"
                )));
            }
        }
        let igs = [
            ("sigma2_lambda", self.sigma2_lambda),
            ("sigma2_eta", self.sigma2_eta),
            ("sigma2_beta0", self.sigma2_beta0),
            ("sigma2_alpha", self.sigma2_alpha),
            ("sigma2_rho", self.sigma2_rho),
            ("sigma2_sig2", self.sigma2_sig2),
        ];
        for (n, p) in igs {
            if !(p.shape > 0.0 && p.rate > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "inverse-gamma prior on {n} needs positive shape and rate"
                )));
            }
        }
        let (a, b) = self.rho_psi_bounds;
        if !(a < b && a >= -1.0 && b <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho_psi bounds ({a}, {b}) must satisfy -1 <= a < b <= 1"
            )));
        }
        for p in &self.phi {
            match p {
                PhiPrior::Fixed(Some(v)) if !(*v > 0.0) => {
                    return Err(Error::InvalidConfig("fixed decay must be positive".into()))
                }
                PhiPrior::Grid(v) if v.is_empty() || v.iter().any(|x| !(*x > 0.0)) => {
                    return Err(Error::InvalidConfig(
                        "decay grid must be nonempty and positive".into(),
                    ))
                }
                PhiPrior::AutoGrid(0) => {
                    return Err(Error::InvalidConfig("decay grid size must be >= 1".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        HyperPriors::default().validate().unwrap();
    }

    #[test]
    fn invalid_priors_rejected() {
        let p = HyperPriors {
            rho_psi_bounds: (0.5, 0.2),
            ..HyperPriors::default()
        };
        assert!(p.validate().is_err());
        let p = HyperPriors::default().with_phi(PhiPrior::Grid(vec![]));
        assert!(p.validate().is_err());
        let mut p = HyperPriors::default();
        p.sigma2_eta.shape = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn auto_grid_spans_a_decade() {
        let sites = vec![
            SiteMeta::new("a", 0.0, 0.0, 0.0),
            SiteMeta::new("b", 100.0, 0.0, 0.0),
        ];
        let g = PhiPrior::AutoGrid(5).resolve(&sites).unwrap();
        assert_eq!(g.values.len(), 5);
        assert!((g.values[0] - 0.03).abs() < 1e-15);
        assert!((g.values[4] - 0.3).abs() < 1e-12);
        assert!(!g.fixed);
    }
}
