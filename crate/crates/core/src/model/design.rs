//! Covariate construction: the annual harmonic pair, the year index and
//! elevation, with the centering/scaling record used to map posterior draws
//! back to original units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dataset::{PanelDataset, SiteMeta};
use crate::error::{Error, Result};

/// `sin(2π(ℓ + offset)/365)` and `cos(…)` for `ℓ = 1..=L`, uncentered.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasis {
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl HarmonicBasis {
    pub fn new(n_days: usize, day_of_year_offset: u32) -> Self {
        let arg = |l: usize| 2.0 * PI * (l as f64 + day_of_year_offset as f64) / 365.0;
        Self {
            sin: (1..=n_days).map(|l| arg(l).sin()).collect(),
            cos: (1..=n_days).map(|l| arg(l).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub center: f64,
    pub scale: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        center: 0.0,
        scale: 1.0,
    };

    fn standardize(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let center = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - center).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        // A constant covariate keeps unit scale; it is then identically zero.
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { center, scale }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }
}

/// Centering and scaling applied to each covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateScaling {
    pub time: Affine,
    pub sin: Affine,
    pub cos: Affine,
    pub elev: Affine,
}

impl CovariateScaling {
    pub const IDENTITY: CovariateScaling = CovariateScaling {
        time: Affine::IDENTITY,
        sin: Affine::IDENTITY,
        cos: Affine::IDENTITY,
        elev: Affine::IDENTITY,
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Model-scale offset contributed by the centering of the fixed effects:
    /// the constant that moves from `μ` into the intercept when the design is
    /// uncentered.
    fn centering_offset(&self, beta1: f64, beta2: f64, beta3: f64) -> f64 {
        beta1 * self.sin.center / self.sin.scale
            + beta2 * self.cos.center / self.cos.scale
            + beta3 * self.elev.center / self.elev.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScalingPolicy {
    /// Center each covariate and divide by its sample standard deviation.
    #[default]
    Standardize,
    /// Use raw covariates.
    Identity,
}

pub fn build_design(
    dataset: &PanelDataset,
    policy: ScalingPolicy,
) -> Result<(HarmonicBasis, CovariateScaling)> {
    build_design_dims(
        dataset.n_years(),
        dataset.n_days(),
        dataset.sites(),
        dataset.day_of_year_offset,
        policy,
    )
}

pub(crate) fn build_design_dims(
    n_years: usize,
    n_days: usize,
    sites: &[SiteMeta],
    day_of_year_offset: u32,
    policy: ScalingPolicy,
) -> Result<(HarmonicBasis, CovariateScaling)> {
    if n_years == 0 || n_days == 0 {
        return Err(Error::EmptyPanel(format!("T={n_years}, L={n_days}")));
    }
    let basis = HarmonicBasis::new(n_days, day_of_year_offset);
    let scaling = match policy {
        ScalingPolicy::Identity => CovariateScaling::IDENTITY,
        ScalingPolicy::Standardize => {
            let years: Vec<f64> = (1..=n_years).map(|t| t as f64).collect();
            let elev: Vec<f64> = sites.iter().map(|s| s.elevation).collect();
            CovariateScaling {
                time: Affine::standardize(&years),
                sin: Affine::standardize(&basis.sin),
                cos: Affine::standardize(&basis.cos),
                elev: Affine::standardize(&elev),
            }
        }
    };
    Ok((basis, scaling))
}

/// Covariates on the model scale, as the sampler consumes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Scaled year covariate `τ_t`, `t = 1..=T`.
    pub time: Vec<f64>,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
    pub elev: Vec<f64>,
    pub scaling: CovariateScaling,
}

impl Design {
    pub fn new(dataset: &PanelDataset, policy: ScalingPolicy) -> Result<Self> {
        let (basis, scaling) = build_design(dataset, policy)?;
        Ok(Self::from_parts(
            dataset.n_years(),
            &basis,
            dataset.sites(),
            scaling,
        ))
    }

    pub fn from_parts(
        n_years: usize,
        basis: &HarmonicBasis,
        sites: &[SiteMeta],
        scaling: CovariateScaling,
    ) -> Self {
        Self {
            time: (1..=n_years)
                .map(|t| scaling.time.apply(t as f64))
                .collect(),
            sin: basis.sin.iter().map(|&v| scaling.sin.apply(v)).collect(),
            cos: basis.cos.iter().map(|&v| scaling.cos.apply(v)).collect(),
            elev: sites
                .iter()
                .map(|s| scaling.elev.apply(s.elevation))
                .collect(),
            scaling,
        }
    }
}

/// Which unit system a set of posterior draws is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Units {
    /// Coefficients of the centered/scaled design.
    #[default]
    Model,
    /// Coefficients of the raw covariates (°C per year, per metre, …).
    Original,
}

/// Maps one model-scale state into original covariate units.
pub fn rescale_state(state: &super::ModelState, scaling: &CovariateScaling) -> super::ModelState {
    let mut out = state.clone();
    let st = scaling.time;
    let f = &state.fixed;
    let offset = scaling.centering_offset(f.beta1, f.beta2, f.beta3);

    out.fixed.alpha = f.alpha / st.scale;
    out.fixed.beta1 = f.beta1 / scaling.sin.scale;
    out.fixed.beta2 = f.beta2 / scaling.cos.scale;
    out.fixed.beta3 = f.beta3 / scaling.elev.scale;
    out.fixed.beta0 = f.beta0 - f.alpha * st.center / st.scale - offset;

    for (i, (b0, a)) in out
        .sites
        .beta0_tilde
        .iter_mut()
        .zip(out.sites.alpha_tilde.iter_mut())
        .enumerate()
    {
        let slope = state.sites.alpha_tilde[i];
        *b0 = state.sites.beta0_tilde[i] - slope * st.center / st.scale - offset;
        *a = slope / st.scale;
    }
    for g in out.temporal.gamma.iter_mut() {
        *g -= offset;
    }
    out.hyper.sigma2_alpha = state.hyper.sigma2_alpha / (st.scale * st.scale);
    out
}

/// Back-transforms every draw of `draws` to original covariate units.
pub fn rescale_posterior(
    mut draws: crate::gibbs::ChainOutput,
    scaling: &CovariateScaling,
) -> Result<crate::gibbs::ChainOutput> {
    if draws.units == Units::Original {
        return Err(Error::AlreadyRescaled);
    }
    for d in draws.draws.iter_mut() {
        *d = rescale_state(d, scaling);
    }
    draws.units = Units::Original;
    Ok(draws)
}
