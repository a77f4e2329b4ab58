//! Independent per-site model: one site, no spatial processes, raw
//! covariates and i.i.d. year effects. It is the full model's sampler run
//! with `I = 1` and every spatial block disabled; the engine's site-year
//! effect plays the role of `β0 + α t + ψ_t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{run_chain, ChainConfig, ChainOutput, FitContext};
use crate::model::{
    rescale_posterior, Design, GpField, HyperPriors, ModelState, ModelVariant, PanelDataset,
    ScalingPolicy, SiteSeries, Units,
};
use crate::stats::quantile;

/// The variant the local model runs as.
pub fn local_variant() -> ModelVariant {
    ModelVariant {
        year_effects: false,
        elevation_effect: false,
        ..ModelVariant::none()
    }
}

/// Parameters of the local model for one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalState {
    pub beta0: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho_y: f64,
    pub sigma2_lambda: f64,
    pub sigma2_eps: f64,
    pub psi: Vec<f64>,
}

impl LocalState {
    /// Reads a local-model draw out of an engine state fitted on raw
    /// covariates.
    pub fn from_engine(state: &ModelState, design: &Design) -> Self {
        let f = &state.fixed;
        let psi = (0..state.n_years())
            .map(|t| state.temporal.gamma(t, 0) - f.beta0 - f.alpha * design.time[t])
            .collect();
        Self {
            beta0: f.beta0,
            alpha: f.alpha,
            beta1: f.beta1,
            beta2: f.beta2,
            rho_y: state.sites.rho(0),
            sigma2_lambda: state.hyper.sigma2_eta,
            sigma2_eps: state.sites.sig2(0),
            psi,
        }
    }

    /// Named scalars in a fixed order.
    pub fn scalars(&self) -> [(&'static str, f64); 7] {
        [
            ("beta0", self.beta0),
            ("alpha", self.alpha),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("rho_y", self.rho_y),
            ("sigma2_lambda", self.sigma2_lambda),
            ("sigma2_eps", self.sigma2_eps),
        ]
    }
}

/// Context of the local model for one complete series.
pub fn local_context(
    series: &SiteSeries,
    first_year: i32,
    day_of_year_offset: u32,
    priors: HyperPriors,
) -> Result<FitContext> {
    let data = PanelDataset::new(
        vec![series.site.clone()],
        series.n_years,
        series.n_days,
        series.values.clone(),
        first_year,
        day_of_year_offset,
    )?;
    FitContext::new(&data, priors, local_variant(), ScalingPolicy::Identity)
}

/// Fits the local model to one site's complete series.
pub fn fit_local(
    series: &SiteSeries,
    first_year: i32,
    day_of_year_offset: u32,
    priors: &HyperPriors,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    let ctx = local_context(series, first_year, day_of_year_offset, priors.clone())?;
    run_chain(&ctx, cfg, 0)
}

/// Local fits of every site of a panel, in site order.
pub fn fit_local_all(
    data: &PanelDataset,
    priors: &HyperPriors,
    cfg: &ChainConfig,
) -> Result<Vec<ChainOutput>> {
    (0..data.n_sites())
        .into_par_iter()
        .map(|i| {
            fit_local(
                &data.site_series(i),
                data.first_year,
                data.day_of_year_offset,
                priors,
                cfg,
            )
        })
        .collect()
}

pub fn local_draws(out: &ChainOutput) -> Vec<LocalState> {
    let design = out.design();
    out.draws
        .iter()
        .map(|d| LocalState::from_engine(d, &design))
        .collect()
}

/// Overlap of two intervals as a fraction of the shorter one; two equal
/// points overlap fully.
pub fn interval_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let shorter = (a.1 - a.0).min(b.1 - b.0);
    if shorter > 0.0 {
        (inter / shorter).min(1.0)
    } else if a.0.max(b.0) <= a.1.min(b.1) {
        1.0
    } else {
        0.0
    }
}

fn interval90(xs: &[f64]) -> (f64, f64) {
    (quantile(xs, 0.05), quantile(xs, 0.95))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub site: String,
    pub alpha: f64,
    pub rho_y: f64,
    pub sigma_eps: f64,
}

/// Per site, the overlap of the 90% intervals of the local and full
/// posteriors of the trend, the autocorrelation and the noise sd. The
/// intercept is not compared.
pub fn compare_local_vs_full(
    local: &[ChainOutput],
    full: &[ChainOutput],
) -> Result<Vec<OverlapRow>> {
    let first = full
        .first()
        .ok_or_else(|| Error::InvalidConfig("no full-model chains".into()))?;
    let full: Vec<ChainOutput> = full
        .iter()
        .map(|c| match c.units {
            Units::Model => rescale_posterior(c.clone(), &c.scaling),
            Units::Original => Ok(c.clone()),
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(local.len());
    for lo in local {
        let site = lo
            .sites
            .first()
            .ok_or_else(|| Error::InvalidConfig("local fit without a site".into()))?;
        let i = first
            .sites
            .iter()
            .position(|s| s.id == site.id)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("site {} is not in the full model", site.id))
            })?;
        let ls = local_draws(lo);
        let pick_full = |g: &dyn Fn(&ModelState) -> f64| -> Vec<f64> {
            full.iter().flat_map(|c| c.draws.iter().map(g)).collect()
        };
        let fa = pick_full(&|d| d.field(GpField::Alpha)[i]);
        let fr = pick_full(&|d| d.sites.rho(i));
        let fs = pick_full(&|d| d.sites.sig2(i).sqrt());
        let la: Vec<f64> = ls.iter().map(|s| s.alpha).collect();
        let lr: Vec<f64> = ls.iter().map(|s| s.rho_y).collect();
        let lsd: Vec<f64> = ls.iter().map(|s| s.sigma2_eps.sqrt()).collect();
        rows.push(OverlapRow {
            site: site.id.clone(),
            alpha: interval_overlap(interval90(&la), interval90(&fa)),
            rho_y: interval_overlap(interval90(&lr), interval90(&fr)),
            sigma_eps: interval_overlap(interval90(&lsd), interval90(&fs)),
        });
    }
    Ok(rows)
}
