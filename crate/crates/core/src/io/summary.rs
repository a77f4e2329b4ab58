use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::ChainOutput;
use crate::local::local_draws;
use crate::model::{rescale_posterior, rho_from_z, GpField, ModelState, ModelVariant, Units};
use crate::stats::{mean, quantile_sorted};

/// Parameters in the published summary layout, as standard deviations where
/// the published table reports them. `state` must be in original units.
pub fn reported_scalars(state: &ModelState, variant: &ModelVariant) -> Vec<(&'static str, f64)> {
    let f = &state.fixed;
    let h = &state.hyper;
    let mut out = vec![
        ("beta0", f.beta0),
        ("alpha", f.alpha),
        ("beta1", f.beta1),
        ("beta2", f.beta2),
    ];
    if variant.elevation_effect {
        out.push(("beta3", f.beta3));
    }
    out.push(("rho_y", rho_from_z(h.z_rho)));
    out.push(("sigma_eps", (0.5 * h.z_sig2).exp()));
    out.push(("sigma_eta", h.sigma2_eta.sqrt()));
    if variant.year_effects {
        out.push(("sigma_lambda", h.sigma2_lambda.sqrt()));
        if !variant.pin_rho_psi_zero {
            out.push(("rho_psi", h.rho_psi));
        }
    }
    let sds = [
        ("sigma_beta0", GpField::Beta0),
        ("sigma_alpha", GpField::Alpha),
        ("sigma_rho", GpField::Rho),
        ("sigma_sig2", GpField::Sig2),
    ];
    for (name, fld) in sds {
        if variant.has_gp(fld) {
            out.push((name, state.field_variance(fld).sqrt()));
        }
    }
    let phis = [
        ("phi_beta0", GpField::Beta0),
        ("phi_alpha", GpField::Alpha),
        ("phi_rho", GpField::Rho),
        ("phi_sig2", GpField::Sig2),
    ];
    for (name, fld) in phis {
        if variant.has_gp(fld) {
            out.push((name, state.field_phi(fld)));
        }
    }
    out
}

/// Posterior mean and 90% equal-tailed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub param: String,
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
}

impl ParamSummary {
    pub fn of(param: impl Into<String>, xs: &[f64]) -> Self {
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            param: param.into(),
            mean: mean(xs),
            q05: quantile_sorted(&s, 0.05),
            q95: quantile_sorted(&s, 0.95),
        }
    }

    pub fn covers(&self, x: f64) -> bool {
        self.q05 <= x && x <= self.q95
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub variant: String,
    pub chains: usize,
    pub draws: usize,
    pub params: Vec<ParamSummary>,
    /// Per-site deviations of the intercept from its global value, site
    /// trends, autocorrelations and noise standard deviations.
    pub sites: Vec<ParamSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params
            .iter()
            .chain(&self.sites)
            .find(|p| p.param == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Summary of pooled chains in original units.
pub fn summarize(chains: &[ChainOutput]) -> Result<PosteriorSummary> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidConfig("no chains to summarize".into()))?;
    let orig: Vec<ChainOutput> = chains
        .iter()
        .map(|c| match c.units {
            Units::Model => rescale_posterior(c.clone(), &c.scaling),
            Units::Original => Ok(c.clone()),
        })
        .collect::<Result<_>>()?;
    let draws: Vec<&ModelState> = orig.iter().flat_map(|c| c.draws.iter()).collect();
    if draws.is_empty() {
        return Err(Error::InsufficientDraws {
            required: 1,
            available: 0,
        });
    }
    let v = first.variant;
    let names: Vec<&str> = reported_scalars(draws[0], &v)
        .into_iter()
        .map(|p| p.0)
        .collect();
    let rows: Vec<Vec<(&str, f64)>> = draws.iter().map(|d| reported_scalars(d, &v)).collect();
    let params = names
        .iter()
        .enumerate()
        .map(|(k, n)| ParamSummary::of(*n, &rows.iter().map(|r| r[k].1).collect::<Vec<_>>()))
        .collect();
    let mut sites = Vec::new();
    for (i, s) in first.sites.iter().enumerate() {
        let col = |g: &dyn Fn(&ModelState) -> f64| draws.iter().map(|d| g(d)).collect::<Vec<_>>();
        sites.push(ParamSummary::of(
            format!("beta0_dev[{}]", s.id),
            &col(&|d| d.sites.beta0_tilde[i] - d.fixed.beta0),
        ));
        sites.push(ParamSummary::of(
            format!("alpha[{}]", s.id),
            &col(&|d| d.sites.alpha_tilde[i]),
        ));
        sites.push(ParamSummary::of(
            format!("rho_y[{}]", s.id),
            &col(&|d| d.sites.rho(i)),
        ));
        sites.push(ParamSummary::of(
            format!("sigma_eps[{}]", s.id),
            &col(&|d| d.sites.sig2(i).sqrt()),
        ));
    }
    Ok(PosteriorSummary {
        variant: v.label(),
        chains: chains.len(),
        draws: draws.len(),
        params,
        sites,
    })
}

/// Posterior summary of a local fit, with parameter names suffixed by the
/// site id.
pub fn local_summary(out: &ChainOutput) -> Result<Vec<ParamSummary>> {
    let site = out
        .sites
        .first()
        .ok_or_else(|| Error::InvalidConfig("local fit without a site".into()))?;
    let ls = local_draws(out);
    if ls.is_empty() {
        return Err(Error::InsufficientDraws {
            required: 1,
            available: 0,
        });
    }
    let names: Vec<&str> = ls[0].scalars().iter().map(|p| p.0).collect();
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let xs: Vec<f64> = ls.iter().map(|s| s.scalars()[k].1).collect();
            ParamSummary::of(format!("{n}[{}]", site.id), &xs)
        })
        .collect())
}

/// CSV with header `param,mean,q05,q95`.
pub fn write_param_csv<W: Write>(out: W, rows: &[ParamSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "mean", "q05", "q95"])?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            r.mean.to_string(),
            r.q05.to_string(),
            r.q95.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
