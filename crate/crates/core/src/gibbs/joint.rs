use super::FitContext;
use crate::error::Result;
use crate::model::{GpField, ModelState};
use crate::spatial::mvn_logpdf_centered;
use crate::stats::normal_ln_pdf;

/// Log of the joint density of data (days `ℓ ≥ 2`, conditional on day 1),
/// processes and parameters, up to the constant of the uniform decay and
/// `ρψ` priors.
pub fn log_joint(ctx: &FitContext, state: &ModelState) -> Result<f64> {
    let v = &ctx.variant;
    let d = &ctx.design;
    let f = &state.fixed;
    let s = &state.sites;
    let h = &state.hyper;
    let mut lp = 0.0;

    for i in 0..ctx.n_sites {
        let rho = s.rho(i);
        let sig2 = s.sig2(i);
        for t in 0..ctx.n_years {
            let g = state.temporal.gamma(t, i);
            let x = |l: usize| {
                ctx.y(i, t, l) - (f.beta1 * d.sin[l] + f.beta2 * d.cos[l] + f.beta3 * d.elev[i]) - g
            };
            for l in 1..ctx.n_days {
                lp += normal_ln_pdf(x(l) - rho * x(l - 1), 0.0, sig2);
            }
        }
    }

    for t in 0..ctx.n_years {
        for i in 0..ctx.n_sites {
            let m = s.beta0_tilde[i] + s.alpha_tilde[i] * d.time[t] + state.temporal.psi[t];
            lp += normal_ln_pdf(state.temporal.gamma(t, i), m, h.sigma2_eta);
        }
    }

    if v.year_effects {
        let psi = &state.temporal.psi;
        for t in 1..psi.len() {
            lp += normal_ln_pdf(psi[t], h.rho_psi * psi[t - 1], h.sigma2_lambda);
        }
        lp += ctx.priors.sigma2_lambda.ln_pdf(h.sigma2_lambda);
        if !v.pin_rho_psi_zero {
            let (a, b) = ctx.priors.rho_psi_bounds;
            if !(h.rho_psi > a && h.rho_psi < b) {
                return Ok(f64::NEG_INFINITY);
            }
        }
    }

    for field in GpField::ALL {
        if v.has_gp(field) {
            let r = ctx.correlation(field, state.field_phi(field))?;
            lp += mvn_logpdf_centered(
                state.field(field),
                state.field_mean(field),
                state.field_variance(field),
                r,
            )?;
            lp += ctx
                .priors
                .field_variance_prior(field)
                .ln_pdf(state.field_variance(field));
        }
    }

    let p = &ctx.priors;
    lp += p.beta0.ln_pdf(f.beta0) + p.alpha.ln_pdf(f.alpha);
    lp += p.beta1.ln_pdf(f.beta1) + p.beta2.ln_pdf(f.beta2);
    if v.elevation_effect {
        lp += p.beta3.ln_pdf(f.beta3);
    }
    lp += p.z_rho.ln_pdf(h.z_rho) + p.z_sig2.ln_pdf(h.z_sig2);
    lp += p.sigma2_eta.ln_pdf(h.sigma2_eta);
    Ok(lp)
}
