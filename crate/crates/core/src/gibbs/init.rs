use nalgebra::{DMatrix, DVector};

use super::FitContext;
use crate::error::{Error, Result};
use crate::model::{
    z_from_rho, FixedEffects, GpField, HyperState, ModelState, SiteLatents, TemporalEffects,
};
use crate::spatial::default_phi;

const RHO_CLAMP: f64 = 0.95;
const MIN_VAR: f64 = 1e-6;

/// Deterministic starting point.
///
/// Fixed effects come from pooled least squares without the
/// autoregression; per-site `ρY` and `σε²` from the lag-1 autocorrelation
/// and innovation variance of those residuals; `ψ` and `γ` sit at their
/// prior means; variances at their prior means; decays at the support value
/// nearest `3 / d_max`.
pub fn initial_state(ctx: &FitContext) -> Result<ModelState> {
    let (n_t, n_l, n_i) = (ctx.n_years, ctx.n_days, ctx.n_sites);
    let d = &ctx.design;
    let use_elev = ctx.variant.elevation_effect;
    let p = if use_elev { 5 } else { 4 };

    let row = |t: usize, l: usize, i: usize| -> [f64; 5] {
        [
            1.0,
            d.time[t],
            d.sin[l],
            d.cos[l],
            if use_elev { d.elev[i] } else { 0.0 },
        ]
    };
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for i in 0..n_i {
        for t in 0..n_t {
            for l in 0..n_l {
                let r = row(t, l, i);
                let y = ctx.y(i, t, l);
                for a in 0..p {
                    xty[a] += r[a] * y;
                    for b in 0..p {
                        xtx[(a, b)] += r[a] * r[b];
                    }
                }
            }
        }
    }
    // pseudo-inverse tolerates constant covariates (one site, one year)
    let coef = xtx
        .svd(true, true)
        .solve(&xty, 1e-10)
        .map_err(|e| Error::Degenerate(format!("initial least squares: {e}")))?;
    let fixed = FixedEffects {
        beta0: coef[0],
        alpha: coef[1],
        beta1: coef[2],
        beta2: coef[3],
        beta3: if use_elev { coef[4] } else { 0.0 },
    };

    let mut z_rho = vec![0.0; n_i];
    let mut z_sig2 = vec![0.0; n_i];
    for i in 0..n_i {
        let resid = |t: usize, l: usize| {
            let r = row(t, l, i);
            ctx.y(i, t, l) - (0..p).map(|a| r[a] * coef[a]).sum::<f64>()
        };
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for t in 0..n_t {
            for l in 1..n_l {
                let (e1, e0) = (resid(t, l), resid(t, l - 1));
                sxy += e1 * e0;
                sxx += e0 * e0;
            }
        }
        let rho = if sxx > 0.0 {
            (sxy / sxx).clamp(-RHO_CLAMP, RHO_CLAMP)
        } else {
            0.0
        };
        let mut ss = 0.0;
        let mut n = 0usize;
        for t in 0..n_t {
            for l in 1..n_l {
                ss += (resid(t, l) - rho * resid(t, l - 1)).powi(2);
                n += 1;
            }
        }
        let var = if n > 0 {
            (ss / n as f64).max(MIN_VAR)
        } else {
            1.0
        };
        z_rho[i] = z_from_rho(rho);
        z_sig2[i] = var.ln();
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let pr = &ctx.priors;
    let (a, b) = pr.rho_psi_bounds;
    let target_phi = if n_i >= 2 {
        default_phi(&ctx.sites)?
    } else {
        1.0
    };
    let nearest = |f: GpField| -> f64 {
        let vals = &ctx.phi_table(f).values;
        *vals
            .iter()
            .min_by(|x, y| (*x - target_phi).abs().total_cmp(&(*y - target_phi).abs()))
            .expect("decay support is nonempty")
    };
    let hyper = HyperState {
        rho_psi: if a < 0.0 && b > 0.0 {
            0.0
        } else {
            0.5 * (a + b)
        },
        sigma2_lambda: pr.sigma2_lambda.center(),
        sigma2_eta: pr.sigma2_eta.center(),
        sigma2_beta0: pr.sigma2_beta0.center(),
        sigma2_alpha: pr.sigma2_alpha.center(),
        sigma2_rho: pr.sigma2_rho.center(),
        sigma2_sig2: pr.sigma2_sig2.center(),
        z_rho: mean(&z_rho),
        z_sig2: mean(&z_sig2),
        phi_beta0: nearest(GpField::Beta0),
        phi_alpha: nearest(GpField::Alpha),
        phi_rho: nearest(GpField::Rho),
        phi_sig2: nearest(GpField::Sig2),
    };

    let mut temporal = TemporalEffects::zeros(n_t, n_i);
    for t in 0..n_t {
        for i in 0..n_i {
            *temporal.gamma_mut(t, i) = fixed.beta0 + fixed.alpha * d.time[t];
        }
    }
    let mut state = ModelState {
        fixed,
        sites: SiteLatents {
            beta0_tilde: vec![fixed.beta0; n_i],
            alpha_tilde: vec![fixed.alpha; n_i],
            z_rho,
            z_sig2,
        },
        temporal,
        hyper,
    };
    for f in GpField::ALL {
        if !ctx.variant.has_gp(f) {
            state.collapse_field(f);
        }
    }
    Ok(state)
}
