//! Full conditionals and the updates that draw from them.
//!
//! Each `*_conditional` function returns the exact distribution a block is
//! drawn from, so tests can compare it against the joint density; the
//! matching `update_*` function draws and writes the state.

use rand::Rng;

use super::mh::{MhFamily, MhTuner};
use super::workspace::{ArSums, ResidualWorkspace};
use super::FitContext;
use crate::error::{Error, Result};
use crate::model::{rho_from_z, GpField, InverseGammaPrior, ModelState, NormalPrior};
use crate::stats::{inverse_gamma_variance, normal_ln_pdf, truncated_normal, Gaussian};

/// Running sums `Σ 1/σ²` and `Σ μ/σ²` for a product of Gaussian densities.
#[derive(Debug, Clone, Copy, Default)]
struct Precision {
    prec: f64,
    weighted: f64,
}

impl Precision {
    fn add(&mut self, mean: f64, var: f64) {
        if var.is_infinite() {
            return;
        }
        self.prec += 1.0 / var;
        self.weighted += mean / var;
    }

    fn add_raw(&mut self, prec: f64, weighted: f64) {
        self.prec += prec;
        self.weighted += weighted;
    }

    fn add_prior(&mut self, p: &NormalPrior) {
        self.add(p.mean, p.var);
    }

    fn finish(self, what: &str) -> Result<Gaussian> {
        if !(self.prec > 0.0 && self.prec.is_finite()) || !self.weighted.is_finite() {
            return Err(Error::Degenerate(format!(
                "{what}: total precision {}",
                self.prec
            )));
        }
        Ok(Gaussian::new(self.weighted / self.prec, 1.0 / self.prec))
    }
}

/// Product of Gaussian densities in one variable, as a normalized Gaussian:
/// precision-weighted mean and inverse total precision.
pub fn combine_normals(parts: &[(f64, f64)]) -> Result<Gaussian> {
    if parts.is_empty() {
        return Err(Error::InvalidConfig(
            "combine_normals needs at least one term".into(),
        ));
    }
    let mut acc = Precision::default();
    for &(m, v) in parts {
        if !(v > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "variance must be positive, got {v}"
            )));
        }
        acc.add(m, v);
    }
    acc.finish("combine_normals")
}

/// The coefficients of the mean surface that enter every residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    Sin,
    Cos,
    Elevation,
}

impl Coefficient {
    fn get(self, s: &ModelState) -> f64 {
        match self {
            Coefficient::Sin => s.fixed.beta1,
            Coefficient::Cos => s.fixed.beta2,
            Coefficient::Elevation => s.fixed.beta3,
        }
    }

    fn set(self, s: &mut ModelState, v: f64) {
        match self {
            Coefficient::Sin => s.fixed.beta1 = v,
            Coefficient::Cos => s.fixed.beta2 = v,
            Coefficient::Elevation => s.fixed.beta3 = v,
        }
    }

    fn prior(self, ctx: &FitContext) -> &NormalPrior {
        match self {
            Coefficient::Sin => &ctx.priors.beta1,
            Coefficient::Cos => &ctx.priors.beta2,
            Coefficient::Elevation => &ctx.priors.beta3,
        }
    }
}

/// Gaussian full conditional of `β1`, `β2` or `β3`, pooling the
/// AR-filtered regressions of every site.
pub fn coefficient_conditional(
    ctx: &FitContext,
    ws: &ResidualWorkspace,
    state: &ModelState,
    c: Coefficient,
) -> Result<Gaussian> {
    let d = &ctx.design;
    let coef = c.get(state);
    let mut acc = Precision::default();
    let mut filtered = vec![0.0; ctx.n_days];
    for i in 0..ctx.n_sites {
        let rho = state.sites.rho(i);
        let sig2 = state.sites.sig2(i);
        for (l, fl) in filtered.iter_mut().enumerate().skip(1) {
            *fl = match c {
                Coefficient::Sin => d.sin[l] - rho * d.sin[l - 1],
                Coefficient::Cos => d.cos[l] - rho * d.cos[l - 1],
                Coefficient::Elevation => d.elev[i] * (1.0 - rho),
            };
        }
        let ff: f64 = filtered[1..].iter().map(|f| f * f).sum();
        let den = ctx.n_years as f64 * ff;
        if den == 0.0 {
            continue;
        }
        let mut num = coef * den;
        for t in 0..ctx.n_years {
            let x = ws.year(i, t);
            for l in 1..ctx.n_days {
                num += filtered[l] * (x[l] - rho * x[l - 1]);
            }
        }
        acc.add_raw(den / sig2, num / sig2);
    }
    acc.add_prior(c.prior(ctx));
    acc.finish(match c {
        Coefficient::Sin => "sine coefficient",
        Coefficient::Cos => "cosine coefficient",
        Coefficient::Elevation => "elevation coefficient",
    })
}

#[inline]
fn eta_mean(ctx: &FitContext, s: &ModelState, t: usize, i: usize) -> f64 {
    s.sites.beta0_tilde[i] + s.sites.alpha_tilde[i] * ctx.design.time[t] + s.temporal.psi[t]
}

/// Gaussian full conditional of a field's global mean. With a spatial
/// process this is the GP form `1ᵀR⁻¹x / 1ᵀR⁻¹1`; without one, the
/// intercept and trend are informed directly by the site-year effects. The
/// `Z` means have no Gaussian conditional without a process (see
/// [`update_site_latents_mh`]).
pub fn field_mean_conditional(
    ctx: &FitContext,
    state: &ModelState,
    f: GpField,
) -> Result<Gaussian> {
    let mut acc = Precision::default();
    if ctx.variant.has_gp(f) {
        let r = ctx.correlation(f, state.field_phi(f))?;
        let tot = r.inv_total();
        acc.add(
            r.inv_ones_dot(state.field(f)) / tot,
            state.field_variance(f) / tot,
        );
    } else {
        let s = &state.sites;
        let eta = state.hyper.sigma2_eta;
        match f {
            GpField::Beta0 => {
                let mut sum = 0.0;
                for t in 0..ctx.n_years {
                    for i in 0..ctx.n_sites {
                        sum += state.temporal.gamma(t, i)
                            - s.alpha_tilde[i] * ctx.design.time[t]
                            - state.temporal.psi[t];
                    }
                }
                let n = (ctx.n_years * ctx.n_sites) as f64;
                acc.add(sum / n, eta / n);
            }
            GpField::Alpha => {
                let tt = ctx.sum_time_sq() * ctx.n_sites as f64;
                if tt > 0.0 {
                    let mut sum = 0.0;
                    for t in 0..ctx.n_years {
                        let tau = ctx.design.time[t];
                        for i in 0..ctx.n_sites {
                            sum += tau
                                * (state.temporal.gamma(t, i)
                                    - s.beta0_tilde[i]
                                    - state.temporal.psi[t]);
                        }
                    }
                    acc.add(sum / tt, eta / tt);
                }
            }
            GpField::Rho | GpField::Sig2 => {
                return Err(Error::InvalidConfig(format!(
                    "global {} mean without a spatial process is not Gaussian",
                    f.name()
                )))
            }
        }
    }
    acc.add_prior(ctx.priors.field_mean_prior(f));
    acc.finish(f.name())
}

/// Draws `β0, α, β1, β2, β3` and, for fields with a spatial process, the
/// `Z` means.
pub fn update_global_means<R: Rng + ?Sized>(
    ctx: &FitContext,
    ws: &mut ResidualWorkspace,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    for f in [GpField::Beta0, GpField::Alpha] {
        let v = field_mean_conditional(ctx, state, f)?.sample(rng);
        state.set_field_mean(f, v);
        if !ctx.variant.has_gp(f) {
            state.collapse_field(f);
        }
    }
    let mut coefs = vec![Coefficient::Sin, Coefficient::Cos];
    if ctx.variant.elevation_effect {
        coefs.push(Coefficient::Elevation);
    }
    for c in coefs {
        let old = c.get(state);
        let new = coefficient_conditional(ctx, ws, state, c)?.sample(rng);
        c.set(state, new);
        let delta = new - old;
        match c {
            Coefficient::Sin => ws.shift_by_day(delta, &ctx.design.sin),
            Coefficient::Cos => ws.shift_by_day(delta, &ctx.design.cos),
            Coefficient::Elevation => {
                for i in 0..ctx.n_sites {
                    ws.shift_site(i, delta * ctx.design.elev[i]);
                }
            }
        }
    }
    for f in [GpField::Rho, GpField::Sig2] {
        if ctx.variant.has_gp(f) {
            let v = field_mean_conditional(ctx, state, f)?.sample(rng);
            state.set_field_mean(f, v);
        }
    }
    Ok(())
}

/// Untruncated Gaussian part of the `ρψ` conditional; `None` when every
/// lagged `ψ` is zero and the data say nothing.
pub fn rho_psi_conditional(state: &ModelState) -> Option<Gaussian> {
    let psi = &state.temporal.psi;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in 1..psi.len() {
        sxy += psi[t] * psi[t - 1];
        sxx += psi[t - 1] * psi[t - 1];
    }
    (sxx > 0.0).then(|| Gaussian::new(sxy / sxx, state.hyper.sigma2_lambda / sxx))
}

pub fn update_rho_psi<R: Rng + ?Sized>(
    ctx: &FitContext,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    if ctx.variant.pin_rho_psi_zero || !ctx.variant.year_effects || ctx.n_years < 2 {
        return Ok(());
    }
    let (a, b) = ctx.priors.rho_psi_bounds;
    state.hyper.rho_psi = match rho_psi_conditional(state) {
        Some(g) => truncated_normal(rng, g.mean, g.var, a, b)?,
        None => loop {
            let v = rng.random_range(a..b);
            if v > a {
                break v;
            }
        },
    };
    Ok(())
}

/// A variance parameter with an inverse-gamma full conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceParam {
    Lambda,
    Eta,
    Field(GpField),
}

/// Inverse-gamma full conditional, as `(shape, rate)` of the precision.
pub fn variance_conditional(
    ctx: &FitContext,
    state: &ModelState,
    which: VarianceParam,
) -> Result<InverseGammaPrior> {
    let p = &ctx.priors;
    Ok(match which {
        VarianceParam::Lambda => {
            let psi = &state.temporal.psi;
            let rp = state.hyper.rho_psi;
            let ss: f64 = (1..psi.len())
                .map(|t| (psi[t] - rp * psi[t - 1]).powi(2))
                .sum();
            InverseGammaPrior::new(
                (ctx.n_years as f64 - 1.0) / 2.0 + p.sigma2_lambda.shape,
                0.5 * ss + p.sigma2_lambda.rate,
            )
        }
        VarianceParam::Eta => {
            let mut ss = 0.0;
            for t in 0..ctx.n_years {
                for i in 0..ctx.n_sites {
                    ss += (state.temporal.gamma(t, i) - eta_mean(ctx, state, t, i)).powi(2);
                }
            }
            InverseGammaPrior::new(
                (ctx.n_years * ctx.n_sites) as f64 / 2.0 + p.sigma2_eta.shape,
                0.5 * ss + p.sigma2_eta.rate,
            )
        }
        VarianceParam::Field(f) => {
            let r = ctx.correlation(f, state.field_phi(f))?;
            let q = r.quad_centered(state.field(f), state.field_mean(f));
            let prior = p.field_variance_prior(f);
            InverseGammaPrior::new(ctx.n_sites as f64 / 2.0 + prior.shape, 0.5 * q + prior.rate)
        }
    })
}

pub fn update_variances<R: Rng + ?Sized>(
    ctx: &FitContext,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    let draw = |state: &ModelState, w, rng: &mut R| -> Result<f64> {
        let ig = variance_conditional(ctx, state, w)?;
        inverse_gamma_variance(rng, ig.shape, ig.rate)
    };
    if ctx.variant.year_effects {
        state.hyper.sigma2_lambda = draw(state, VarianceParam::Lambda, rng)?;
    }
    state.hyper.sigma2_eta = draw(state, VarianceParam::Eta, rng)?;
    for f in GpField::ALL {
        if ctx.variant.has_gp(f) {
            let v = draw(state, VarianceParam::Field(f), rng)?;
            state.set_field_variance(f, v);
        }
    }
    Ok(())
}

/// Unnormalized log weights of the decay grid:
/// `−½ log|R(φ)| − quad(φ) / (2σ²)`.
pub fn phi_log_weights(ctx: &FitContext, state: &ModelState, f: GpField) -> Result<Vec<f64>> {
    let table = ctx.phi_table(f);
    let x = state.field(f);
    let m = state.field_mean(f);
    let s2 = state.field_variance(f);
    Ok((0..table.len())
        .map(|k| {
            let r = table.matrix(k);
            -0.5 * r.log_det() - r.quad_centered(x, m) / (2.0 * s2)
        })
        .collect())
}

fn sample_log_weights<R: Rng + ?Sized>(rng: &mut R, lw: &[f64]) -> Result<usize> {
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate(
            "all discrete log weights are -inf or NaN".into(),
        ));
    }
    let w: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, wk) in w.iter().enumerate() {
        if u < *wk {
            return Ok(k);
        }
        u -= wk;
    }
    Ok(w.iter().rposition(|&x| x > 0.0).unwrap_or(0))
}

pub fn update_phi_discrete<R: Rng + ?Sized>(
    ctx: &FitContext,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    for f in GpField::ALL {
        let table = ctx.phi_table(f);
        if !ctx.variant.has_gp(f) || table.fixed || table.len() < 2 {
            continue;
        }
        let lw = phi_log_weights(ctx, state, f)?;
        let k = sample_log_weights(rng, &lw)?;
        state.set_field_phi(f, table.values[k]);
    }
    Ok(())
}

/// Gaussian full conditional of `β̃0(s_i)` or `α̃(s_i)`: the site-year
/// likelihood term times the conditional GP prior.
pub fn site_field_conditional(
    ctx: &FitContext,
    state: &ModelState,
    f: GpField,
    i: usize,
) -> Result<Gaussian> {
    let s = &state.sites;
    let eta = state.hyper.sigma2_eta;
    let mut acc = Precision::default();
    match f {
        GpField::Beta0 => {
            let mut sum = 0.0;
            for t in 0..ctx.n_years {
                sum += state.temporal.gamma(t, i)
                    - s.alpha_tilde[i] * ctx.design.time[t]
                    - state.temporal.psi[t];
            }
            let n = ctx.n_years as f64;
            acc.add(sum / n, eta / n);
        }
        GpField::Alpha => {
            let tt = ctx.sum_time_sq();
            if tt > 0.0 {
                let mut sum = 0.0;
                for t in 0..ctx.n_years {
                    sum += ctx.design.time[t]
                        * (state.temporal.gamma(t, i) - s.beta0_tilde[i] - state.temporal.psi[t]);
                }
                acc.add(sum / tt, eta / tt);
            }
        }
        GpField::Rho | GpField::Sig2 => {
            return Err(Error::InvalidConfig(format!(
                "{} site values have no Gaussian conditional",
                f.name()
            )))
        }
    }
    let r = ctx.correlation(f, state.field_phi(f))?;
    let (m, v) = r.conditional(
        i,
        state.field(f),
        state.field_mean(f),
        state.field_variance(f),
    );
    acc.add(m, v);
    acc.finish(f.name())
}

pub fn update_site_gaussian_fields<R: Rng + ?Sized>(
    ctx: &FitContext,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    for f in [GpField::Beta0, GpField::Alpha] {
        if !ctx.variant.has_gp(f) {
            continue;
        }
        for i in 0..ctx.n_sites {
            let v = site_field_conditional(ctx, state, f, i)?.sample(rng);
            state.field_mut(f)[i] = v;
        }
    }
    Ok(())
}

fn gp_conditional_ln(
    ctx: &FitContext,
    state: &ModelState,
    f: GpField,
    i: usize,
    z: f64,
) -> Result<f64> {
    let r = ctx.correlation(f, state.field_phi(f))?;
    let (m, v) = r.conditional(
        i,
        state.field(f),
        state.field_mean(f),
        state.field_variance(f),
    );
    Ok(normal_ln_pdf(z, m, v))
}

/// Unnormalized log full conditional of `Z_ρY(s_i)` at `z`.
pub fn z_rho_log_target(
    ctx: &FitContext,
    state: &ModelState,
    sums: &ArSums,
    i: usize,
    z: f64,
) -> Result<f64> {
    let lik = -sums.rss(rho_from_z(z)) / (2.0 * state.sites.sig2(i));
    Ok(lik + gp_conditional_ln(ctx, state, GpField::Rho, i, z)?)
}

/// Unnormalized log full conditional of `Z_σε²(s_i)` at `z`.
pub fn z_sig2_log_target(
    ctx: &FitContext,
    state: &ModelState,
    sums: &ArSums,
    i: usize,
    z: f64,
) -> Result<f64> {
    let n = ctx.transitions() as f64;
    let lik = -0.5 * n * z - sums.rss(state.sites.rho(i)) / (2.0 * z.exp());
    Ok(lik + gp_conditional_ln(ctx, state, GpField::Sig2, i, z)?)
}

/// Log full conditional of a common `Z_ρY` shared by every site.
pub fn z_rho_global_log_target(
    ctx: &FitContext,
    state: &ModelState,
    sums: &[ArSums],
    z: f64,
) -> f64 {
    let rho = rho_from_z(z);
    let lik: f64 = sums
        .iter()
        .enumerate()
        .map(|(i, s)| -s.rss(rho) / (2.0 * state.sites.sig2(i)))
        .sum();
    lik + ctx.priors.z_rho.ln_pdf(z)
}

/// Log full conditional of a common `Z_σε²` shared by every site.
pub fn z_sig2_global_log_target(
    ctx: &FitContext,
    state: &ModelState,
    sums: &[ArSums],
    z: f64,
) -> f64 {
    let n = ctx.transitions() as f64;
    let lik: f64 = sums
        .iter()
        .enumerate()
        .map(|(i, s)| -0.5 * n * z - s.rss(state.sites.rho(i)) / (2.0 * z.exp()))
        .sum();
    lik + ctx.priors.z_sig2.ln_pdf(z)
}

fn mh_step<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    sd: f64,
    target: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, bool)> {
    let proposal = current + sd * crate::stats::std_normal(rng);
    let log_ratio = target(proposal)? - target(current)?;
    let u: f64 = rng.random();
    if log_ratio.is_finite() && (log_ratio >= 0.0 || u.ln() < log_ratio) {
        Ok((proposal, true))
    } else {
        Ok((current, false))
    }
}

/// Random-walk MH for the `Z_ρY` and `Z_σε²` site values, or for their
/// common value when the field has no spatial process.
pub fn update_site_latents_mh<R: Rng + ?Sized>(
    ctx: &FitContext,
    ws: &ResidualWorkspace,
    state: &mut ModelState,
    tuner: &mut MhTuner,
    rng: &mut R,
) -> Result<()> {
    let sums: Vec<ArSums> = (0..ctx.n_sites).map(|i| ws.ar_sums(i)).collect();

    if ctx.variant.has_gp(GpField::Rho) {
        for (i, sums_i) in sums.iter().enumerate() {
            let cur = state.sites.z_rho[i];
            let sd = tuner.sd(MhFamily::Rho, i);
            let (z, acc) = mh_step(rng, cur, sd, |z| z_rho_log_target(ctx, state, sums_i, i, z))?;
            state.sites.z_rho[i] = z;
            tuner.record(MhFamily::Rho, i, acc);
        }
    } else {
        let cur = state.hyper.z_rho;
        let sd = tuner.sd(MhFamily::Rho, 0);
        let (z, acc) = mh_step(rng, cur, sd, |z| {
            Ok(z_rho_global_log_target(ctx, state, &sums, z))
        })?;
        state.hyper.z_rho = z;
        state.collapse_field(GpField::Rho);
        tuner.record(MhFamily::Rho, 0, acc);
    }

    if ctx.variant.has_gp(GpField::Sig2) {
        for (i, sums_i) in sums.iter().enumerate() {
            let cur = state.sites.z_sig2[i];
            let sd = tuner.sd(MhFamily::Sig2, i);
            let (z, acc) = mh_step(rng, cur, sd, |z| {
                z_sig2_log_target(ctx, state, sums_i, i, z)
            })?;
            state.sites.z_sig2[i] = z;
            tuner.record(MhFamily::Sig2, i, acc);
        }
    } else {
        let cur = state.hyper.z_sig2;
        let sd = tuner.sd(MhFamily::Sig2, 0);
        let (z, acc) = mh_step(rng, cur, sd, |z| {
            Ok(z_sig2_global_log_target(ctx, state, &sums, z))
        })?;
        state.hyper.z_sig2 = z;
        state.collapse_field(GpField::Sig2);
        tuner.record(MhFamily::Sig2, 0, acc);
    }
    Ok(())
}

/// Gaussian full conditional of `ψ_t` for `t ≥ 2` (index `t ≥ 1`): the
/// site-mean likelihood term times the AR bridge (interior years) or the
/// one-sided AR term (last year).
pub fn psi_conditional(ctx: &FitContext, state: &ModelState, t: usize) -> Result<Gaussian> {
    if t == 0 || t >= ctx.n_years {
        return Err(Error::InvalidConfig(format!("psi index {t} is not free")));
    }
    let s = &state.sites;
    let tau = ctx.design.time[t];
    let mut sum = 0.0;
    for i in 0..ctx.n_sites {
        sum += state.temporal.gamma(t, i) - s.beta0_tilde[i] - s.alpha_tilde[i] * tau;
    }
    let n = ctx.n_sites as f64;
    let mut acc = Precision::default();
    acc.add(sum / n, state.hyper.sigma2_eta / n);
    let psi = &state.temporal.psi;
    let rp = state.hyper.rho_psi;
    let lam = state.hyper.sigma2_lambda;
    if t + 1 < ctx.n_years {
        let k = 1.0 + rp * rp;
        acc.add(rp * (psi[t - 1] + psi[t + 1]) / k, lam / k);
    } else {
        acc.add(rp * psi[t - 1], lam);
    }
    acc.finish("psi")
}

pub fn update_psi<R: Rng + ?Sized>(
    ctx: &FitContext,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    if !ctx.variant.year_effects {
        return Ok(());
    }
    for t in 1..ctx.n_years {
        state.temporal.psi[t] = psi_conditional(ctx, state, t)?.sample(rng);
    }
    Ok(())
}

/// Gaussian full conditional of `γ_t(s_i)`: AR-filtered data term times
/// `N(β̃0 + α̃τ_t + ψ_t, ση²)`.
pub fn gamma_conditional(
    ctx: &FitContext,
    ws: &ResidualWorkspace,
    state: &ModelState,
    t: usize,
    i: usize,
) -> Result<Gaussian> {
    let mut acc = Precision::default();
    if ctx.n_days > 1 {
        let rho = state.sites.rho(i);
        let sig2 = state.sites.sig2(i);
        let g = state.temporal.gamma(t, i);
        let x = ws.year(i, t);
        let one_minus = 1.0 - rho;
        if one_minus <= 0.0 {
            return Err(Error::Degenerate(format!("rho_Y = 1 at site {i}")));
        }
        let m = (ctx.n_days - 1) as f64;
        let mut e = 0.0;
        for l in 1..ctx.n_days {
            e += x[l] - rho * x[l - 1];
        }
        // residuals without γ add back γ(1 − ρ) per transition
        e += g * m * one_minus;
        acc.add(e / (m * one_minus), sig2 / (m * one_minus * one_minus));
    }
    acc.add(eta_mean(ctx, state, t, i), state.hyper.sigma2_eta);
    acc.finish("gamma")
}

pub fn update_gamma<R: Rng + ?Sized>(
    ctx: &FitContext,
    ws: &mut ResidualWorkspace,
    state: &mut ModelState,
    rng: &mut R,
) -> Result<()> {
    for t in 0..ctx.n_years {
        for i in 0..ctx.n_sites {
            let new = gamma_conditional(ctx, ws, state, t, i)?.sample(rng);
            let g = state.temporal.gamma_mut(t, i);
            let delta = new - *g;
            *g = new;
            ws.shift_site_year(i, t, delta);
        }
    }
    Ok(())
}

/// One full scan in the fixed order: global means, `ρψ`, variances,
/// decays, site intercept/trend fields, `Z` fields, `ψ`, `γ`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    ctx: &FitContext,
    ws: &mut ResidualWorkspace,
    state: &mut ModelState,
    tuner: &mut MhTuner,
    rng: &mut R,
) -> Result<()> {
    ws.refresh(ctx, state);
    update_global_means(ctx, ws, state, rng)?;
    update_rho_psi(ctx, state, rng)?;
    update_variances(ctx, state, rng)?;
    update_phi_discrete(ctx, state, rng)?;
    update_site_gaussian_fields(ctx, state, rng)?;
    update_site_latents_mh(ctx, ws, state, tuner, rng)?;
    update_psi(ctx, state, rng)?;
    update_gamma(ctx, ws, state, rng)?;
    Ok(())
}
