//! Forward simulator of the model: the ground truth for recovery,
//! calibration and consistency tests.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::FitContext;
use crate::model::{
    build_design_dims, z_from_rho, CovariateScaling, Design, FixedEffects, GpField, HarmonicBasis,
    HyperState, ModelState, ModelVariant, PanelDataset, PhiPrior, ScalingPolicy, SiteLatents,
    SiteMeta, TemporalEffects,
};
use crate::spatial::{default_phi, exp_correlation};
use crate::stats::{inverse_gamma_variance, std_normal, Gaussian};

/// Generating parameters in original units. Standard deviations, not
/// variances; `sigma_rho` and `sigma_sig2` are on the `Z` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    /// Intercept of the design; with centered covariates, the mean level.
    pub beta0: f64,
    /// Trend per year.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Effect per metre of elevation.
    pub beta3: f64,
    pub rho_y: f64,
    pub sigma_eps: f64,
    pub sigma_eta: f64,
    pub sigma_lambda: f64,
    pub sigma_beta0: f64,
    pub sigma_alpha: f64,
    pub sigma_rho: f64,
    pub sigma_sig2: f64,
    #[serde(default)]
    pub rho_psi: f64,
    /// Common decay; `None` means `3 / d_max`.
    #[serde(default)]
    pub phi: Option<f64>,
}

impl TruthParams {
    /// Posterior means of the full model fitted to the Aragón series.
    pub fn table2() -> Self {
        Self {
            beta0: 25.70,
            alpha: 0.0207,
            beta1: 13.18,
            beta2: 0.633,
            beta3: -0.0069,
            rho_y: 0.691,
            sigma_eps: 2.963,
            sigma_eta: 0.230,
            sigma_lambda: 0.936,
            sigma_beta0: 1.492,
            sigma_alpha: 0.0283,
            sigma_rho: 0.339,
            sigma_sig2: 0.404,
            rho_psi: 0.0,
            phi: None,
        }
    }
}

impl TruthParams {
    /// The thirteen summary-table parameters, named as in the posterior
    /// summary.
    pub fn reported(&self) -> [(&'static str, f64); 13] {
        [
            ("beta0", self.beta0),
            ("alpha", self.alpha),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("rho_y", self.rho_y),
            ("sigma_eps", self.sigma_eps),
            ("sigma_eta", self.sigma_eta),
            ("sigma_lambda", self.sigma_lambda),
            ("sigma_beta0", self.sigma_beta0),
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_rho", self.sigma_rho),
            ("sigma_sig2", self.sigma_sig2),
        ]
    }
}

impl Default for TruthParams {
    fn default() -> Self {
        Self::table2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SiteLayout {
    /// `n` sites on a square grid, elevations uniform in the range.
    Grid {
        n: usize,
        spacing_km: f64,
        elev_min: f64,
        elev_max: f64,
    },
    Sites {
        sites: Vec<SiteMeta>,
    },
}

/// Optional per-site field values in original units, overriding the
/// Gaussian-process draws.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExplicitFields {
    pub beta0: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub sigma_eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub layout: SiteLayout,
    pub n_years: usize,
    pub n_days: usize,
    pub first_year: i32,
    pub day_of_year_offset: u32,
    pub seed: u64,
    pub truth: TruthParams,
    /// Fields without a process are constant across sites.
    pub variant: ModelVariant,
    pub scaling: ScalingPolicy,
    #[serde(default)]
    pub fields: ExplicitFields,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            layout: SiteLayout::Grid {
                n: 10,
                spacing_km: 40.0,
                elev_min: 200.0,
                elev_max: 1000.0,
            },
            n_years: 20,
            n_days: crate::model::MJJAS_DAYS,
            first_year: 1956,
            day_of_year_offset: 0,
            seed: 1,
            truth: TruthParams::table2(),
            variant: ModelVariant::full(),
            scaling: ScalingPolicy::Standardize,
            fields: ExplicitFields::default(),
        }
    }
}

impl GeneratorSpec {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(format!("generator spec: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("generator spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.truth;
        if self.n_years == 0 || self.n_days == 0 {
            return Err(Error::EmptyPanel(format!(
                "T={}, L={}",
                self.n_years, self.n_days
            )));
        }
        if !(t.rho_y.abs() < 1.0 && t.rho_psi.abs() < 1.0) {
            return Err(Error::InvalidConfig(
                "autocorrelations must lie in (-1, 1)".into(),
            ));
        }
        let sds = [
            t.sigma_eps,
            t.sigma_eta,
            t.sigma_lambda,
            t.sigma_beta0,
            t.sigma_alpha,
            t.sigma_rho,
            t.sigma_sig2,
        ];
        if sds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(
                "standard deviations must be >= 0".into(),
            ));
        }
        if let Some(p) = t.phi {
            if !(p > 0.0) {
                return Err(Error::InvalidConfig("decay must be positive".into()));
            }
        }
        Ok(())
    }
}

pub fn layout_sites<R: Rng + ?Sized>(layout: &SiteLayout, rng: &mut R) -> Result<Vec<SiteMeta>> {
    match layout {
        SiteLayout::Sites { sites } => Ok(sites.clone()),
        SiteLayout::Grid {
            n,
            spacing_km,
            elev_min,
            elev_max,
        } => {
            if *n == 0 {
                return Err(Error::EmptyPanel("grid with no sites".into()));
            }
            let cols = (*n as f64).sqrt().ceil() as usize;
            Ok((0..*n)
                .map(|k| {
                    let e = if elev_max > elev_min {
                        rng.random_range(*elev_min..*elev_max)
                    } else {
                        *elev_min
                    };
                    SiteMeta::new(
                        format!("S{:02}", k + 1),
                        (k % cols) as f64 * spacing_km,
                        (k / cols) as f64 * spacing_km,
                        e.round(),
                    )
                })
                .collect())
        }
    }
}

/// Draw of `N(m1, σ² R(φ))` at the sites; constant when `σ² = 0` or there
/// is no process.
pub fn draw_gp<R: Rng + ?Sized>(
    rng: &mut R,
    sites: &[SiteMeta],
    mean: f64,
    var: f64,
    phi: f64,
) -> Result<Vec<f64>> {
    if var == 0.0 {
        return Ok(vec![mean; sites.len()]);
    }
    let r = exp_correlation(sites, phi)?;
    let z = DVector::from_iterator(sites.len(), (0..sites.len()).map(|_| std_normal(rng)));
    let lz = r.factor().mul_lower(&z);
    let sd = var.sqrt();
    Ok(lz.iter().map(|v| mean + sd * v).collect())
}

/// Model-scale truth for the given sites and design: spatial fields, yearly
/// effects and site-year effects.
pub fn simulate_latent_state<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    sites: &[SiteMeta],
    scaling: &CovariateScaling,
    design: &Design,
    rng: &mut R,
) -> Result<ModelState> {
    spec.validate()?;
    let tr = &spec.truth;
    let n_i = sites.len();
    let st = scaling.time.scale;
    let phi = match tr.phi {
        Some(p) => p,
        None if n_i >= 2 => default_phi(sites)?,
        None => 1.0,
    };
    // Original-unit intercept refers to the raw covariates; move the
    // centering into the model-scale intercept.
    let shift = tr.alpha * scaling.time.center
        + tr.beta1 * scaling.sin.center
        + tr.beta2 * scaling.cos.center
        + tr.beta3 * scaling.elev.center;
    let fixed = FixedEffects {
        beta0: tr.beta0 + shift,
        alpha: tr.alpha * st,
        beta1: tr.beta1 * scaling.sin.scale,
        beta2: tr.beta2 * scaling.cos.scale,
        beta3: tr.beta3 * scaling.elev.scale,
    };
    let hyper = HyperState {
        rho_psi: tr.rho_psi,
        sigma2_lambda: tr.sigma_lambda.powi(2),
        sigma2_eta: tr.sigma_eta.powi(2),
        sigma2_beta0: tr.sigma_beta0.powi(2),
        sigma2_alpha: (tr.sigma_alpha * st).powi(2),
        sigma2_rho: tr.sigma_rho.powi(2),
        sigma2_sig2: tr.sigma_sig2.powi(2),
        z_rho: z_from_rho(tr.rho_y),
        z_sig2: tr.sigma_eps.powi(2).ln(),
        phi_beta0: phi,
        phi_alpha: phi,
        phi_rho: phi,
        phi_sig2: phi,
    };
    let mut state = ModelState {
        fixed,
        sites: SiteLatents::constant(n_i, fixed.beta0, fixed.alpha, hyper.z_rho, hyper.z_sig2),
        temporal: TemporalEffects::zeros(spec.n_years, n_i),
        hyper,
    };
    for f in GpField::ALL {
        if spec.variant.has_gp(f) {
            let v = draw_gp(
                rng,
                sites,
                state.field_mean(f),
                state.field_variance(f),
                phi,
            )?;
            *state.field_mut(f) = v;
        }
    }
    let check_len = |v: &Vec<f64>| -> Result<()> {
        if v.len() == n_i {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "explicit field needs {n_i} values"
            )))
        }
    };
    let ex = &spec.fields;
    if let Some(v) = &ex.alpha {
        check_len(v)?;
        state.sites.alpha_tilde = v.iter().map(|a| a * st).collect();
    }
    if let Some(v) = &ex.beta0 {
        check_len(v)?;
        let off = shift - tr.alpha * scaling.time.center;
        for (k, b) in v.iter().enumerate() {
            let slope = state.sites.alpha_tilde[k] / st;
            state.sites.beta0_tilde[k] = b + slope * scaling.time.center + off;
        }
    }
    if let Some(v) = &ex.rho {
        check_len(v)?;
        state.sites.z_rho = v.iter().map(|&r| z_from_rho(r)).collect();
    }
    if let Some(v) = &ex.sigma_eps {
        check_len(v)?;
        state.sites.z_sig2 = v.iter().map(|s| (s * s).ln()).collect();
    }

    let sl = tr.sigma_lambda;
    for t in 1..spec.n_years {
        state.temporal.psi[t] = tr.rho_psi * state.temporal.psi[t - 1] + sl * std_normal(rng);
    }
    for t in 0..spec.n_years {
        for i in 0..n_i {
            let m = state.sites.beta0_tilde[i]
                + state.sites.alpha_tilde[i] * design.time[t]
                + state.temporal.psi[t];
            *state.temporal.gamma_mut(t, i) = m + tr.sigma_eta * std_normal(rng);
        }
    }
    Ok(state)
}

/// Within-year stationary law of the day-1 value at site `i`, year `t`:
/// `N(μ_t1 + γ_t, σε² / (1 − ρY²))`.
pub fn stationary_day1(
    state: &ModelState,
    design: &Design,
    i: usize,
    t: usize,
) -> Result<Gaussian> {
    let rho = state.sites.rho(i);
    if !(rho.abs() < 1.0) {
        return Err(Error::Degenerate(format!(
            "|rho_Y| = {} at site {i}",
            rho.abs()
        )));
    }
    let f = &state.fixed;
    let mu = f.beta1 * design.sin[0] + f.beta2 * design.cos[0] + f.beta3 * design.elev[i];
    let sig2 = state.sites.z_sig2[i].exp();
    Ok(Gaussian::new(
        mu + state.temporal.gamma(t, i),
        sig2 / (1.0 - rho * rho),
    ))
}

/// Daily values `[t][l][i]` given the state. Day 1 comes from `day1`
/// (laid out `[t][i]`) when supplied, otherwise from the stationary law.
pub fn simulate_observations<R: Rng + ?Sized>(
    state: &ModelState,
    design: &Design,
    n_days: usize,
    day1: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n_t = state.n_years();
    let n_i = state.n_sites();
    let f = &state.fixed;
    let mut out = vec![0.0; n_t * n_days * n_i];
    for t in 0..n_t {
        for i in 0..n_i {
            let rho = state.sites.rho(i);
            let sd = (0.5 * state.sites.z_sig2[i]).exp();
            let g = state.temporal.gamma(t, i);
            let mu = |l: usize| {
                f.beta1 * design.sin[l] + f.beta2 * design.cos[l] + f.beta3 * design.elev[i]
            };
            let y1 = match day1 {
                Some(d) => d[t * n_i + i],
                None => stationary_day1(state, design, i, t)?.sample(rng),
            };
            out[t * n_days * n_i + i] = y1;
            let mut prev = y1 - mu(0) - g;
            for l in 1..n_days {
                let dev = rho * prev + sd * std_normal(rng);
                out[(t * n_days + l) * n_i + i] = mu(l) + g + dev;
                prev = dev;
            }
        }
    }
    Ok(out)
}

/// Simulated panel and its model-scale truth.
pub fn simulate_panel(spec: &GeneratorSpec) -> Result<(PanelDataset, ModelState)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sites = layout_sites(&spec.layout, &mut rng)?;
    let (basis, scaling) = build_design_dims(
        spec.n_years,
        spec.n_days,
        &sites,
        spec.day_of_year_offset,
        spec.scaling,
    )?;
    let design = Design::from_parts(spec.n_years, &basis, &sites, scaling);
    let state = simulate_latent_state(spec, &sites, &scaling, &design, &mut rng)?;
    let values = simulate_observations(&state, &design, spec.n_days, None, &mut rng)?;
    let data = PanelDataset::new(
        sites,
        spec.n_years,
        spec.n_days,
        values,
        spec.first_year,
        spec.day_of_year_offset,
    )?;
    Ok((data, state))
}

/// Draw of every parameter and latent quantity from the prior implied by
/// the context's priors and variant.
pub fn draw_from_prior<R: Rng + ?Sized>(ctx: &FitContext, rng: &mut R) -> Result<ModelState> {
    let p = &ctx.priors;
    let v = &ctx.variant;
    let n_i = ctx.n_sites;
    let normal = |rng: &mut R, np: &crate::model::NormalPrior| -> Result<f64> {
        if np.var.is_infinite() {
            return Err(Error::InvalidConfig("cannot draw from a flat prior".into()));
        }
        Ok(np.mean + np.var.sqrt() * std_normal(rng))
    };
    let ig = |rng: &mut R, g: &crate::model::InverseGammaPrior| {
        inverse_gamma_variance(rng, g.shape, g.rate)
    };
    let fixed = FixedEffects {
        beta0: normal(rng, &p.beta0)?,
        alpha: normal(rng, &p.alpha)?,
        beta1: normal(rng, &p.beta1)?,
        beta2: normal(rng, &p.beta2)?,
        beta3: if v.elevation_effect {
            normal(rng, &p.beta3)?
        } else {
            0.0
        },
    };
    let z_rho = normal(rng, &p.z_rho)?;
    let z_sig2 = normal(rng, &p.z_sig2)?;
    let rho_psi = if v.year_effects && !v.pin_rho_psi_zero {
        let (a, b) = p.rho_psi_bounds;
        rng.random_range(a..b)
    } else {
        0.0
    };
    let sigma2_lambda = if v.year_effects {
        ig(rng, &p.sigma2_lambda)?
    } else {
        p.sigma2_lambda.center()
    };
    let sigma2_eta = ig(rng, &p.sigma2_eta)?;
    let mut hyper = HyperState {
        rho_psi,
        sigma2_lambda,
        sigma2_eta,
        z_rho,
        z_sig2,
        ..HyperState::default()
    };
    let mut state = ModelState {
        fixed,
        sites: SiteLatents::constant(n_i, fixed.beta0, fixed.alpha, z_rho, z_sig2),
        temporal: TemporalEffects::zeros(ctx.n_years, n_i),
        hyper,
    };
    for f in GpField::ALL {
        let table = ctx.phi_table(f);
        if v.has_gp(f) {
            let var = ig(rng, p.field_variance_prior(f))?;
            let k = rng.random_range(0..table.len());
            state.set_field_variance(f, var);
            state.set_field_phi(f, table.values[k]);
            let r = table.matrix(k);
            let z = DVector::from_iterator(n_i, (0..n_i).map(|_| std_normal(rng)));
            let lz = r.factor().mul_lower(&z);
            let m = state.field_mean(f);
            *state.field_mut(f) = lz.iter().map(|x| m + var.sqrt() * x).collect();
        } else {
            state.set_field_variance(f, p.field_variance_prior(f).center());
            state.set_field_phi(f, table.values[0]);
        }
    }
    hyper = state.hyper;
    if v.year_effects {
        for t in 1..ctx.n_years {
            state.temporal.psi[t] = hyper.rho_psi * state.temporal.psi[t - 1]
                + hyper.sigma2_lambda.sqrt() * std_normal(rng);
        }
    }
    for t in 0..ctx.n_years {
        for i in 0..n_i {
            let m = state.sites.beta0_tilde[i]
                + state.sites.alpha_tilde[i] * ctx.design.time[t]
                + state.temporal.psi[t];
            *state.temporal.gamma_mut(t, i) = m + hyper.sigma2_eta.sqrt() * std_normal(rng);
        }
    }
    Ok(state)
}

/// Model-scale covariates for a spec's layout, without simulating data.
pub fn spec_design(spec: &GeneratorSpec) -> Result<(Vec<SiteMeta>, CovariateScaling, Design)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sites = layout_sites(&spec.layout, &mut rng)?;
    let (basis, scaling): (HarmonicBasis, CovariateScaling) = build_design_dims(
        spec.n_years,
        spec.n_days,
        &sites,
        spec.day_of_year_offset,
        spec.scaling,
    )?;
    let design = Design::from_parts(spec.n_years, &basis, &sites, scaling);
    Ok((sites, scaling, design))
}

/// Convenience: the decay prior that fixes every field at the truth's
/// decay.
pub fn truth_phi_prior(spec: &GeneratorSpec) -> PhiPrior {
    PhiPrior::Fixed(spec.truth.phi)
}
