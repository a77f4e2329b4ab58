//! Getting-it-right: the successive-conditional simulator (Gibbs sweep, then
//! fresh data given the new state) must reproduce the prior of every scalar.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tmax_core::diagnostics::ess;
use tmax_core::gibbs::{gibbs_sweep, FitContext, MhTuner, ResidualWorkspace};
use tmax_core::model::Design;
use tmax_core::stats::{mean, sample_variance};
use tmax_core::synth::{draw_from_prior, simulate_observations};
use tmax_core::{ModelState, ScalingPolicy};

pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug)]
pub struct Moment {
    pub name: String,
    pub prior: f64,
    pub chain: f64,
    pub z: f64,
}

#[derive(Debug)]
pub struct GewekeReport {
    pub moments: Vec<Moment>,
    pub sweeps: usize,
}

impl GewekeReport {
    pub fn worst(&self) -> &Moment {
        self.moments
            .iter()
            .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
            .unwrap()
    }

    pub fn passed(&self) -> bool {
        self.moments.iter().all(|m| m.z.abs() <= Z_LIMIT)
    }
}

/// Named scalars plus a few site and year latents.
fn functionals(s: &ModelState, ctx: &FitContext) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = s
        .named_scalars(&ctx.variant)
        .into_iter()
        .map(|(n, v)| (n.to_string(), v))
        .collect();
    out.push(("beta0_site[0]".into(), s.sites.beta0_tilde[0]));
    out.push(("alpha_site[1]".into(), s.sites.alpha_tilde[1]));
    out.push(("z_rho_site[2]".into(), s.sites.z_rho[2]));
    out.push(("z_sig2_site[0]".into(), s.sites.z_sig2[0]));
    out.push(("psi[2]".into(), s.temporal.psi[2]));
    out.push(("gamma[1,1]".into(), s.temporal.gamma(1, 1)));
    out
}

fn regenerate(ctx: &mut FitContext, day1: &[f64], state: &ModelState, rng: &mut ChaCha8Rng) {
    let values = simulate_observations(state, &ctx.design, ctx.n_days, Some(day1), rng).unwrap();
    ctx.replace_observations(&values).unwrap();
}

/// Runs `sweeps` successive-conditional steps and as many prior draws.
pub fn run(sweeps: usize, seed: u64) -> GewekeReport {
    let base = super::tiny_panel(seed);
    let design = Design::new(&base, ScalingPolicy::Standardize).unwrap();
    let ctx0 = FitContext::with_design(&base, super::moderate_priors(), super::full_free(), design)
        .unwrap();
    let (n_t, n_i) = (base.n_years(), base.n_sites());
    let day1: Vec<f64> = (0..n_t)
        .flat_map(|t| (0..n_i).map(move |i| (t, i)))
        .map(|(t, i)| base.raw(t, 0, i))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior: Vec<Vec<(String, f64)>> = (0..sweeps)
        .map(|_| functionals(&draw_from_prior(&ctx0, &mut rng).unwrap(), &ctx0))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6e);
    let mut state = draw_from_prior(&ctx0, &mut rng).unwrap();
    let mut ctx = ctx0.clone();
    regenerate(&mut ctx, &day1, &state, &mut rng);
    let mut tuner = MhTuner::initial(&ctx, &state, 1);
    tuner.freeze();
    let mut ws = ResidualWorkspace::new(&ctx, &state);
    let mut chain = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        gibbs_sweep(&ctx, &mut ws, &mut state, &mut tuner, &mut rng).unwrap();
        chain.push(functionals(&state, &ctx));
        regenerate(&mut ctx, &day1, &state, &mut rng);
    }

    let mut moments = Vec::new();
    for k in 0..prior[0].len() {
        let name = &prior[0][k].0;
        for (tag, pow) in [("", 1), ("^2", 2)] {
            let p: Vec<f64> = prior.iter().map(|r| r[k].1.powi(pow)).collect();
            let c: Vec<f64> = chain.iter().map(|r| r[k].1.powi(pow)).collect();
            let n_eff = ess(&[&c]).unwrap().max(1.0);
            let se2 = sample_variance(&p) / p.len() as f64 + sample_variance(&c) / n_eff;
            let (mp, mc) = (mean(&p), mean(&c));
            let z = if se2 > 0.0 {
                (mc - mp) / se2.sqrt()
            } else {
                0.0
            };
            moments.push(Moment {
                name: format!("{name}{tag}"),
                prior: mp,
                chain: mc,
                z,
            });
        }
    }
    GewekeReport { moments, sweeps }
}
