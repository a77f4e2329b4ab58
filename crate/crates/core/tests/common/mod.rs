#![allow(dead_code)]

pub mod geweke;
pub mod ratio;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tmax_core::gibbs::FitContext;
use tmax_core::model::{InverseGammaPrior, NormalPrior};
use tmax_core::synth::{draw_from_prior, simulate_panel, SiteLayout};
use tmax_core::{
    GeneratorSpec, HyperPriors, ModelState, ModelVariant, PanelDataset, PhiPrior, ScalingPolicy,
};

/// Proper, light-tailed priors for tiny-model checks; five decay values.
pub fn moderate_priors() -> HyperPriors {
    let n = NormalPrior::new(0.0, 1.0);
    let ig = InverseGammaPrior::new(6.0, 5.0);
    HyperPriors {
        beta0: n,
        alpha: n,
        beta1: n,
        beta2: n,
        beta3: n,
        z_rho: NormalPrior::new(1.0, 0.5),
        z_sig2: n,
        sigma2_lambda: ig,
        sigma2_eta: ig,
        sigma2_beta0: ig,
        sigma2_alpha: ig,
        sigma2_rho: ig,
        sigma2_sig2: ig,
        ..HyperPriors::default()
    }
    .with_phi(PhiPrior::AutoGrid(5))
}

pub fn grid_spec(n_sites: usize, n_years: usize, n_days: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        layout: SiteLayout::Grid {
            n: n_sites,
            spacing_km: 40.0,
            elev_min: 200.0,
            elev_max: 1000.0,
        },
        n_years,
        n_days,
        seed,
        ..GeneratorSpec::default()
    }
}

/// I = 3, T = 4, L = 6.
pub fn tiny_panel(seed: u64) -> PanelDataset {
    simulate_panel(&grid_spec(3, 4, 6, seed)).unwrap().0
}

pub fn full_free() -> ModelVariant {
    let mut v = ModelVariant::full();
    v.pin_rho_psi_zero = false;
    v
}

pub fn context(data: &PanelDataset, variant: ModelVariant) -> FitContext {
    FitContext::new(data, moderate_priors(), variant, ScalingPolicy::Standardize).unwrap()
}

/// A tiny context and a random state drawn from its prior.
pub fn tiny_instance(seed: u64, variant: ModelVariant) -> (FitContext, ModelState) {
    let ctx = context(&tiny_panel(seed), variant);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let state = draw_from_prior(&ctx, &mut rng).unwrap();
    (ctx, state)
}

/// Variants whose conditionals take different code paths.
pub fn ratio_variants() -> Vec<ModelVariant> {
    let mut none = ModelVariant::none();
    none.pin_rho_psi_zero = false;
    let mut local = ModelVariant::none();
    local.year_effects = false;
    local.elevation_effect = false;
    vec![full_free(), none, "M2:beta0,sigma".parse().unwrap(), local]
}
