//! Metropolis-within-Gibbs sampler.

mod conditionals;
mod context;
mod init;
mod joint;
mod mh;
mod workspace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use conditionals::{
    coefficient_conditional, combine_normals, field_mean_conditional, gamma_conditional,
    gibbs_sweep, phi_log_weights, psi_conditional, rho_psi_conditional, site_field_conditional,
    update_gamma, update_global_means, update_phi_discrete, update_psi, update_rho_psi,
    update_site_gaussian_fields, update_site_latents_mh, update_variances, variance_conditional,
    z_rho_global_log_target, z_rho_log_target, z_sig2_global_log_target, z_sig2_log_target,
    Coefficient, VarianceParam,
};
pub use context::{FitContext, PhiTable};
pub use init::initial_state;
pub use joint::log_joint;
pub use mh::{AcceptanceReport, MhFamily, MhTuner};
pub use workspace::{ArSums, ResidualWorkspace};

use crate::error::{Error, Result};
use crate::model::{
    CovariateScaling, Design, HarmonicBasis, ModelState, ModelVariant, SiteMeta, Units,
};

/// Iteration budget and seed of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations per adaptation window of the MH proposal scales.
    pub adapt_window: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 200_000,
            burn_in: 100_000,
            thin: 100,
            seed: 1,
            adapt_window: 100,
        }
    }
}

impl ChainConfig {
    pub fn new(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in,
            thin,
            seed,
            adapt_window: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in > self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in {} exceeds iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn expected_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// Seed of chain `chain`: the base seed XOR the chain index.
    pub fn chain_seed(&self, chain: usize) -> u64 {
        self.seed ^ chain as u64
    }
}

/// Retained draws of one chain with the metadata needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub draws: Vec<ModelState>,
    pub acceptance: AcceptanceReport,
    pub units: Units,
    pub scaling: CovariateScaling,
    pub variant: ModelVariant,
    pub sites: Vec<SiteMeta>,
    pub n_years: usize,
    pub n_days: usize,
    pub first_year: i32,
    pub day_of_year_offset: u32,
}

impl ChainOutput {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    /// Model-scale covariates the chain was fitted with.
    pub fn design(&self) -> Design {
        let basis = HarmonicBasis::new(self.n_days, self.day_of_year_offset);
        Design::from_parts(self.n_years, &basis, &self.sites, self.scaling)
    }

    /// Names of the scalar parameters moved by the sampler.
    pub fn scalar_names(&self) -> Vec<&'static str> {
        match self.draws.first() {
            Some(d) => d
                .named_scalars(&self.variant)
                .into_iter()
                .map(|(n, _)| n)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Trace of one named scalar.
    pub fn scalar_trace(&self, name: &str) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.draws.len());
        for d in &self.draws {
            let v = d
                .named_scalars(&self.variant)
                .into_iter()
                .find(|(n, _)| *n == name)?
                .1;
            out.push(v);
        }
        Some(out)
    }
}

/// Runs one chain from the deterministic initial state.
pub fn run_chain(ctx: &FitContext, cfg: &ChainConfig, chain: usize) -> Result<ChainOutput> {
    let init = initial_state(ctx)?;
    run_chain_from(ctx, cfg, chain, init, None)
}

/// Runs one chain from `init`. With `tuner` given, its proposal scales are
/// used (and adapted during burn-in only if it is still adapting).
pub fn run_chain_from(
    ctx: &FitContext,
    cfg: &ChainConfig,
    chain: usize,
    init: ModelState,
    tuner: Option<MhTuner>,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let seed = cfg.chain_seed(chain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = init;
    state
        .check_invariants()
        .map_err(|what| Error::NonFinite { iteration: 0, what })?;
    let mut ws = ResidualWorkspace::new(ctx, &state);
    let mut tuner = tuner.unwrap_or_else(|| MhTuner::initial(ctx, &state, cfg.adapt_window));
    let mut draws = Vec::with_capacity(cfg.expected_draws());

    for iter in 0..cfg.iterations {
        if iter == cfg.burn_in {
            tuner.freeze();
        }
        gibbs_sweep(ctx, &mut ws, &mut state, &mut tuner, &mut rng)?;
        tuner.end_iteration(iter);
        state.check_invariants().map_err(|what| Error::NonFinite {
            iteration: iter + 1,
            what,
        })?;
        if iter >= cfg.burn_in && (iter - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            draws.push(state.clone());
        }
    }
    if cfg.burn_in == cfg.iterations {
        tuner.freeze();
    }

    Ok(ChainOutput {
        chain,
        seed,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        draws,
        acceptance: tuner.report(),
        units: Units::Model,
        scaling: ctx.design.scaling,
        variant: ctx.variant,
        sites: ctx.sites.clone(),
        n_years: ctx.n_years,
        n_days: ctx.n_days,
        first_year: ctx.first_year,
        day_of_year_offset: ctx.day_of_year_offset,
    })
}

/// Runs `n_chains` independent chains in parallel; results are ordered by
/// chain index and do not depend on the thread count.
pub fn run_chains(
    ctx: &FitContext,
    cfg: &ChainConfig,
    n_chains: usize,
) -> Result<Vec<ChainOutput>> {
    if n_chains == 0 {
        return Err(Error::InvalidConfig("need at least one chain".into()));
    }
    (0..n_chains)
        .into_par_iter()
        .map(|c| run_chain(ctx, cfg, c))
        .collect()
}

/// All draws of all chains, in chain order.
pub fn pooled_draws(chains: &[ChainOutput]) -> Vec<&ModelState> {
    chains.iter().flat_map(|c| c.draws.iter()).collect()
}
