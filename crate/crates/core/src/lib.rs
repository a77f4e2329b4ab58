//! Hierarchical Bayesian space-time model for daily maximum temperatures.
//!
//! Daily values at a set of stations follow a within-year autoregression
//! around a seasonal mean, with site-year effects driven by yearly effects
//! and spatially varying intercept and trend surfaces. The autoregressive
//! coefficient and the noise variance also vary in space. Fitting is done by
//! Metropolis-within-Gibbs ([`gibbs`]); prediction at new sites uses
//! Bayesian kriging and composition sampling ([`predict`]).

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod local;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use diagnostics::DiagnosticsReport;
pub use error::{Error, Result};
pub use gibbs::{run_chain, run_chains, ChainConfig, ChainOutput, FitContext};
pub use io::RunConfig;
pub use metrics::{ChangeSummary, LoocvTable, SiteScore};
pub use model::{
    CovariateScaling, FixedEffects, GpField, HyperPriors, HyperState, ModelState, ModelVariant,
    PanelDataset, PhiPrior, ScalingPolicy, SiteLatents, SiteMeta, SiteSeries, TemporalEffects,
    Units,
};
pub use predict::{Posterior, PredictiveSamples};
pub use synth::{GeneratorSpec, TruthParams};
