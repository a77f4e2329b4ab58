//! Domain types: the data panel, parameter state, priors and variants.

mod dataset;
mod design;
mod priors;
mod state;
mod variant;

pub use dataset::{PanelDataset, SiteMeta, SiteSeries, MJJAS_DAYS};
pub(crate) use design::build_design_dims;
pub use design::{
    build_design, rescale_posterior, rescale_state, Affine, CovariateScaling, Design,
    HarmonicBasis, ScalingPolicy, Units,
};
pub use priors::{HyperPriors, InverseGammaPrior, NormalPrior, PhiPrior, PhiSupport};
pub use state::{
    rho_from_z, z_from_rho, FixedEffects, GpField, HyperState, ModelState, SiteLatents,
    TemporalEffects,
};
pub use variant::ModelVariant;
