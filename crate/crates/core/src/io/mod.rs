//! Files in and out: panel ingest, run configuration, posterior draws and
//! summaries.

mod config;
mod draws;
mod ingest;
mod summary;

pub use config::RunConfig;
pub use draws::{read_draws_csv, state_columns, write_draws_csv, ChainMeta, FitRecord};
pub use ingest::{
    ingest, project_lon_lat, read_observations, read_sites, window_day, write_observations_csv,
    write_sites_csv, IngestReport, SiteFormat,
};
pub use summary::{
    local_summary, reported_scalars, summarize, write_param_csv, ParamSummary, PosteriorSummary,
};
