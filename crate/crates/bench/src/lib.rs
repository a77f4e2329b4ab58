//! Fixtures shared by the benchmarks in `benches/`.

use tmax_core::synth::{simulate_panel, SiteLayout};
use tmax_core::{GeneratorSpec, PanelDataset};

/// Synthetic panel on a grid of `n_sites` stations, from the first seed
/// whose draw passes the dataset range check.
pub fn panel(n_sites: usize, n_years: usize, n_days: usize) -> PanelDataset {
    let base = GeneratorSpec {
        layout: SiteLayout::Grid {
            n: n_sites,
            spacing_km: 40.0,
            elev_min: 200.0,
            elev_max: 1000.0,
        },
        n_years,
        n_days,
        ..GeneratorSpec::default()
    };
    (1..100)
        .find_map(|seed| {
            simulate_panel(&GeneratorSpec {
                seed,
                ..base.clone()
            })
            .ok()
        })
        .expect("a seed within range")
        .0
}
