//! Posterior prediction at unobserved locations: Bayesian kriging of the
//! site fields, composition sampling of daily series, day-1 seeding and
//! gap imputation.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::ChainOutput;
use crate::model::{
    rho_from_z, CovariateScaling, Design, GpField, ModelState, ModelVariant, PanelDataset,
    SiteMeta, Units,
};
use crate::spatial::{default_phi, exp_correlation, CorrelationMatrix, KrigingWeights};
use crate::stats::{quantile_sorted, std_normal};

/// Lower and upper probabilities of the reported predictive interval.
pub const INTERVAL: (f64, f64) = (0.05, 0.95);

/// A `(year, day)` cell, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub year: usize,
    pub day: usize,
}

/// `B` replicate series at one location over a set of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub site: SiteMeta,
    pub first_year: i32,
    pub cells: Vec<Cell>,
    n_replicates: usize,
    /// Laid out `[b][cell]`.
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PredictiveSamples {
    pub fn new(
        site: SiteMeta,
        first_year: i32,
        cells: Vec<Cell>,
        n_replicates: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_replicates == 0 {
            return Err(Error::InsufficientDraws {
                required: 1,
                available: 0,
            });
        }
        if values.len() != n_replicates * cells.len() {
            return Err(Error::InvalidConfig(format!(
                "{} values for {} replicates of {} cells",
                values.len(),
                n_replicates,
                cells.len()
            )));
        }
        Ok(Self {
            site,
            first_year,
            cells,
            n_replicates,
            values,
        })
    }

    pub fn n_replicates(&self) -> usize {
        self.n_replicates
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn replicate(&self, b: usize) -> &[f64] {
        let n = self.cells.len();
        &self.values[b * n..(b + 1) * n]
    }

    /// The `B` replicate values of cell `c`.
    pub fn cell_samples(&self, c: usize) -> Vec<f64> {
        let n = self.cells.len();
        (0..self.n_replicates)
            .map(|b| self.values[b * n + c])
            .collect()
    }

    pub fn mean(&self, c: usize) -> f64 {
        crate::stats::mean(&self.cell_samples(c))
    }

    /// Empirical 5th and 95th percentiles of cell `c`.
    pub fn interval(&self, c: usize) -> (f64, f64) {
        let mut s = self.cell_samples(c);
        s.sort_by(f64::total_cmp);
        (
            quantile_sorted(&s, INTERVAL.0),
            quantile_sorted(&s, INTERVAL.1),
        )
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        (0..self.cells.len())
            .map(|c| {
                let (lower, upper) = self.interval(c);
                CellSummary {
                    cell: self.cells[c],
                    mean: self.mean(c),
                    lower,
                    upper,
                }
            })
            .collect()
    }

    pub fn cell_index(&self, cell: Cell) -> Option<usize> {
        self.cells.iter().position(|c| *c == cell)
    }

    /// Per-cell summary CSV, header `year,day,mean,lower,upper`, with the
    /// calendar year and the 1-based day of the window.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["year", "day", "mean", "lower", "upper"])?;
        for s in self.summaries() {
            w.write_record([
                (self.first_year + s.cell.year as i32).to_string(),
                (s.cell.day + 1).to_string(),
                s.mean.to_string(),
                s.lower.to_string(),
                s.upper.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long replicate CSV, header `replicate,year,day,value`.
    pub fn write_replicates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "year", "day", "value"])?;
        for b in 0..self.n_replicates {
            for (c, v) in self.cells.iter().zip(self.replicate(b)) {
                w.write_record([
                    (b + 1).to_string(),
                    (self.first_year + c.year as i32).to_string(),
                    (c.day + 1).to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Pooled posterior draws of one or more chains fitted to the same panel,
/// with the covariates they were fitted on.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    pub draws: Vec<&'a ModelState>,
    pub sites: &'a [SiteMeta],
    pub variant: ModelVariant,
    pub scaling: CovariateScaling,
    pub design: Design,
    pub first_year: i32,
    pub n_years: usize,
    pub n_days: usize,
}

impl<'a> Posterior<'a> {
    pub fn new(chains: &'a [ChainOutput]) -> Result<Self> {
        let first = chains
            .first()
            .ok_or_else(|| Error::InvalidConfig("no chains given".into()))?;
        for c in chains {
            if c.units != Units::Model {
                return Err(Error::InvalidConfig(
                    "prediction needs draws on the model scale".into(),
                ));
            }
            if c.sites != first.sites || c.n_years != first.n_years || c.n_days != first.n_days {
                return Err(Error::InvalidConfig(
                    "chains were fitted to different panels".into(),
                ));
            }
        }
        let draws: Vec<&ModelState> = chains.iter().flat_map(|c| c.draws.iter()).collect();
        if draws.is_empty() {
            return Err(Error::InsufficientDraws {
                required: 1,
                available: 0,
            });
        }
        Ok(Self {
            draws,
            sites: &first.sites,
            variant: first.variant,
            scaling: first.scaling,
            design: first.design(),
            first_year: first.first_year,
            n_years: first.n_years,
            n_days: first.n_days,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Kriging weights for `s0`, one set per distinct decay in the draws.
struct WeightCache {
    by_phi: HashMap<u64, KrigingWeights>,
}

impl WeightCache {
    fn build(post: &Posterior<'_>, s0: &SiteMeta) -> Result<Self> {
        let mut by_phi = HashMap::new();
        for d in &post.draws {
            for f in post.variant.gp_fields() {
                let phi = d.field_phi(f);
                if let std::collections::hash_map::Entry::Vacant(e) = by_phi.entry(phi.to_bits()) {
                    let corr: CorrelationMatrix = exp_correlation(post.sites, phi)?;
                    e.insert(KrigingWeights::for_location(&corr, post.sites, s0));
                }
            }
        }
        Ok(Self { by_phi })
    }

    fn get(&self, phi: f64) -> &KrigingWeights {
        &self.by_phi[&phi.to_bits()]
    }
}

/// Conditional law of latent field `f` at `s0` under one draw: the field's
/// value at a coincident site, the global value when the variant has no
/// process, and the Gaussian kriging conditional otherwise.
fn field_conditional(
    draw: &ModelState,
    variant: &ModelVariant,
    f: GpField,
    cache: &WeightCache,
) -> (f64, f64) {
    if !variant.has_gp(f) {
        return (draw.field_mean(f), 0.0);
    }
    cache.get(draw.field_phi(f)).conditional(
        draw.field(f),
        draw.field_mean(f),
        draw.field_variance(f),
    )
}

/// One latent draw of field `f` at `s0` per posterior draw, on the latent
/// scale (`Z` for the autocorrelation and noise-variance fields).
pub fn krige_latent(
    post: &Posterior<'_>,
    f: GpField,
    s0: &SiteMeta,
    seed: u64,
) -> Result<Vec<f64>> {
    let cache = WeightCache::build(post, s0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(post
        .draws
        .iter()
        .map(|d| {
            let (m, v) = field_conditional(d, &post.variant, f, &cache);
            if v > 0.0 {
                m + v.sqrt() * std_normal(&mut rng)
            } else {
                m
            }
        })
        .collect())
}

/// Like [`krige_latent`] but on the natural scale: `ρY` for the
/// autocorrelation field and `σε²` for the noise field.
pub fn krige_field_draw(
    post: &Posterior<'_>,
    f: GpField,
    s0: &SiteMeta,
    seed: u64,
) -> Result<Vec<f64>> {
    let z = krige_latent(post, f, s0, seed)?;
    Ok(match f {
        GpField::Rho => z.into_iter().map(rho_from_z).collect(),
        GpField::Sig2 => z.into_iter().map(f64::exp).collect(),
        _ => z,
    })
}

/// Ordinary-kriging weights (summing to one) of the sites for location
/// `s0` under correlation `exp(−φ d)`.
pub fn ordinary_kriging_weights(sites: &[SiteMeta], s0: &SiteMeta, phi: f64) -> Result<Vec<f64>> {
    let n = sites.len();
    if n == 0 {
        return Err(Error::InvalidConfig("ordinary kriging needs sites".into()));
    }
    if let Some(i) = sites.iter().position(|s| s.distance(s0) == 0.0) {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        return Ok(w);
    }
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut b = DVector::zeros(n + 1);
    for j in 0..n {
        for k in 0..n {
            a[(j, k)] = (-phi * sites[j].distance(&sites[k])).exp();
        }
        a[(j, n)] = 1.0;
        a[(n, j)] = 1.0;
        b[j] = (-phi * sites[j].distance(s0)).exp();
    }
    b[n] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Factorization("singular ordinary-kriging system".into()))?;
    Ok(sol.iter().take(n).copied().collect())
}

/// Estimated day-1 value of year `t` at `s0` by ordinary kriging of that
/// year's observed day-1 values, with decay `3 / d_max` over the panel's
/// sites.
///
/// The sill (empirical variance of the day-1 values) scales the kriging
/// variance only; the weights do not depend on it.
pub fn seed_day1(data: &PanelDataset, s0: &SiteMeta, t: usize) -> Result<f64> {
    if t >= data.n_years() {
        return Err(Error::InvalidConfig(format!("year index {t} out of range")));
    }
    let mut sites = Vec::new();
    let mut vals = Vec::new();
    for (i, s) in data.sites().iter().enumerate() {
        if let Some(v) = data.value(t, 0, i) {
            sites.push(s.clone());
            vals.push(v);
        }
    }
    if vals.is_empty() {
        return Err(Error::InsufficientDraws {
            required: 1,
            available: 0,
        });
    }
    if let Some(i) = sites.iter().position(|s| s.distance(s0) == 0.0) {
        return Ok(vals[i]);
    }
    if vals.len() == 1 {
        return Ok(vals[0]);
    }
    let phi = default_phi(data.sites())?;
    let w = ordinary_kriging_weights(&sites, s0, phi)?;
    Ok(w.iter().zip(&vals).map(|(w, v)| w * v).sum())
}

/// How day-1 values of predicted years are obtained.
#[derive(Debug, Clone, Copy)]
pub enum Day1<'a> {
    /// Ordinary kriging of the panel's day-1 values.
    Kriged(&'a PanelDataset),
    /// Given values, one per year of the fitted panel.
    Given(&'a [f64]),
}

impl Day1<'_> {
    fn value(&self, s0: &SiteMeta, t: usize) -> Result<f64> {
        match self {
            Day1::Kriged(d) => seed_day1(d, s0, t),
            Day1::Given(v) => v
                .get(t)
                .copied()
                .ok_or_else(|| Error::InvalidConfig(format!("no day-1 value for year {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictOptions {
    /// Number of replicates; defaults to the number of posterior draws,
    /// cycling through the draws when larger.
    pub replicates: Option<usize>,
    pub seed: u64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            replicates: None,
            seed: 1,
        }
    }
}

/// Site-level quantities of one posterior draw at `s0`.
struct SiteDraw {
    beta0: f64,
    alpha: f64,
    rho: f64,
    sd: f64,
}

fn site_draw(
    draw: &ModelState,
    variant: &ModelVariant,
    cache: &WeightCache,
    rng: &mut ChaCha8Rng,
) -> SiteDraw {
    let mut vals = [0.0; 4];
    for f in GpField::ALL {
        let (m, v) = field_conditional(draw, variant, f, cache);
        vals[f.index()] = if v > 0.0 {
            m + v.sqrt() * std_normal(rng)
        } else {
            m
        };
    }
    SiteDraw {
        beta0: vals[GpField::Beta0.index()],
        alpha: vals[GpField::Alpha.index()],
        rho: rho_from_z(vals[GpField::Rho.index()]),
        sd: (0.5 * vals[GpField::Sig2.index()]).exp(),
    }
}

fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

/// Composition sampling of the daily series at `s0` for the given years
/// (0-based), days 2 through `through_day` (1-based, inclusive). For each
/// posterior draw the site fields are kriged once and shared by all years;
/// each year draws its own year-site effect and runs the daily recursion
/// from its day-1 value.
pub fn compose_series(
    post: &Posterior<'_>,
    s0: &SiteMeta,
    years: &[usize],
    through_day: usize,
    day1: Day1<'_>,
    opts: PredictOptions,
) -> Result<PredictiveSamples> {
    if through_day < 2 || through_day > post.n_days {
        return Err(Error::InvalidConfig(format!(
            "through-day must lie in [2, {}]",
            post.n_days
        )));
    }
    if let Some(&t) = years.iter().find(|&&t| t >= post.n_years) {
        return Err(Error::InvalidConfig(format!(
            "year index {t} beyond the fitted panel"
        )));
    }
    let seeds: Vec<f64> = years
        .iter()
        .map(|&t| day1.value(s0, t))
        .collect::<Result<_>>()?;
    let cells: Vec<Cell> = years
        .iter()
        .flat_map(|&t| (1..through_day).map(move |l| Cell { year: t, day: l }))
        .collect();
    let n_rep = opts.replicates.unwrap_or(post.len());
    let elev = post.scaling.elev.apply(s0.elevation);
    let d = &post.design;
    let cache = WeightCache::build(post, s0)?;

    let reps: Vec<Vec<f64>> = (0..n_rep)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let draw = post.draws[b % post.len()];
            let mut rng = replicate_rng(opts.seed, b);
            let sd = site_draw(draw, &post.variant, &cache, &mut rng);
            let f = &draw.fixed;
            let mu = |l: usize| f.beta1 * d.sin[l] + f.beta2 * d.cos[l] + f.beta3 * elev;
            let eta_sd = draw.hyper.sigma2_eta.sqrt();
            let mut out = Vec::with_capacity(years.len() * (through_day - 1));
            for (k, &t) in years.iter().enumerate() {
                let g = sd.beta0
                    + sd.alpha * d.time[t]
                    + draw.temporal.psi[t]
                    + eta_sd * std_normal(&mut rng);
                let mut dev = seeds[k] - mu(0) - g;
                for l in 1..through_day {
                    dev = sd.rho * dev + sd.sd * std_normal(&mut rng);
                    out.push(mu(l) + g + dev);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    PredictiveSamples::new(s0.clone(), post.first_year, cells, n_rep, reps.concat())
}

/// Predictive series at `s0` for every fitted year, days 2 through L.
pub fn predict_panel(
    post: &Posterior<'_>,
    s0: &SiteMeta,
    day1: Day1<'_>,
    opts: PredictOptions,
) -> Result<PredictiveSamples> {
    let years: Vec<usize> = (0..post.n_years).collect();
    compose_series(post, s0, &years, post.n_days, day1, opts)
}

/// Replicates for the missing cells of site `i` of `data`.
///
/// Each gap is filled forward from the last observed value before it. A gap
/// at the start of a year is seeded with the ordinary-kriging day-1 value
/// of the other sites, which is then itself reported for that cell. When
/// the site was part of the fit its year-site effects are taken from the
/// draws; otherwise they are drawn afresh.
pub fn impute_missing(
    post: &Posterior<'_>,
    data: &PanelDataset,
    i: usize,
    opts: PredictOptions,
) -> Result<PredictiveSamples> {
    if i >= data.n_sites() {
        return Err(Error::InvalidConfig(format!("site index {i} out of range")));
    }
    if data.n_years() != post.n_years || data.n_days() != post.n_days {
        return Err(Error::InvalidConfig(
            "panel does not match the fitted shape".into(),
        ));
    }
    let s0 = data.sites()[i].clone();
    let series = data.site_series(i);
    let cells: Vec<Cell> = series
        .missing_cells()
        .into_iter()
        .map(|(t, l)| Cell { year: t, day: l })
        .collect();
    let n_rep = opts.replicates.unwrap_or(post.len());
    if cells.is_empty() {
        return PredictiveSamples::new(s0, post.first_year, cells, n_rep, Vec::new());
    }
    let fitted = post.sites.iter().position(|s| s.id == s0.id);
    let others = data.without_site(i).ok();
    let mut seeds = HashMap::new();
    for c in cells.iter().filter(|c| c.day == 0) {
        let d = others
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no other site to seed day 1".into()))?;
        seeds.insert(c.year, seed_day1(d, &s0, c.year)?);
    }
    let years: Vec<usize> = {
        let mut y: Vec<usize> = cells.iter().map(|c| c.year).collect();
        y.dedup();
        y
    };
    let elev = post.scaling.elev.apply(s0.elevation);
    let d = &post.design;
    let cache = WeightCache::build(post, &s0)?;

    let reps: Vec<Vec<f64>> = (0..n_rep)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let draw = post.draws[b % post.len()];
            let mut rng = replicate_rng(opts.seed, b);
            let sd = site_draw(draw, &post.variant, &cache, &mut rng);
            let f = &draw.fixed;
            let mu = |l: usize| f.beta1 * d.sin[l] + f.beta2 * d.cos[l] + f.beta3 * elev;
            let eta_sd = draw.hyper.sigma2_eta.sqrt();
            let mut out = Vec::with_capacity(cells.len());
            for &t in &years {
                let g = match fitted {
                    Some(k) => draw.temporal.gamma(t, k),
                    None => {
                        sd.beta0
                            + sd.alpha * d.time[t]
                            + draw.temporal.psi[t]
                            + eta_sd * std_normal(&mut rng)
                    }
                };
                let mut dev = 0.0;
                for l in 0..post.n_days {
                    match series.get(t, l) {
                        Some(y) => dev = y - mu(l) - g,
                        None if l == 0 => {
                            let y = seeds[&t];
                            dev = y - mu(0) - g;
                            out.push(y);
                        }
                        None => {
                            dev = sd.rho * dev + sd.sd * std_normal(&mut rng);
                            out.push(mu(l) + g + dev);
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    PredictiveSamples::new(s0, post.first_year, cells, n_rep, reps.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{run_chain, ChainConfig, FitContext};
    use crate::model::{HyperPriors, ScalingPolicy};
    use crate::spatial::KrigingSystem;
    use crate::synth::{simulate_panel, GeneratorSpec, SiteLayout};

    fn line_sites() -> Vec<SiteMeta> {
        vec![
            SiteMeta::new("a", 0.0, 0.0, 100.0),
            SiteMeta::new("b", 10.0, 0.0, 200.0),
            SiteMeta::new("c", 4.0, 7.0, 300.0),
        ]
    }

    #[test]
    fn ordinary_kriging_matches_direct_solve() {
        let sites = line_sites();
        let s0 = SiteMeta::new("n", 3.0, 2.0, 0.0);
        let phi = 0.2;
        let w = ordinary_kriging_weights(&sites, &s0, phi).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Oracle: λ = R⁻¹(r0 − 1 m) with m = (1ᵀR⁻¹r0 − 1) / 1ᵀR⁻¹1.
        let r = exp_correlation(&sites, phi).unwrap();
        let r0: Vec<f64> = sites
            .iter()
            .map(|s| (-phi * s.distance(&s0)).exp())
            .collect();
        let rinv = r.factor().inverse();
        let one = DVector::from_element(3, 1.0);
        let r0v = DVector::from_column_slice(&r0);
        let m = (one.dot(&(&rinv * &r0v)) - 1.0) / one.dot(&(&rinv * &one));
        let want = &rinv * (r0v - one * m);
        for k in 0..3 {
            assert!((w[k] - want[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn seed_day1_exact_and_unbiased() {
        let sites = line_sites();
        let vals = vec![21.0, 22.5, 19.0, 25.0, 25.0, 25.0];
        let data = PanelDataset::new(sites.clone(), 1, 2, vals, 2000, 0).unwrap();
        assert_eq!(seed_day1(&data, &sites[1], 0).unwrap(), 22.5);
        let flat = PanelDataset::new(sites, 1, 1, vec![17.25; 3], 2000, 0).unwrap();
        let v = seed_day1(&flat, &SiteMeta::new("n", 50.0, -3.0, 0.0), 0).unwrap();
        assert!((v - 17.25).abs() < 1e-10);
    }

    #[test]
    fn seed_day1_all_missing_is_error() {
        let data = PanelDataset::new(line_sites(), 1, 1, vec![f64::NAN; 3], 2000, 0).unwrap();
        assert!(seed_day1(&data, &SiteMeta::new("n", 1.0, 1.0, 0.0), 0).is_err());
    }

    #[test]
    fn kriging_weights_match_joint_oracle() {
        let sites = line_sites();
        let s0 = SiteMeta::new("n", 2.0, 3.0, 0.0);
        let (phi, m, s2) = (0.15, 1.3, 2.4);
        let x = [0.7, 2.1, 1.9];
        let corr = exp_correlation(&sites, phi).unwrap();
        let w = KrigingWeights::for_location(&corr, &sites, &s0);
        let got = w.conditional(&x, m, s2);
        let sys = KrigingSystem {
            mu0: m,
            mu: vec![m; 3],
            sigma00: s2,
            sigma_i0: sites
                .iter()
                .map(|s| s2 * (-phi * s.distance(&s0)).exp())
                .collect(),
            sigma: corr.matrix() * s2,
            w: x.to_vec(),
        };
        let want = sys.conditional().unwrap();
        assert!((got.0 - want.0).abs() < 1e-10 && (got.1 - want.1).abs() < 1e-10);
    }

    fn fitted() -> (PanelDataset, Vec<ChainOutput>) {
        let spec = GeneratorSpec {
            layout: SiteLayout::Grid {
                n: 4,
                spacing_km: 30.0,
                elev_min: 200.0,
                elev_max: 800.0,
            },
            n_years: 3,
            n_days: 12,
            ..GeneratorSpec::default()
        };
        let (data, _) = simulate_panel(&spec).unwrap();
        let ctx = FitContext::new(
            &data,
            HyperPriors::default(),
            ModelVariant::full(),
            ScalingPolicy::Standardize,
        )
        .unwrap();
        let out = run_chain(&ctx, &ChainConfig::new(300, 100, 4, 3), 0).unwrap();
        (data, vec![out])
    }

    #[test]
    fn kriging_exact_at_observed_sites() {
        let (data, chains) = fitted();
        let post = Posterior::new(&chains).unwrap();
        for (i, s) in data.sites().iter().enumerate() {
            for f in GpField::ALL {
                let got = krige_latent(&post, f, s, 9).unwrap();
                for (b, d) in post.draws.iter().enumerate() {
                    assert_eq!(got[b].to_bits(), d.field(f)[i].to_bits());
                }
            }
        }
    }

    #[test]
    fn transformed_fields_in_range() {
        let (_, chains) = fitted();
        let post = Posterior::new(&chains).unwrap();
        let s0 = SiteMeta::new("n", 15.0, 12.0, 500.0);
        assert!(krige_field_draw(&post, GpField::Rho, &s0, 1)
            .unwrap()
            .iter()
            .all(|r| r.abs() < 1.0));
        assert!(krige_field_draw(&post, GpField::Sig2, &s0, 1)
            .unwrap()
            .iter()
            .all(|v| *v > 0.0));
    }

    #[test]
    fn compose_is_deterministic_and_shaped() {
        let (data, chains) = fitted();
        let post = Posterior::new(&chains).unwrap();
        let s0 = SiteMeta::new("n", 15.0, 12.0, 500.0);
        let opts = PredictOptions {
            replicates: Some(30),
            seed: 4,
        };
        let a = compose_series(&post, &s0, &[0, 2], 12, Day1::Kriged(&data), opts).unwrap();
        let b = compose_series(&post, &s0, &[0, 2], 12, Day1::Kriged(&data), opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_cells(), 22);
        assert_eq!(a.n_replicates(), 30);
        for c in 0..a.n_cells() {
            let (lo, hi) = a.interval(c);
            assert!(lo <= hi);
        }
    }

    #[test]
    fn impute_without_gaps_is_empty() {
        let (data, chains) = fitted();
        let post = Posterior::new(&chains).unwrap();
        let out = impute_missing(&post, &data, 1, PredictOptions::default()).unwrap();
        assert!(out.is_empty());
    }
}
