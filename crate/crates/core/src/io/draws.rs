use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{AcceptanceReport, ChainOutput};
use crate::model::{
    CovariateScaling, FixedEffects, HyperState, ModelState, ModelVariant, SiteLatents, SiteMeta,
    TemporalEffects, Units,
};

/// Everything about a chain except its draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_draws: usize,
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

impl ChainMeta {
    pub fn of(c: &ChainOutput) -> Self {
        Self {
            chain: c.chain,
            seed: c.seed,
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            n_draws: c.n_draws(),
            acceptance: c.acceptance.clone(),
            units: c.units,
            scaling: c.scaling,
            variant: c.variant,
            sites: c.sites.clone(),
            n_years: c.n_years,
            n_days: c.n_days,
            first_year: c.first_year,
            day_of_year_offset: c.day_of_year_offset,
        }
    }

    fn with_draws(&self, draws: Vec<ModelState>) -> ChainOutput {
        ChainOutput {
            chain: self.chain,
            seed: self.seed,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            draws,
            acceptance: self.acceptance.clone(),
            units: self.units,
            scaling: self.scaling,
            variant: self.variant,
            sites: self.sites.clone(),
            n_years: self.n_years,
            n_days: self.n_days,
            first_year: self.first_year,
            day_of_year_offset: self.day_of_year_offset,
        }
    }
}

/// Sidecar of a draws file: per-chain metadata and the priors used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub chains: Vec<ChainMeta>,
    pub priors: crate::model::HyperPriors,
}

impl FitRecord {
    pub fn new(chains: &[ChainOutput], priors: &crate::model::HyperPriors) -> Self {
        Self {
            chains: chains.iter().map(ChainMeta::of).collect(),
            priors: priors.clone(),
        }
    }
}

const SCALARS: [&str; 18] = [
    "beta0",
    "alpha",
    "beta1",
    "beta2",
    "beta3",
    "rho_psi",
    "sigma2_lambda",
    "sigma2_eta",
    "sigma2_beta0",
    "sigma2_alpha",
    "sigma2_rho",
    "sigma2_sig2",
    "z_rho",
    "z_sig2",
    "phi_beta0",
    "phi_alpha",
    "phi_rho",
    "phi_sig2",
];

/// Column names of one state after `chain,iter`: the scalars, four fields
/// per site, `ψ` per year and the year-site effects.
pub fn state_columns(sites: &[SiteMeta], n_years: usize, first_year: i32) -> Vec<String> {
    let mut cols: Vec<String> = SCALARS.iter().map(|s| s.to_string()).collect();
    for name in ["beta0_site", "alpha_site", "z_rho_site", "z_sig2_site"] {
        cols.extend(sites.iter().map(|s| format!("{name}[{}]", s.id)));
    }
    cols.extend((0..n_years).map(|t| format!("psi[{}]", first_year + t as i32)));
    for t in 0..n_years {
        cols.extend(
            sites
                .iter()
                .map(|s| format!("gamma[{}:{}]", first_year + t as i32, s.id)),
        );
    }
    cols
}

fn state_values(d: &ModelState) -> Vec<f64> {
    let f = &d.fixed;
    let h = &d.hyper;
    let mut v = vec![
        f.beta0,
        f.alpha,
        f.beta1,
        f.beta2,
        f.beta3,
        h.rho_psi,
        h.sigma2_lambda,
        h.sigma2_eta,
        h.sigma2_beta0,
        h.sigma2_alpha,
        h.sigma2_rho,
        h.sigma2_sig2,
        h.z_rho,
        h.z_sig2,
        h.phi_beta0,
        h.phi_alpha,
        h.phi_rho,
        h.phi_sig2,
    ];
    v.extend(&d.sites.beta0_tilde);
    v.extend(&d.sites.alpha_tilde);
    v.extend(&d.sites.z_rho);
    v.extend(&d.sites.z_sig2);
    v.extend(&d.temporal.psi);
    v.extend(&d.temporal.gamma);
    v
}

fn state_from_values(v: &[f64], n_sites: usize, n_years: usize) -> ModelState {
    let fixed = FixedEffects {
        beta0: v[0],
        alpha: v[1],
        beta1: v[2],
        beta2: v[3],
        beta3: v[4],
    };
    let hyper = HyperState {
        rho_psi: v[5],
        sigma2_lambda: v[6],
        sigma2_eta: v[7],
        sigma2_beta0: v[8],
        sigma2_alpha: v[9],
        sigma2_rho: v[10],
        sigma2_sig2: v[11],
        z_rho: v[12],
        z_sig2: v[13],
        phi_beta0: v[14],
        phi_alpha: v[15],
        phi_rho: v[16],
        phi_sig2: v[17],
    };
    let mut k = SCALARS.len();
    let mut take = |n: usize| {
        let out = v[k..k + n].to_vec();
        k += n;
        out
    };
    let sites = SiteLatents {
        beta0_tilde: take(n_sites),
        alpha_tilde: take(n_sites),
        z_rho: take(n_sites),
        z_sig2: take(n_sites),
    };
    let temporal = TemporalEffects {
        psi: take(n_years),
        gamma: take(n_years * n_sites),
        n_sites,
    };
    ModelState {
        fixed,
        sites,
        temporal,
        hyper,
    }
}

/// Wide draws CSV: `chain,iter` followed by [`state_columns`], one row per
/// retained draw. Values use the shortest representation that reads back
/// to the same bits.
pub fn write_draws_csv<W: Write>(out: W, chains: &[ChainOutput]) -> Result<()> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidConfig("no chains to write".into()))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend(state_columns(&first.sites, first.n_years, first.first_year));
    w.write_record(&header)?;
    for c in chains {
        for (k, d) in c.draws.iter().enumerate() {
            let mut row = vec![
                c.chain.to_string(),
                (c.burn_in + (k + 1) * c.thin).to_string(),
            ];
            row.extend(state_values(d).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads draws written by [`write_draws_csv`], attaching the metadata of
/// `record`.
pub fn read_draws_csv<R: Read>(input: R, record: &FitRecord) -> Result<Vec<ChainOutput>> {
    let first = record
        .chains
        .first()
        .ok_or_else(|| Error::InvalidConfig("fit record lists no chains".into()))?;
    let (n_sites, n_years) = (first.sites.len(), first.n_years);
    let mut want = vec!["chain".to_string(), "iter".to_string()];
    want.extend(state_columns(&first.sites, n_years, first.first_year));
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != want {
        return Err(Error::Parse {
            line: 1,
            msg: "draws header does not match the fit record".into(),
        });
    }
    let mut per_chain: Vec<Vec<ModelState>> = vec![Vec::new(); record.chains.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |msg: String| Error::Parse { line, msg };
        let chain: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("chain `{}`", &rec[0])))?;
        let slot = record
            .chains
            .iter()
            .position(|c| c.chain == chain)
            .ok_or_else(|| bad(format!("chain {chain} is not in the fit record")))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("value `{s}`"))))
            .collect::<Result<_>>()?;
        per_chain[slot].push(state_from_values(&vals, n_sites, n_years));
    }
    record
        .chains
        .iter()
        .zip(per_chain)
        .map(|(m, draws)| {
            if draws.len() != m.n_draws {
                return Err(Error::InvalidDataset(format!(
                    "chain {} has {} draws, record says {}",
                    m.chain,
                    draws.len(),
                    m.n_draws
                )));
            }
            Ok(m.with_draws(draws))
        })
        .collect()
}
