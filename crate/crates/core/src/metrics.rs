//! Predictive scores, the leave-one-site-out harness over model variants,
//! and window-to-window change summaries.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{run_chains, ChainConfig, FitContext};
use crate::model::{HyperPriors, ModelVariant, PanelDataset, ScalingPolicy, SiteSeries};
use crate::predict::{predict_panel, Day1, Posterior, PredictOptions, PredictiveSamples};
use crate::stats::{mean, sample_variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteScore {
    pub site: String,
    pub rmse: f64,
    pub mae: f64,
    pub crps: f64,
    pub cvg: f64,
    /// Number of scored cells.
    pub cells: usize,
}

/// Sample CRPS of an ensemble against `y`:
/// `(1/B) Σ|x_b − y| − (1/2B²) Σ_b Σ_b' |x_b − x_b'|`.
pub fn crps_ensemble(samples: &[f64], y: f64) -> f64 {
    let b = samples.len() as f64;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let abs_err = s.iter().map(|x| (x - y).abs()).sum::<f64>() / b;
    // Σ_b Σ_b' |x_b − x_b'| = 2 Σ_k (2k − B − 1) x_(k) for sorted x, k 1-based.
    let spread: f64 = s
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * (k as f64 + 1.0) - b - 1.0) * x)
        .sum::<f64>()
        * 2.0;
    abs_err - spread / (2.0 * b * b)
}

/// Scores `pred` against the observed `truth` over predicted cells from
/// day 2 on whose truth is present.
pub fn score_site(pred: &PredictiveSamples, truth: &SiteSeries) -> Result<SiteScore> {
    if pred.n_replicates() == 0 {
        return Err(Error::InsufficientDraws {
            required: 1,
            available: 0,
        });
    }
    let (mut se, mut ae, mut crps, mut hit, mut n) = (0.0, 0.0, 0.0, 0usize, 0usize);
    for (c, cell) in pred.cells.iter().enumerate() {
        if cell.day == 0 || cell.year >= truth.n_years || cell.day >= truth.n_days {
            continue;
        }
        let Some(y) = truth.get(cell.year, cell.day) else {
            continue;
        };
        let samples = pred.cell_samples(c);
        let m = mean(&samples);
        let (lo, hi) = pred.interval(c);
        se += (m - y).powi(2);
        ae += (m - y).abs();
        crps += crps_ensemble(&samples, y);
        hit += usize::from(lo <= y && y <= hi);
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidDataset(format!(
            "no observed cells to score at site {}",
            truth.site.id
        )));
    }
    let nf = n as f64;
    Ok(SiteScore {
        site: truth.site.id.clone(),
        rmse: (se / nf).sqrt(),
        mae: ae / nf,
        crps: crps / nf,
        cvg: hit as f64 / nf,
        cells: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvConfig {
    pub chain: ChainConfig,
    pub chains: usize,
    pub scaling: ScalingPolicy,
    /// Replicates per prediction; `None` uses every pooled draw.
    pub replicates: Option<usize>,
}

impl Default for LoocvConfig {
    fn default() -> Self {
        Self {
            chain: ChainConfig::new(2_000, 1_000, 10, 1),
            chains: 1,
            scaling: ScalingPolicy::Standardize,
            replicates: None,
        }
    }
}

/// SplitMix64 finalizer; spreads nearby seeds apart.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of fold `fold`: the base seed XOR the fold index, mixed so that
/// per-chain seeds of different folds do not coincide.
pub fn fold_seed(base: u64, fold: usize) -> u64 {
    splitmix64(base ^ fold as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvRow {
    pub variant: String,
    pub site: String,
    pub score: Option<SiteScore>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScore {
    pub rmse: f64,
    pub mae: f64,
    pub crps: f64,
    pub cvg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScores {
    pub variant: String,
    /// Arithmetic mean over the sites that scored; `None` if none did.
    pub mean: Option<MeanScore>,
    pub sites: Vec<LoocvRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvTable {
    pub variants: Vec<VariantScores>,
}

impl LoocvTable {
    pub fn mean_for(&self, label: &str) -> Option<MeanScore> {
        self.variants
            .iter()
            .find(|v| v.variant == label)
            .and_then(|v| v.mean)
    }

    pub fn failures(&self) -> usize {
        self.variants
            .iter()
            .flat_map(|v| &v.sites)
            .filter(|r| r.score.is_none())
            .count()
    }

    /// CSV with header `variant,site,rmse,mae,crps,cvg`; failed folds have
    /// empty metric fields and each variant closes with a `mean` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variant", "site", "rmse", "mae", "crps", "cvg"])?;
        for v in &self.variants {
            for r in &v.sites {
                match &r.score {
                    Some(s) => w.write_record([
                        v.variant.clone(),
                        r.site.clone(),
                        s.rmse.to_string(),
                        s.mae.to_string(),
                        s.crps.to_string(),
                        s.cvg.to_string(),
                    ])?,
                    None => w.write_record([&v.variant, &r.site, "", "", "", ""])?,
                }
            }
            match &v.mean {
                Some(m) => w.write_record([
                    v.variant.clone(),
                    "mean".into(),
                    m.rmse.to_string(),
                    m.mae.to_string(),
                    m.crps.to_string(),
                    m.cvg.to_string(),
                ])?,
                None => w.write_record([v.variant.as_str(), "mean", "", "", "", ""])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean_score(rows: &[LoocvRow]) -> Option<MeanScore> {
    let scores: Vec<&SiteScore> = rows.iter().filter_map(|r| r.score.as_ref()).collect();
    if scores.is_empty() {
        return None;
    }
    let avg =
        |f: fn(&SiteScore) -> f64| scores.iter().map(|s| f(s)).sum::<f64>() / scores.len() as f64;
    Some(MeanScore {
        rmse: avg(|s| s.rmse),
        mae: avg(|s| s.mae),
        crps: avg(|s| s.crps),
        cvg: avg(|s| s.cvg),
    })
}

/// Fits `variant` without site `fold`, predicts the held-out series from
/// day-1 values kriged from the remaining sites, and scores it.
pub fn loocv_fold(
    data: &PanelDataset,
    priors: &HyperPriors,
    variant: ModelVariant,
    cfg: &LoocvConfig,
    fold: usize,
) -> Result<SiteScore> {
    let train = data.without_site(fold)?;
    let ctx = FitContext::new(&train, priors.clone(), variant, cfg.scaling)?;
    let mut chain = cfg.chain;
    chain.seed = fold_seed(cfg.chain.seed, fold);
    let chains = run_chains(&ctx, &chain, cfg.chains)?;
    let post = Posterior::new(&chains)?;
    let s0 = &data.sites()[fold];
    let opts = PredictOptions {
        replicates: cfg.replicates,
        seed: chain.seed,
    };
    let pred = predict_panel(&post, s0, Day1::Kriged(&train), opts)?;
    score_site(&pred, &data.site_series(fold))
}

/// Leave-one-site-out comparison of `variants`. Folds run in parallel; a
/// failing fold is recorded with its error and excluded from the mean.
pub fn run_loocv(
    data: &PanelDataset,
    priors: &HyperPriors,
    variants: &[ModelVariant],
    cfg: &LoocvConfig,
) -> Result<LoocvTable> {
    let n = data.n_sites();
    if n < 2 {
        return Err(Error::InsufficientDraws {
            required: 2,
            available: n,
        });
    }
    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..n).map(move |i| (v, i)))
        .collect();
    let rows: Vec<LoocvRow> = jobs
        .par_iter()
        .map(|&(v, i)| {
            let variant = variants[v];
            let res = loocv_fold(data, priors, variant, cfg, i);
            if let Err(e) = &res {
                log::warn!(
                    "fold {} of {} failed: {e}",
                    data.sites()[i].id,
                    variant.label()
                );
            }
            LoocvRow {
                variant: variant.label(),
                site: data.sites()[i].id.clone(),
                error: res.as_ref().err().map(|e| e.to_string()),
                score: res.ok(),
            }
        })
        .collect();
    let variants = variants
        .iter()
        .enumerate()
        .map(|(v, variant)| {
            let sites = rows[v * n..(v + 1) * n].to_vec();
            VariantScores {
                variant: variant.label(),
                mean: mean_score(&sites),
                sites,
            }
        })
        .collect();
    Ok(LoocvTable { variants })
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Self {
        Self { start, end }
    }

    /// 0-based year indices of the window within a panel.
    fn indices(&self, first_year: i32, n_years: usize) -> Result<Vec<usize>> {
        let last = first_year + n_years as i32 - 1;
        if self.start > self.end || self.start < first_year || self.end > last {
            return Err(Error::InvalidConfig(format!(
                "window {}-{} outside the panel years {first_year}-{last}",
                self.start, self.end
            )));
        }
        Ok(((self.start - first_year) as usize..=(self.end - first_year) as usize).collect())
    }
}

impl std::str::FromStr for YearWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['-', ':'])
            .ok_or_else(|| Error::InvalidConfig(format!("window `{s}` is not START-END")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<i32>()
                .map_err(|_| Error::InvalidConfig(format!("bad year `{x}` in window `{s}`")))
        };
        Ok(Self::new(parse(a)?, parse(b)?))
    }
}

/// Posterior of the mean difference at a predicted site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChange {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub prob_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub site: String,
    pub mean1: f64,
    pub mean2: f64,
    /// `mean(window 2) − mean(window 1)`.
    pub delta_mean: f64,
    /// `sd(window 2) / sd(window 1)`.
    pub q_sd: f64,
    pub posterior: Option<PosteriorChange>,
}

fn window_values(series: &SiteSeries, years: &[usize]) -> Vec<f64> {
    years
        .iter()
        .flat_map(|&t| (0..series.n_days).filter_map(move |l| series.get(t, l)))
        .collect()
}

/// Change in mean and ratio of standard deviations between two windows of
/// an observed series.
pub fn change_summary(
    series: &SiteSeries,
    first_year: i32,
    w1: YearWindow,
    w2: YearWindow,
) -> Result<ChangeSummary> {
    let a = window_values(series, &w1.indices(first_year, series.n_years)?);
    let b = window_values(series, &w2.indices(first_year, series.n_years)?);
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "site {} has too few observed values in a window",
            series.site.id
        )));
    }
    let (sd1, sd2) = (sample_variance(&a).sqrt(), sample_variance(&b).sqrt());
    if !(sd1 > 0.0) {
        return Err(Error::Degenerate(format!(
            "zero spread in window 1 at {}",
            series.site.id
        )));
    }
    let (m1, m2) = (mean(&a), mean(&b));
    Ok(ChangeSummary {
        site: series.site.id.clone(),
        mean1: m1,
        mean2: m2,
        delta_mean: m2 - m1,
        q_sd: sd2 / sd1,
        posterior: None,
    })
}

/// Change summary of predictive replicates: point values from the
/// per-cell predictive means, plus the posterior sample of the mean
/// difference (one value per replicate).
pub fn change_summary_predictive(
    pred: &PredictiveSamples,
    w1: YearWindow,
    w2: YearWindow,
) -> Result<ChangeSummary> {
    let n_years = pred.cells.iter().map(|c| c.year + 1).max().unwrap_or(0);
    let y1 = w1.indices(pred.first_year, n_years)?;
    let y2 = w2.indices(pred.first_year, n_years)?;
    let sel = |ys: &[usize]| -> Vec<usize> {
        (0..pred.n_cells())
            .filter(|&c| ys.contains(&pred.cells[c].year))
            .collect()
    };
    let (c1, c2) = (sel(&y1), sel(&y2));
    if c1.len() < 2 || c2.len() < 2 {
        return Err(Error::InvalidConfig(
            "a window holds no predicted cells".into(),
        ));
    }
    let mut deltas = Vec::with_capacity(pred.n_replicates());
    for b in 0..pred.n_replicates() {
        let r = pred.replicate(b);
        let m = |cs: &[usize]| cs.iter().map(|&c| r[c]).sum::<f64>() / cs.len() as f64;
        deltas.push(m(&c2) - m(&c1));
    }
    let means: Vec<f64> = (0..pred.n_cells()).map(|c| pred.mean(c)).collect();
    let pick = |cs: &[usize]| cs.iter().map(|&c| means[c]).collect::<Vec<f64>>();
    let (a, b) = (pick(&c1), pick(&c2));
    let (sd1, sd2) = (sample_variance(&a).sqrt(), sample_variance(&b).sqrt());
    if !(sd1 > 0.0) {
        return Err(Error::Degenerate("zero spread in window 1".into()));
    }
    let mut sorted = deltas.clone();
    sorted.sort_by(f64::total_cmp);
    let prob_positive = deltas.iter().filter(|d| **d > 0.0).count() as f64 / deltas.len() as f64;
    let (m1, m2) = (mean(&a), mean(&b));
    Ok(ChangeSummary {
        site: pred.site.id.clone(),
        mean1: m1,
        mean2: m2,
        delta_mean: m2 - m1,
        q_sd: sd2 / sd1,
        posterior: Some(PosteriorChange {
            mean: mean(&deltas),
            lower: crate::stats::quantile_sorted(&sorted, 0.05),
            upper: crate::stats::quantile_sorted(&sorted, 0.95),
            prob_positive,
            samples: deltas,
        }),
    })
}

/// Change summaries of every site of a panel.
pub fn change_summary_panel(
    data: &PanelDataset,
    w1: YearWindow,
    w2: YearWindow,
) -> Result<Vec<ChangeSummary>> {
    (0..data.n_sites())
        .map(|i| change_summary(&data.site_series(i), data.first_year, w1, w2))
        .collect()
}

/// CSV with header `site,mean1,mean2,delta_mean,q_sd,prob_positive`.
pub fn write_change_csv<W: Write>(out: W, rows: &[ChangeSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "site",
        "mean1",
        "mean2",
        "delta_mean",
        "q_sd",
        "prob_positive",
    ])?;
    for r in rows {
        w.write_record([
            r.site.clone(),
            r.mean1.to_string(),
            r.mean2.to_string(),
            r.delta_mean.to_string(),
            r.q_sd.to_string(),
            r.posterior
                .as_ref()
                .map(|p| p.prob_positive.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
