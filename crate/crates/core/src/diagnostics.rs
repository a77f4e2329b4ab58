//! Convergence diagnostics: potential scale reduction, effective sample
//! size, the two-view thinning protocol and trace export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{AcceptanceReport, ChainOutput};
use crate::model::HyperState;

/// Classic (non-split) Gelman-Rubin statistic over `M >= 2` chains of
/// equal length `n >= 2`.
///
/// With zero within-chain variance the result is 1 when all chain means
/// agree and `+inf` otherwise.
pub fn rhat(chains: &[&[f64]]) -> Result<f64> {
    let (m, n) = check_shape(chains, 2, 2)?;
    let means: Vec<f64> = chains.iter().map(|c| crate::stats::mean(c)).collect();
    let w = chains
        .iter()
        .map(|c| crate::stats::sample_variance(c))
        .sum::<f64>()
        / m as f64;
    let b_over_n = crate::stats::sample_variance(&means);
    if w == 0.0 {
        return Ok(if b_over_n == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let nf = n as f64;
    Ok((((nf - 1.0) / nf * w + b_over_n) / w).sqrt())
}

fn check_shape(chains: &[&[f64]], min_m: usize, min_n: usize) -> Result<(usize, usize)> {
    let m = chains.len();
    if m < min_m {
        return Err(Error::InsufficientDraws {
            required: min_m,
            available: m,
        });
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidConfig("chains differ in length".into()));
    }
    if n < min_n {
        return Err(Error::InsufficientDraws {
            required: min_n,
            available: n,
        });
    }
    Ok((m, n))
}

/// Relative slack allowed above the total draw count.
pub const ESS_CAP: f64 = 1.05;

/// Multi-chain effective sample size: `M n / (1 + 2 Σ ρ_k)` with the
/// autocorrelations pooled across chains and the sum truncated by Geyer's
/// initial monotone sequence rule. A constant chain gives 1.
pub fn ess(chains: &[&[f64]]) -> Result<f64> {
    let (m, n) = check_shape(chains, 1, 4)?;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| crate::stats::mean(c)).collect();
    let acov0: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / nf)
        .collect();
    let w = acov0.iter().sum::<f64>() / m as f64 * nf / (nf - 1.0);
    let b_over_n = if m > 1 {
        crate::stats::sample_variance(&means)
    } else {
        0.0
    };
    let var_plus = w * (nf - 1.0) / nf + b_over_n;
    if !(var_plus > 0.0) {
        return Ok(1.0);
    }
    let acov = |k: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                c[..n - k]
                    .iter()
                    .zip(&c[k..])
                    .map(|(a, b)| (a - mu) * (b - mu))
                    .sum::<f64>()
                    / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |k: usize| 1.0 - (w - acov(k)) / var_plus;

    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while k + 1 < n {
        let pair = if k == 0 {
            1.0 + rho(1)
        } else {
            rho(k) + rho(k + 1)
        };
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 2;
    }
    let tau = (2.0 * sum - 1.0).max(f64::MIN_POSITIVE);
    let total = (m * n) as f64;
    Ok((total / tau).min(ESS_CAP * total))
}

/// The two thinned views of the inference protocol: one for R̂, one for
/// effective sample size and posterior summaries.
#[derive(Debug, Clone)]
pub struct ThinnedViews {
    pub rhat: Vec<ChainOutput>,
    pub inference: Vec<ChainOutput>,
    pub meta: ThinMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinMeta {
    pub available_per_chain: usize,
    pub rhat_per_chain: usize,
    pub rhat_stride: usize,
    pub inference_per_chain: usize,
    pub inference_stride: usize,
}

/// Indices kept when thinning `available` draws to `target`: the last draw
/// of each of `target` consecutive blocks of width `available / target`.
pub fn thin_indices(available: usize, target: usize) -> Result<Vec<usize>> {
    if target == 0 || available < target {
        return Err(Error::InsufficientDraws {
            required: target.max(1),
            available,
        });
    }
    let stride = available / target;
    Ok((1..=target).map(|k| k * stride - 1).collect())
}

fn thin_output(c: &ChainOutput, idx: &[usize]) -> ChainOutput {
    let mut out = c.clone();
    out.draws = idx.iter().map(|&k| c.draws[k].clone()).collect();
    out.thin = c.thin * (c.draws.len() / idx.len().max(1));
    out
}

/// Deterministic stride thinning of every chain to the two target counts.
pub fn thin_protocol(
    chains: &[ChainOutput],
    rhat_per_chain: usize,
    inference_per_chain: usize,
) -> Result<ThinnedViews> {
    let available = chains.iter().map(|c| c.n_draws()).min().unwrap_or(0);
    let need = rhat_per_chain.max(inference_per_chain);
    if available < need || chains.is_empty() {
        return Err(Error::InsufficientDraws {
            required: need,
            available,
        });
    }
    let ri = thin_indices(available, rhat_per_chain)?;
    let ii = thin_indices(available, inference_per_chain)?;
    Ok(ThinnedViews {
        rhat: chains.iter().map(|c| thin_output(c, &ri)).collect(),
        inference: chains.iter().map(|c| thin_output(c, &ii)).collect(),
        meta: ThinMeta {
            available_per_chain: available,
            rhat_per_chain,
            rhat_stride: available / rhat_per_chain,
            inference_per_chain,
            inference_stride: available / inference_per_chain,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub param: String,
    pub rhat: Option<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub params: Vec<ParamDiagnostics>,
    pub acceptance: Vec<AcceptanceReport>,
    pub thinning: Option<ThinMeta>,
}

impl DiagnosticsReport {
    /// Largest finite-or-infinite R̂ over parameters, if any was computed.
    pub fn max_rhat(&self) -> Option<f64> {
        self.params.iter().filter_map(|p| p.rhat).reduce(f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// R̂ (with at least two chains) and ESS of every scalar the sampler moves,
/// plus per-site fields, over chains of equal length.
pub fn diagnose(chains: &[ChainOutput]) -> Result<DiagnosticsReport> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidConfig("no chains to diagnose".into()))?;
    let n = first.n_draws();
    if chains.iter().any(|c| c.n_draws() != n) {
        return Err(Error::InvalidConfig("chains differ in length".into()));
    }
    let mut params = Vec::new();
    for (name, traces) in parameter_traces(chains) {
        let views: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
        let rhat = if chains.len() >= 2 {
            Some(rhat(&views)?)
        } else {
            None
        };
        params.push(ParamDiagnostics {
            param: name,
            rhat,
            ess: ess(&views)?,
        });
    }
    Ok(DiagnosticsReport {
        chains: chains.len(),
        draws_per_chain: n,
        params,
        acceptance: chains.iter().map(|c| c.acceptance.clone()).collect(),
        thinning: None,
    })
}

/// Per-chain traces of every reported parameter: sampled scalars, then the
/// site fields of the variant's processes as `name[site]`.
pub fn parameter_traces(chains: &[ChainOutput]) -> Vec<(String, Vec<Vec<f64>>)> {
    let Some(first) = chains.first() else {
        return Vec::new();
    };
    let mut out: Vec<(String, Vec<Vec<f64>>)> = first
        .scalar_names()
        .into_iter()
        .map(|n| {
            let tr = chains
                .iter()
                .map(|c| c.scalar_trace(n).unwrap_or_default())
                .collect();
            (n.to_string(), tr)
        })
        .collect();
    for f in first.variant.gp_fields() {
        for (i, site) in first.sites.iter().enumerate() {
            let tr = chains
                .iter()
                .map(|c| c.draws.iter().map(|d| d.field(f)[i]).collect())
                .collect();
            out.push((format!("{}[{}]", field_label(f), site.id), tr));
        }
    }
    out
}

fn field_label(f: crate::model::GpField) -> &'static str {
    use crate::model::GpField::*;
    match f {
        Beta0 => "beta0_site",
        Alpha => "alpha_site",
        Rho => "z_rho_site",
        Sig2 => "z_sig2_site",
    }
}

/// Long-format trace CSV, header `chain,iter,param,value`; `iter` is the
/// sampler iteration (1-based) at which the draw was retained.
pub fn write_trace_csv<W: Write>(out: W, chains: &[ChainOutput]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chain", "iter", "param", "value"])?;
    let traces = parameter_traces(chains);
    for (c, chain) in chains.iter().enumerate() {
        for k in 0..chain.n_draws() {
            let iter = chain.burn_in + (k + 1) * chain.thin;
            for (name, tr) in &traces {
                w.write_record([
                    chain.chain.to_string(),
                    iter.to_string(),
                    name.clone(),
                    format!("{}", tr[c][k]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Stationary covariance of the year-site effects between `(t, s)` and
/// `(t + lag, s')` at distance `d`, excluding the site-year noise `ση²`
/// (add it for `lag = 0`, `d = 0`, same site). `time_t` and `time_th` are the
/// model-scale times of the two years.
pub fn equilibrium_covariance(
    hyper: &HyperState,
    time_t: f64,
    time_th: f64,
    lag: usize,
    d: f64,
) -> Result<f64> {
    if !(hyper.rho_psi.abs() < 1.0) {
        return Err(Error::Degenerate("|rho_psi| must be below 1".into()));
    }
    let h = hyper;
    let spatial = h.sigma2_beta0 * (-h.phi_beta0 * d).exp()
        + time_t * time_th * h.sigma2_alpha * (-h.phi_alpha * d).exp();
    let temporal = h.sigma2_lambda / (1.0 - h.rho_psi * h.rho_psi) * h.rho_psi.powi(lag as i32);
    Ok(spatial + temporal)
}
