use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use tmax_core::diagnostics::{diagnose, write_trace_csv};
use tmax_core::io::{
    ingest, local_summary, read_draws_csv, summarize, write_draws_csv, write_observations_csv,
    write_param_csv, write_sites_csv, FitRecord, SiteFormat,
};
use tmax_core::local::{compare_local_vs_full, fit_local};
use tmax_core::metrics::{
    change_summary_panel, change_summary_predictive, run_loocv, write_change_csv, LoocvConfig,
    YearWindow,
};
use tmax_core::predict::{compose_series, impute_missing, predict_panel, Day1, PredictOptions};
use tmax_core::synth::simulate_panel;
use tmax_core::{
    run_chains, ChainOutput, FitContext, GeneratorSpec, ModelVariant, PanelDataset, Posterior,
    PredictiveSamples, RunConfig, SiteMeta,
};

use crate::args::*;

const DRAWS: &str = "draws.csv";
const RECORD: &str = "fit.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// A file, or stdout when no path is given.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(data: &DataArgs) -> Result<RunConfig> {
    let mut cfg = match &data.config {
        Some(p) => {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_toml(&s)?
        }
        None => RunConfig::default(),
    };
    if let Some(f) = data.site_format {
        cfg.site_format = match f {
            SiteFormatArg::Planar => SiteFormat::Planar,
            SiteFormatArg::Lonlat => SiteFormat::LonLat,
        };
    }
    if data.sites.is_some() {
        cfg.sites.clone_from(&data.sites);
    }
    if data.observations.is_some() {
        cfg.observations.clone_from(&data.observations);
    }
    Ok(cfg)
}

fn apply_chain(cfg: &mut RunConfig, a: &ChainArgs) -> Result<()> {
    if let Some(v) = a.chains {
        cfg.chains = v;
    }
    if let Some(v) = a.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = a.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = a.thin {
        cfg.thin = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(())
}

fn load_panel(cfg: &RunConfig) -> Result<PanelDataset> {
    let sites = cfg
        .sites
        .as_deref()
        .ok_or_else(|| anyhow!("no sites file given"))?;
    let obs = cfg
        .observations
        .as_deref()
        .ok_or_else(|| anyhow!("no observations file given"))?;
    let (panel, report) = ingest(sites, obs, cfg.site_format, cfg.day_of_year_offset)?;
    info!(
        "read {} rows: {} sites, {} years of {} days",
        report.rows,
        panel.n_sites(),
        panel.n_years(),
        panel.n_days()
    );
    for (id, c) in &report.completeness {
        if *c < 1.0 {
            warn!("site {id} is {:.1}% complete", 100.0 * c);
        }
    }
    Ok(panel)
}

/// The panel restricted to what can be fitted under `cfg`.
fn fit_panel(panel: PanelDataset, cfg: &RunConfig) -> Result<PanelDataset> {
    if !cfg.drop_incomplete {
        panel.check_fit_ready()?;
        return Ok(panel);
    }
    let kept = panel.complete_sites()?;
    if kept.n_sites() < panel.n_sites() {
        warn!(
            "dropped {} incomplete sites",
            panel.n_sites() - kept.n_sites()
        );
    }
    Ok(kept)
}

fn load_fit(dir: &Path) -> Result<Vec<ChainOutput>> {
    let rec = dir.join(RECORD);
    let record: FitRecord = serde_json::from_reader(BufReader::new(
        File::open(&rec).with_context(|| format!("opening {}", rec.display()))?,
    ))
    .with_context(|| format!("parsing {}", rec.display()))?;
    let draws = dir.join(DRAWS);
    let f = File::open(&draws).with_context(|| format!("opening {}", draws.display()))?;
    Ok(read_draws_csv(BufReader::new(f), &record)?)
}

fn write_predictive(pred: &PredictiveSamples, s: &SampleArgs) -> Result<()> {
    pred.write_summary_csv(sink(s.out.as_deref())?)?;
    if let Some(p) = &s.replicates_out {
        pred.write_replicates_csv(create(p)?)?;
    }
    Ok(())
}

fn year_index(first_year: i32, n_years: usize, year: i32) -> Result<usize> {
    let t = year - first_year;
    if t < 0 || t as usize >= n_years {
        bail!(
            "year {year} is outside the fitted years {first_year}-{}",
            first_year + n_years as i32 - 1
        );
    }
    Ok(t as usize)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut cfg = load_config(&a.data)?;
    apply_chain(&mut cfg, &a.chain)?;
    if let Some(v) = &a.variant {
        cfg.variant.clone_from(v);
    }
    if a.out.is_some() {
        cfg.out_dir.clone_from(&a.out);
    }
    cfg.validate()?;
    let out = cfg
        .out_dir
        .clone()
        .ok_or_else(|| anyhow!("no output directory given"))?;
    let panel = fit_panel(load_panel(&cfg)?, &cfg)?;
    let priors = cfg.priors()?;
    let ctx = FitContext::new(&panel, priors.clone(), cfg.model_variant()?, cfg.scaling)?;
    info!(
        "fitting {} with {} chains of {} iterations",
        ctx.variant.label(),
        cfg.chains,
        cfg.iterations
    );
    let chains = run_chains(&ctx, &cfg.chain_config(), cfg.chains)?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_draws_csv(create(&out.join(DRAWS))?, &chains)?;
    serde_json::to_writer_pretty(
        create(&out.join(RECORD))?,
        &FitRecord::new(&chains, &priors),
    )?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let summary = summarize(&chains)?;
    fs::write(out.join("summary.json"), summary.to_json()?)?;
    let rows: Vec<_> = summary
        .params
        .iter()
        .chain(&summary.sites)
        .cloned()
        .collect();
    write_param_csv(create(&out.join("summary.csv"))?, &rows)?;
    info!("wrote {}", out.display());
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let chains = load_fit(&a.fit)?;
    let post = Posterior::new(&chains)?;
    let l = &a.location;
    let s0 = SiteMeta::new(l.site_id.clone(), l.site_x, l.site_y, l.elev);
    let years: Vec<usize> = if a.year.is_empty() {
        (0..post.n_years).collect()
    } else {
        a.year
            .iter()
            .map(|&y| year_index(post.first_year, post.n_years, y))
            .collect::<Result<_>>()?
    };
    let through = a.through_day.unwrap_or(post.n_days);
    let opts = PredictOptions {
        replicates: a.sample.replicates,
        seed: a.sample.seed,
    };
    let pred = if a.day1.is_empty() {
        let cfg = load_config(&a.data)?;
        let panel = load_panel(&cfg)?;
        if panel.first_year != post.first_year || panel.n_years() != post.n_years {
            bail!("the panel years do not match the fit");
        }
        compose_series(&post, &s0, &years, through, Day1::Kriged(&panel), opts)?
    } else {
        if a.day1.len() != years.len() {
            bail!(
                "--day1 needs one value per predicted year ({})",
                years.len()
            );
        }
        let mut given = vec![f64::NAN; post.n_years];
        for (&t, &v) in years.iter().zip(&a.day1) {
            given[t] = v;
        }
        compose_series(&post, &s0, &years, through, Day1::Given(&given), opts)?
    };
    write_predictive(&pred, &a.sample)
}

pub fn impute(a: &ImputeArgs) -> Result<()> {
    let chains = load_fit(&a.fit)?;
    let post = Posterior::new(&chains)?;
    let cfg = load_config(&a.data)?;
    let panel = load_panel(&cfg)?;
    let i = panel
        .site_index(&a.site_id)
        .ok_or_else(|| anyhow!("site {} is not in the sites file", a.site_id))?;
    let opts = PredictOptions {
        replicates: a.sample.replicates,
        seed: a.sample.seed,
    };
    let pred = impute_missing(&post, &panel, i, opts)?;
    info!("imputed {} cells at {}", pred.n_cells(), a.site_id);
    write_predictive(&pred, &a.sample)
}

pub fn loocv(a: &LoocvArgs) -> Result<()> {
    let mut cfg = load_config(&a.data)?;
    apply_chain(&mut cfg, &a.chain)?;
    let variants: Vec<ModelVariant> = if a.lattice {
        ModelVariant::standard_lattice()
    } else if a.variants.is_empty() {
        vec![ModelVariant::none(), ModelVariant::full()]
    } else {
        a.variants
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    };
    let pin = !cfg.rho_psi_free;
    let variants: Vec<ModelVariant> = variants
        .into_iter()
        .map(|mut v| {
            v.pin_rho_psi_zero = pin;
            v
        })
        .collect();
    let panel = fit_panel(load_panel(&cfg)?, &cfg)?;
    let lc = LoocvConfig {
        chain: cfg.chain_config(),
        chains: cfg.chains,
        scaling: cfg.scaling,
        replicates: a.replicates,
    };
    info!("{} variants x {} folds", variants.len(), panel.n_sites());
    let table = run_loocv(&panel, &cfg.priors()?, &variants, &lc)?;
    if table.failures() > 0 {
        warn!("{} folds failed; see the JSON output", table.failures());
    }
    table.write_csv(sink(a.out.as_deref())?)?;
    if let Some(p) = &a.json {
        fs::write(p, table.to_json()?)?;
    }
    Ok(())
}

pub fn diagnose_cmd(a: &DiagnoseArgs) -> Result<()> {
    let chains = load_fit(&a.fit)?;
    let report = diagnose(&chains)?;
    if let Some(r) = report.max_rhat() {
        info!("max R-hat {r:.3}");
    }
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "{}", report.to_json()?)?;
    if let Some(p) = &a.trace {
        write_trace_csv(create(p)?, &chains)?;
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GeneratorSpec::from_toml(&s)?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let (panel, state) = simulate_panel(&spec)?;
    let out: &PathBuf = &a.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_sites_csv(create(&out.join("sites.csv"))?, panel.sites())?;
    write_observations_csv(create(&out.join("observations.csv"))?, &panel)?;
    let truth = serde_json::json!({
        "truth": spec.truth,
        "state_model_scale": state,
        "spec": spec,
    });
    serde_json::to_writer_pretty(create(&out.join("truth.json"))?, &truth)?;
    fs::write(out.join("spec.toml"), spec.to_toml()?)?;
    info!(
        "simulated {} sites, {} years of {} days into {}",
        panel.n_sites(),
        panel.n_years(),
        panel.n_days(),
        out.display()
    );
    Ok(())
}

pub fn local_fit(a: &LocalFitArgs) -> Result<()> {
    let mut cfg = load_config(&a.data)?;
    apply_chain(&mut cfg, &a.chain)?;
    let panel = load_panel(&cfg)?;
    let which: Vec<usize> = match &a.site_id {
        Some(id) => vec![panel
            .site_index(id)
            .ok_or_else(|| anyhow!("site {id} is not in the sites file"))?],
        None => (0..panel.n_sites())
            .filter(|&i| panel.site_is_complete(i))
            .collect(),
    };
    if which.is_empty() {
        bail!("no complete site to fit");
    }
    let priors = cfg.priors()?;
    let chain = cfg.chain_config();
    let fits: Vec<ChainOutput> = which
        .par_iter()
        .map(|&i| {
            fit_local(
                &panel.site_series(i),
                panel.first_year,
                panel.day_of_year_offset,
                &priors,
                &chain,
            )
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for f in &fits {
        rows.extend(local_summary(f)?);
    }
    write_param_csv(sink(a.out.as_deref())?, &rows)?;
    if let Some(dir) = &a.compare {
        let full = load_fit(dir)?;
        let overlap = compare_local_vs_full(&fits, &full)?;
        for r in &overlap {
            info!(
                "{}: overlap alpha {:.2}, rho_y {:.2}, sigma_eps {:.2}",
                r.site, r.alpha, r.rho_y, r.sigma_eps
            );
        }
        if let Some(p) = &a.overlap_out {
            serde_json::to_writer_pretty(create(p)?, &overlap)?;
        }
    }
    Ok(())
}

pub fn change(a: &ChangeArgs) -> Result<()> {
    let w1: YearWindow = a.window1.parse()?;
    let w2: YearWindow = a.window2.parse()?;
    let cfg = load_config(&a.data)?;
    let panel = load_panel(&cfg)?;
    let rows = match &a.fit {
        None => change_summary_panel(&panel, w1, w2)?,
        Some(dir) => {
            let chains = load_fit(dir)?;
            let post = Posterior::new(&chains)?;
            let (x, y, e) = match (a.site_x, a.site_y, a.elev) {
                (Some(x), Some(y), Some(e)) => (x, y, e),
                _ => bail!("--fit needs --site-x, --site-y and --elev"),
            };
            let s0 = SiteMeta::new("new", x, y, e);
            let opts = PredictOptions {
                replicates: a.replicates,
                seed: a.seed,
            };
            let pred = predict_panel(&post, &s0, Day1::Kriged(&panel), opts)?;
            vec![change_summary_predictive(&pred, w1, w2)?]
        }
    };
    write_change_csv(sink(a.out.as_deref())?, &rows)?;
    Ok(())
}
