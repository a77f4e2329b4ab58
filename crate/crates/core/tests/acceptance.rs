//! Acceptance suite: one line per criterion. Criteria listed in
//! `KNOWN_UNMET` report FAIL without failing the target; any other failure
//! exits non-zero.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmax_core::diagnostics::{diagnose, equilibrium_covariance, ess, rhat};
use tmax_core::io::{summarize, write_draws_csv};
use tmax_core::metrics::{crps_ensemble, run_loocv, score_site, LoocvConfig, MeanScore};
use tmax_core::model::GpField;
use tmax_core::predict::{krige_latent, Cell, Posterior};
use tmax_core::spatial::{exp_correlation, krige_conditional, KrigingSystem, KrigingWeights};
use tmax_core::stats::{mean, std_normal};
use tmax_core::synth::{
    simulate_latent_state, simulate_panel, spec_design, truth_phi_prior, SiteLayout,
};
use tmax_core::{
    run_chains, ChainConfig, ChainOutput, FitContext, GeneratorSpec, HyperPriors, ModelVariant,
    PredictiveSamples, ScalingPolicy, SiteMeta, SiteSeries,
};

/// Criteria that do not pass with the current model and settings, with
/// the reason. See the README.
const KNOWN_UNMET: &[(u32, &str)] = &[(
    3,
    "IG(2,1) variance priors exclude the small true site-field and year-site variances",
)];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// 1. full-conditional density ratios

fn density_ratios() -> Outcome {
    let rep = common::ratio::run(0..20);
    let mut d = format!("{} checks, worst |error| {:.1e}", rep.checks, rep.worst);
    if let Some(f) = rep.failures.first() {
        d += &format!("; first failure: {f}");
    }
    outcome(rep.failures.is_empty() && rep.checks > 0, d)
}

// 2. getting it right

fn geweke() -> Outcome {
    let rep = common::geweke::run(50_000, 11);
    let w = rep.worst();
    outcome(
        rep.passed(),
        format!(
            "{} sweeps, {} moments, worst {} at {:.2} SE (limit {})",
            rep.sweeps,
            rep.moments.len(),
            w.name,
            w.z,
            common::geweke::Z_LIMIT
        ),
    )
}

// 3 and 4 share one recovery run

struct Recovery {
    spec: GeneratorSpec,
    chains: Vec<ChainOutput>,
}

fn recovery_run() -> &'static Recovery {
    static RUN: OnceLock<Recovery> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = GeneratorSpec {
            n_days: 40,
            seed: 1,
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
        let chains = run_chains(&ctx, &ChainConfig::new(5_000, 2_500, 5, 1), 2).unwrap();
        Recovery { spec, chains }
    })
}

fn recovery() -> Outcome {
    let r = recovery_run();
    let summary = summarize(&r.chains).unwrap();
    let mut missed = Vec::new();
    let mut covered = 0;
    for (name, truth) in r.spec.truth.reported() {
        if summary.get(name).unwrap().covers(truth) {
            covered += 1;
        } else {
            missed.push(name);
        }
    }
    let report = diagnose(&r.chains).unwrap();
    let worst = report.max_rhat().unwrap_or(f64::INFINITY);
    outcome(
        covered >= 10 && worst < 1.2,
        format!(
            "{covered}/13 intervals cover the truth (need 10; missed {}), max R-hat {worst:.3}",
            missed.join(", ")
        ),
    )
}

fn mh_acceptance() -> Outcome {
    let r = recovery_run();
    let all: Vec<f64> = r
        .chains
        .iter()
        .flat_map(|c| c.acceptance.rho.iter().chain(&c.acceptance.sig2))
        .copied()
        .collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        r.chains.iter().all(|c| c.acceptance.all_within(0.15, 0.40)),
        format!("{} site rates in [{lo:.3}, {hi:.3}]", all.len()),
    )
}

// 5. kriging

/// Inverse by Gauss-Jordan elimination with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        m.swap(c, p);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        let pivot = m[c].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != c {
                let f = row[c];
                row.iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Conditional of component 0 given the rest, read off the joint precision.
fn precision_oracle(mu: &[f64], cov: &[Vec<f64>], w: &[f64]) -> (f64, f64) {
    let q = invert(cov);
    let var = 1.0 / q[0][0];
    let shift: f64 = (1..mu.len()).map(|k| q[0][k] * (w[k - 1] - mu[k])).sum();
    (mu[0] - var * shift, var)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn kriging() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..100 {
        // general SPD joint covariance
        let b: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let cov: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        (0..4).map(|k| b[i][k] * b[j][k]).sum::<f64>()
                            + if i == j { 0.5 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let sys = KrigingSystem {
            mu0: mu[0],
            mu: mu[1..].to_vec(),
            sigma00: cov[0][0],
            sigma_i0: (1..4).map(|k| cov[k][0]).collect(),
            sigma: DMatrix::from_fn(3, 3, |j, k| cov[j + 1][k + 1]),
            w: w.clone(),
        };
        let (m, v) = krige_conditional(&sys).unwrap();
        let (om, ov) = precision_oracle(&mu, &cov, &w);
        worst = worst.max((m - om).abs()).max((v - ov).abs());
        bad += usize::from(!close(m, om, 1e-10) || !close(v, ov, 1e-10));

        // exponential field at a new location, the predictor's path
        let sites: Vec<SiteMeta> = (0..4)
            .map(|k| {
                SiteMeta::new(
                    format!("K{k}"),
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..100.0),
                    0.0,
                )
            })
            .collect();
        let phi = rng.random_range(0.005..0.1);
        let sigma2 = rng.random_range(0.1..4.0);
        let level = rng.random_range(-3.0..3.0);
        let cov: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| sigma2 * (-phi * sites[i].distance(&sites[j])).exp())
                    .collect()
            })
            .collect();
        let corr = exp_correlation(&sites[1..], phi).unwrap();
        let (m, v) = KrigingWeights::for_location(&corr, &sites[1..], &sites[0])
            .conditional(&w, level, sigma2);
        let (om, ov) = precision_oracle(&[level; 4], &cov, &w);
        worst = worst.max((m - om).abs()).max((v - ov).abs());
        bad += usize::from(!close(m, om, 1e-10) || !close(v, ov, 1e-10));
    }

    // kriging a fitted field at its own sites returns the draw's values
    let panel = simulate_panel(&common::grid_spec(4, 3, 12, 7)).unwrap().0;
    let ctx = common::context(&panel, ModelVariant::full());
    let chains = run_chains(&ctx, &ChainConfig::new(200, 100, 5, 2), 1).unwrap();
    let post = Posterior::new(&chains).unwrap();
    let mut exact = true;
    for (i, s) in panel.sites().iter().enumerate() {
        for f in GpField::ALL {
            let k = krige_latent(&post, f, s, 9).unwrap();
            exact &= post.draws.iter().zip(&k).all(|(d, v)| d.field(f)[i] == *v);
        }
    }
    outcome(
        bad == 0 && exact,
        format!(
            "{} of 200 systems off by more than 1e-10 (worst {worst:.1e}); exact at observed sites: {exact}",
            bad
        ),
    )
}

// 6. scores

fn brute_crps(xs: &[f64], y: f64) -> f64 {
    let b = xs.len() as f64;
    let a: f64 = xs.iter().map(|x| (x - y).abs()).sum::<f64>() / b;
    let s: f64 = xs
        .iter()
        .flat_map(|x| xs.iter().map(move |z| (x - z).abs()))
        .sum();
    a - s / (2.0 * b * b)
}

fn random_scoring(rng: &mut ChaCha8Rng, n_rep: usize) -> (PredictiveSamples, SiteSeries) {
    let n_days = rng.random_range(2..30);
    let site = SiteMeta::new("R", 0.0, 0.0, 0.0);
    let cells: Vec<Cell> = (1..n_days).map(|l| Cell { year: 0, day: l }).collect();
    let values = (0..n_rep * cells.len())
        .map(|_| 20.0 + 5.0 * std_normal(rng))
        .collect();
    let pred = PredictiveSamples::new(site.clone(), 2000, cells, n_rep, values).unwrap();
    let truth = SiteSeries {
        site,
        n_years: 1,
        n_days,
        values: (0..n_days).map(|_| 20.0 + 5.0 * std_normal(rng)).collect(),
    };
    (pred, truth)
}

fn scores() -> Outcome {
    let hand = crps_ensemble(&[0.0, 2.0], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut crps_err: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let xs: Vec<f64> = (0..n).map(|_| 3.0 * std_normal(&mut rng)).collect();
        let y = std_normal(&mut rng);
        crps_err = crps_err.max((crps_ensemble(&xs, y) - brute_crps(&xs, y)).abs());
    }
    let mut degenerate = true;
    for _ in 0..100 {
        let (pred, truth) = random_scoring(&mut rng, 1);
        let s = score_site(&pred, &truth).unwrap();
        degenerate &= close(s.crps, s.mae, 1e-12);
    }
    let mut ordered = 0;
    for _ in 0..1000 {
        let n_rep = rng.random_range(1..20);
        let (pred, truth) = random_scoring(&mut rng, n_rep);
        let s = score_site(&pred, &truth).unwrap();
        ordered += usize::from(s.rmse >= s.mae);
    }
    outcome(
        hand == 0.5 && crps_err < 1e-10 && degenerate && ordered == 1000,
        format!(
            "CRPS({{0,2}}, 1) = {hand}; sorted vs pairwise CRPS within {crps_err:.1e}; \
             CRPS = MAE at B = 1: {degenerate}; RMSE >= MAE on {ordered}/1000"
        ),
    )
}

// 7. diagnostics on chains with known answers

fn diagnostics_calibration() -> Outcome {
    let (n, m) = (1_000, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let iid: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| std_normal(&mut rng)).collect())
        .collect();
    let refs: Vec<&[f64]> = iid.iter().map(|c| c.as_slice()).collect();
    let r = rhat(&refs).unwrap();
    let per_chain: Vec<f64> = refs.iter().map(|c| ess(&[c]).unwrap()).collect();
    let pooled = ess(&refs).unwrap();
    let iid_ok = (0.99..=1.05).contains(&r)
        && per_chain.iter().all(|e| (e / n as f64 - 1.0).abs() <= 0.2)
        && (pooled / (n * m) as f64 - 1.0).abs() <= 0.2;

    let rho: f64 = 0.5;
    let ar: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut x = std_normal(&mut rng);
            (0..n)
                .map(|_| {
                    let v = x;
                    x = rho * x + (1.0 - rho * rho).sqrt() * std_normal(&mut rng);
                    v
                })
                .collect()
        })
        .collect();
    let ar_ess: Vec<f64> = ar.iter().map(|c| ess(&[c]).unwrap()).collect();
    let target = n as f64 / 3.0;
    let ar_ok = ar_ess.iter().all(|e| (e / target - 1.0).abs() <= 0.25);
    let range = |v: &[f64]| -> (f64, f64) {
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(0.0, f64::max),
        )
    };
    let (lo, hi) = range(&per_chain);
    let (alo, ahi) = range(&ar_ess);
    outcome(
        iid_ok && ar_ok,
        format!(
            "iid: R-hat {r:.4}, ESS per chain [{lo:.0}, {hi:.0}] of {n}, pooled {pooled:.0} of {}; \
             AR(1) 0.5: ESS [{alo:.0}, {ahi:.0}] vs {target:.0}",
            n * m
        ),
    )
}

// 8. predictive calibration at held-out sites

fn predictive_calibration() -> Outcome {
    let spec = GeneratorSpec {
        layout: SiteLayout::Grid {
            n: 8,
            spacing_km: 40.0,
            elev_min: 200.0,
            elev_max: 1000.0,
        },
        n_years: 10,
        n_days: 40,
        seed: 1,
        ..GeneratorSpec::default()
    };
    let (data, _) = simulate_panel(&spec).unwrap();
    let cfg = LoocvConfig {
        chain: ChainConfig::new(2_000, 1_000, 10, 1),
        ..LoocvConfig::default()
    };
    let table = run_loocv(
        &data,
        &HyperPriors::default(),
        &[ModelVariant::full()],
        &cfg,
    )
    .unwrap();
    let cvg = table.variants[0].mean.map_or(f64::NAN, |m| m.cvg);
    outcome(
        table.failures() == 0 && (0.85..=0.95).contains(&cvg),
        format!(
            "mean 90% interval coverage {cvg:.3} over {} held-out sites",
            data.n_sites()
        ),
    )
}

// 9. spatial intercept beats the common intercept in leave-one-out

/// Six sites on a 2 x 3 lattice, 10 km across and 150 km between rows.
fn lattice() -> Vec<SiteMeta> {
    (0..6)
        .map(|k| {
            SiteMeta::new(
                format!("S{}", k + 1),
                (k % 2) as f64 * 10.0,
                (k / 2) as f64 * 150.0,
                500.0,
            )
        })
        .collect()
}

fn loocv_ordering() -> Outcome {
    let m1: ModelVariant = "M1:beta0".parse().unwrap();
    let variants = [ModelVariant::none(), m1];
    let mut sums = [[0.0; 2]; 2];
    let mut folds = 0;
    let mut failures = 0;
    for seed in 1..=6 {
        let mut spec = GeneratorSpec {
            layout: SiteLayout::Sites { sites: lattice() },
            n_years: 10,
            n_days: 40,
            seed,
            ..GeneratorSpec::default()
        };
        spec.truth.sigma_beta0 = 8.0;
        spec.truth.phi = Some(0.0128);
        let (data, _) = simulate_panel(&spec).unwrap();
        let priors = HyperPriors::default().with_phi(truth_phi_prior(&spec));
        let cfg = LoocvConfig {
            chain: ChainConfig::new(2_000, 1_000, 10, seed),
            ..LoocvConfig::default()
        };
        let table = run_loocv(&data, &priors, &variants, &cfg).unwrap();
        failures += table.failures();
        for (k, v) in variants.iter().enumerate() {
            for row in &table
                .variants
                .iter()
                .find(|t| t.variant == v.label())
                .unwrap()
                .sites
            {
                if let Some(s) = &row.score {
                    sums[k][0] += s.rmse;
                    sums[k][1] += s.crps;
                }
            }
        }
        folds += data.n_sites();
    }
    let avg = |k: usize| MeanScore {
        rmse: sums[k][0] / folds as f64,
        mae: f64::NAN,
        crps: sums[k][1] / folds as f64,
        cvg: f64::NAN,
    };
    let (m0, m1) = (avg(0), avg(1));
    outcome(
        failures == 0 && m1.rmse < m0.rmse && m1.crps < m0.crps,
        format!(
            "{folds} folds: RMSE M1 {:.3} vs M0 {:.3}, CRPS M1 {:.3} vs M0 {:.3}",
            m1.rmse, m0.rmse, m1.crps, m0.crps
        ),
    )
}

// 10. equilibrium covariance of the year-site effects

fn equilibrium() -> Outcome {
    let mut spec = GeneratorSpec {
        layout: SiteLayout::Grid {
            n: 5,
            spacing_km: 40.0,
            elev_min: 200.0,
            elev_max: 1000.0,
        },
        n_years: 200,
        n_days: 10,
        ..GeneratorSpec::default()
    };
    spec.truth.rho_psi = 0.6;
    let (sites, scaling, design) = spec_design(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let reps = 3_000;
    let states: Vec<_> = (0..reps)
        .map(|_| simulate_latent_state(&spec, &sites, &scaling, &design, &mut rng).unwrap())
        .collect();
    let hyper = states[0].hyper;
    let pairs = [
        (150, 0, 0, 0),
        (150, 0, 0, 1),
        (160, 1, 0, 0),
        (170, 2, 1, 3),
        (180, 0, 2, 4),
        (190, 5, 4, 0),
        (199, 0, 3, 3),
        (155, 3, 2, 2),
    ];
    let mut worst: f64 = 0.0;
    for (t, lag, i, j) in pairs {
        let a: Vec<f64> = states.iter().map(|s| s.temporal.gamma(t, i)).collect();
        let b: Vec<f64> = states
            .iter()
            .map(|s| s.temporal.gamma(t + lag, j))
            .collect();
        let (ma, mb) = (mean(&a), mean(&b));
        let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let emp = mean(&prods);
        let sd = (prods.iter().map(|p| (p - emp).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        let mut want = equilibrium_covariance(
            &hyper,
            design.time[t],
            design.time[t + lag],
            lag,
            sites[i].distance(&sites[j]),
        )
        .unwrap();
        if lag == 0 && i == j {
            want += hyper.sigma2_eta;
        }
        worst = worst.max(((emp - want) / se).abs());
    }
    outcome(
        worst <= 3.0,
        format!(
            "{} covariances over {reps} replicates, worst {worst:.2} SE",
            pairs.len()
        ),
    )
}

// 11. determinism

fn determinism() -> Outcome {
    let panel = simulate_panel(&common::grid_spec(5, 4, 20, 3)).unwrap().0;
    let ctx = common::context(&panel, ModelVariant::full());
    let cfg = ChainConfig::new(500, 200, 3, 42);
    let csv = |chains: &[ChainOutput]| {
        let mut out = Vec::new();
        write_draws_csv(&mut out, chains).unwrap();
        out
    };
    let a = csv(&run_chains(&ctx, &cfg, 3).unwrap());
    let b = csv(&run_chains(&ctx, &cfg, 3).unwrap());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let c = pool.install(|| csv(&run_chains(&ctx, &cfg, 3).unwrap()));
    outcome(
        a == b && a == c,
        format!(
            "{} bytes; repeat identical: {}; single thread identical: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "full-conditional density ratios", density_ratios),
        (2, "getting-it-right", geweke),
        (3, "parameter recovery", recovery),
        (4, "MH acceptance rates", mh_acceptance),
        (5, "kriging exactness", kriging),
        (6, "metric unit values", scores),
        (7, "diagnostics calibration", diagnostics_calibration),
        (8, "predictive calibration", predictive_calibration),
        (9, "LOOCV ordering M1 vs M0", loocv_ordering),
        (10, "equilibrium covariance", equilibrium),
        (11, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (n, name, run) in criteria {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let known = KNOWN_UNMET.iter().find(|(k, _)| *k == n);
        let status = match (out.pass, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => "FAIL",
        };
        println!(
            "criterion {n:>2} {status:<12} {name}: {} [{:.1}s]",
            out.detail,
            start.elapsed().as_secs_f64()
        );
        match (out.pass, known) {
            (true, Some(_)) => {
                println!("             criterion {n} now passes; drop it from KNOWN_UNMET")
            }
            (false, Some((_, why))) => println!("             known: {why}"),
            (false, None) => unexpected.push(n),
            _ => {}
        }
        passed += usize::from(out.pass);
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
