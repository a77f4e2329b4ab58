//! Every full conditional against the joint density: for two values `a`,
//! `b` of one block, `log p(a | rest) − log p(b | rest)` must equal
//! `log p(a, rest) − log p(b, rest)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmax_core::gibbs::{
    coefficient_conditional, field_mean_conditional, gamma_conditional, log_joint, phi_log_weights,
    psi_conditional, rho_psi_conditional, site_field_conditional, variance_conditional,
    z_rho_global_log_target, z_rho_log_target, z_sig2_global_log_target, z_sig2_log_target, ArSums,
    Coefficient, FitContext, ResidualWorkspace, VarianceParam,
};
use tmax_core::model::GpField;
use tmax_core::stats::{inverse_gamma_ln_pdf, Gaussian};
use tmax_core::{ModelState, ModelVariant};

pub const TOL: f64 = 1e-8;

#[derive(Debug, Default)]
pub struct RatioReport {
    pub checks: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

impl RatioReport {
    fn record(&mut self, what: String, lhs: f64, rhs: f64) {
        self.checks += 1;
        let err = (lhs - rhs).abs();
        self.worst = self.worst.max(err);
        if err.is_nan() || err > TOL {
            self.failures
                .push(format!("{what}: conditional {lhs:.12} vs joint {rhs:.12}"));
        }
    }
}

fn lj(ctx: &FitContext, s: &ModelState) -> f64 {
    log_joint(ctx, s).unwrap()
}

/// Joint log ratio of two edits of `state`.
fn joint_diff(
    ctx: &FitContext,
    state: &ModelState,
    a: f64,
    b: f64,
    set: impl Fn(&mut ModelState, f64),
) -> f64 {
    let mut sa = state.clone();
    set(&mut sa, a);
    let mut sb = state.clone();
    set(&mut sb, b);
    lj(ctx, &sa) - lj(ctx, &sb)
}

fn pair(rng: &mut ChaCha8Rng, g: &Gaussian) -> (f64, f64) {
    let sd = g.var.sqrt();
    (
        g.mean + sd * rng.random_range(0.2..1.5),
        g.mean - sd * rng.random_range(0.2..1.5),
    )
}

fn gaussian_check(
    rep: &mut RatioReport,
    rng: &mut ChaCha8Rng,
    ctx: &FitContext,
    state: &ModelState,
    what: String,
    g: Gaussian,
    set: impl Fn(&mut ModelState, f64),
) {
    let (a, b) = pair(rng, &g);
    let lhs = g.ln_pdf(a) - g.ln_pdf(b);
    rep.record(what, lhs, joint_diff(ctx, state, a, b, set));
}

/// Checks every update of `variant` on a random tiny instance.
pub fn check_instance(seed: u64, variant: ModelVariant, rep: &mut RatioReport) {
    let (ctx, state) = super::tiny_instance(seed, variant);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 7);
    let ws = ResidualWorkspace::new(&ctx, &state);
    let v = ctx.variant;
    let tag = |s: &str| format!("{} seed {seed} {s}", v.label());

    let mut coefs = vec![Coefficient::Sin, Coefficient::Cos];
    if v.elevation_effect {
        coefs.push(Coefficient::Elevation);
    }
    for c in coefs {
        let g = coefficient_conditional(&ctx, &ws, &state, c).unwrap();
        gaussian_check(
            rep,
            &mut rng,
            &ctx,
            &state,
            tag(&format!("{c:?}")),
            g,
            move |s, x| match c {
                Coefficient::Sin => s.fixed.beta1 = x,
                Coefficient::Cos => s.fixed.beta2 = x,
                Coefficient::Elevation => s.fixed.beta3 = x,
            },
        );
    }

    for f in GpField::ALL {
        let gp = v.has_gp(f);
        if !gp && matches!(f, GpField::Rho | GpField::Sig2) {
            continue;
        }
        let g = field_mean_conditional(&ctx, &state, f).unwrap();
        gaussian_check(
            rep,
            &mut rng,
            &ctx,
            &state,
            tag(&format!("{} mean", f.name())),
            g,
            move |s, x| {
                s.set_field_mean(f, x);
                if !gp {
                    s.collapse_field(f);
                }
            },
        );
    }

    let mut vars = vec![VarianceParam::Eta];
    if v.year_effects {
        vars.push(VarianceParam::Lambda);
    }
    vars.extend(v.gp_fields().map(VarianceParam::Field));
    for w in vars {
        let ig = variance_conditional(&ctx, &state, w).unwrap();
        let set = move |s: &mut ModelState, x: f64| match w {
            VarianceParam::Eta => s.hyper.sigma2_eta = x,
            VarianceParam::Lambda => s.hyper.sigma2_lambda = x,
            VarianceParam::Field(f) => s.set_field_variance(f, x),
        };
        let cur = match w {
            VarianceParam::Eta => state.hyper.sigma2_eta,
            VarianceParam::Lambda => state.hyper.sigma2_lambda,
            VarianceParam::Field(f) => state.field_variance(f),
        };
        let (a, b) = (
            cur * rng.random_range(1.1..1.6),
            cur / rng.random_range(1.1..1.6),
        );
        let lhs =
            inverse_gamma_ln_pdf(a, ig.shape, ig.rate) - inverse_gamma_ln_pdf(b, ig.shape, ig.rate);
        rep.record(
            tag(&format!("{w:?}")),
            lhs,
            joint_diff(&ctx, &state, a, b, set),
        );
    }

    for f in v.gp_fields() {
        let table = ctx.phi_table(f);
        if table.len() < 2 {
            continue;
        }
        let lw = phi_log_weights(&ctx, &state, f).unwrap();
        let (k1, k2) = (0, table.len() - 1);
        let lhs = lw[k1] - lw[k2];
        let rhs = joint_diff(&ctx, &state, table.values[k1], table.values[k2], |s, x| {
            s.set_field_phi(f, x)
        });
        rep.record(tag(&format!("phi {}", f.name())), lhs, rhs);
    }

    for f in [GpField::Beta0, GpField::Alpha] {
        if !v.has_gp(f) {
            continue;
        }
        for i in 0..ctx.n_sites {
            let g = site_field_conditional(&ctx, &state, f, i).unwrap();
            gaussian_check(
                rep,
                &mut rng,
                &ctx,
                &state,
                tag(&format!("{}[{i}]", f.name())),
                g,
                move |s, x| s.field_mut(f)[i] = x,
            );
        }
    }

    let sums: Vec<ArSums> = (0..ctx.n_sites).map(|i| ws.ar_sums(i)).collect();
    for f in [GpField::Rho, GpField::Sig2] {
        let site_target = |i: usize, z: f64| match f {
            GpField::Rho => z_rho_log_target(&ctx, &state, &sums[i], i, z).unwrap(),
            _ => z_sig2_log_target(&ctx, &state, &sums[i], i, z).unwrap(),
        };
        if v.has_gp(f) {
            for i in 0..ctx.n_sites {
                let cur = state.field(f)[i];
                let (a, b) = (
                    cur + rng.random_range(0.05..0.5),
                    cur - rng.random_range(0.05..0.5),
                );
                let lhs = site_target(i, a) - site_target(i, b);
                let rhs = joint_diff(&ctx, &state, a, b, move |s, x| s.field_mut(f)[i] = x);
                rep.record(tag(&format!("Z {}[{i}]", f.name())), lhs, rhs);
            }
        } else {
            let target = |z: f64| match f {
                GpField::Rho => z_rho_global_log_target(&ctx, &state, &sums, z),
                _ => z_sig2_global_log_target(&ctx, &state, &sums, z),
            };
            let cur = state.field_mean(f);
            let (a, b) = (
                cur + rng.random_range(0.05..0.5),
                cur - rng.random_range(0.05..0.5),
            );
            let rhs = joint_diff(&ctx, &state, a, b, move |s, x| {
                s.set_field_mean(f, x);
                s.collapse_field(f);
            });
            rep.record(
                tag(&format!("Z {} common", f.name())),
                target(a) - target(b),
                rhs,
            );
        }
    }

    if v.year_effects {
        for t in 1..ctx.n_years {
            let g = psi_conditional(&ctx, &state, t).unwrap();
            gaussian_check(
                rep,
                &mut rng,
                &ctx,
                &state,
                tag(&format!("psi[{t}]")),
                g,
                move |s, x| s.temporal.psi[t] = x,
            );
        }
        if !v.pin_rho_psi_zero {
            let g = rho_psi_conditional(&state).unwrap();
            let (a, b) = (rng.random_range(-0.9..0.0), rng.random_range(0.0..0.9));
            let lhs = g.ln_pdf(a) - g.ln_pdf(b);
            let rhs = joint_diff(&ctx, &state, a, b, |s, x| s.hyper.rho_psi = x);
            rep.record(tag("rho_psi"), lhs, rhs);
        }
    }

    for t in 0..ctx.n_years {
        for i in 0..ctx.n_sites {
            let g = gamma_conditional(&ctx, &ws, &state, t, i).unwrap();
            gaussian_check(
                rep,
                &mut rng,
                &ctx,
                &state,
                tag(&format!("gamma[{t},{i}]")),
                g,
                move |s, x| *s.temporal.gamma_mut(t, i) = x,
            );
        }
    }
}

/// The suite over `seeds` random instances of every tested variant.
pub fn run(seeds: std::ops::Range<u64>) -> RatioReport {
    let mut rep = RatioReport::default();
    for seed in seeds {
        for v in super::ratio_variants() {
            check_instance(seed, v, &mut rep);
        }
    }
    rep
}
